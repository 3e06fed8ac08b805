#include "volrob/model.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "volrob/ad.hpp"
#include "volrob/rng.hpp"

namespace volrob {

static_assert(std::endian::native == std::endian::little,
              "checkpoint and volume formats assume a little-endian host");

namespace {

constexpr int kMixPatch = 4;
constexpr int kMixDim = 64;  // token width == voxels per 4^3 patch
constexpr int kScanDim = 16;

struct ParamSegment {
  std::string name;
  std::vector<int> shape;
  long offset = 0;
  long count = 0;
};

std::vector<ParamSegment> param_layout(Arch arch, int c) {
  std::vector<ParamSegment> segs;
  auto push = [&segs](const std::string& name, std::vector<int> shape) {
    ParamSegment s;
    s.name = name;
    s.shape = std::move(shape);
    s.count = 1;
    for (const int d : s.shape) s.count *= d;
    s.offset = segs.empty() ? 0 : segs.back().offset + segs.back().count;
    segs.push_back(std::move(s));
  };
  switch (arch) {
    case Arch::ConvSeg:
      push("conv1.w", {8, 1, 27});
      push("conv1.b", {8});
      push("conv2.w", {16, 8, 27});
      push("conv2.b", {16});
      push("conv3.w", {c, 16, 27});
      push("conv3.b", {c});
      break;
    case Arch::MixSeg:
      push("embed.w", {kMixDim, kMixDim});
      push("embed.b", {kMixDim});
      push("attn.wq", {kMixDim, kMixDim});
      push("attn.wk", {kMixDim, kMixDim});
      push("attn.wv", {kMixDim, kMixDim});
      push("dec.w", {kMixDim, kMixDim * c});
      push("dec.b", {kMixDim * c});
      break;
    case Arch::ScanSeg:
      push("embed.w", {1, kScanDim});
      push("embed.b", {kScanDim});
      push("fwd.gate.w", {kScanDim, kScanDim});
      push("fwd.gate.b", {kScanDim});
      push("fwd.update.w", {kScanDim, kScanDim});
      push("fwd.update.b", {kScanDim});
      push("rev.gate.w", {kScanDim, kScanDim});
      push("rev.gate.b", {kScanDim});
      push("rev.update.w", {kScanDim, kScanDim});
      push("rev.update.b", {kScanDim});
      push("dec.fwd.w", {kScanDim, c});
      push("dec.rev.w", {kScanDim, c});
      push("dec.b", {c});
      break;
  }
  return segs;
}

long total_params(const std::vector<ParamSegment>& segs) {
  return segs.empty() ? 0 : segs.back().offset + segs.back().count;
}

// Fan-in-scaled normal init; weights named *.w get the scale, biases stay 0.
std::vector<double> init_params(Arch arch, int c, std::uint64_t seed) {
  const auto segs = param_layout(arch, c);
  std::vector<double> params(total_params(segs), 0.0);
  Rng rng(derive_seed(seed, std::string("init/") + arch_id(arch)));
  for (const auto& seg : segs) {
    if (seg.name.ends_with(".b")) continue;
    long fan_in = 1;
    if (seg.shape.size() == 3) {
      fan_in = static_cast<long>(seg.shape[1]) * seg.shape[2];  // conv: cin * 27
    } else if (seg.shape.size() == 2) {
      fan_in = seg.shape[0];
    }
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (long i = 0; i < seg.count; ++i) params[seg.offset + i] = rng.normal(0.0, stddev);
  }
  return params;
}

struct GraphInputs {
  ad::Tensor input;                 // flattened (H*W*D) leaf
  std::vector<ad::Tensor> weights;  // one per layout segment
  ad::Tensor logits;                // (C, N)
};

ad::Tensor linear(ad::Tensor x, ad::Tensor w, ad::Tensor b) {
  return ad::add_rowvec(ad::matmul(x, w), b);
}

ad::Tensor transpose(ad::Tensor m) {
  const int rows = m.shape()[0], cols = m.shape()[1];
  std::vector<long> map(static_cast<std::size_t>(rows) * cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) map[static_cast<long>(j) * rows + i] = static_cast<long>(i) * cols + j;
  return ad::gather(m, map, {cols, rows});
}

ad::Tensor reverse_rows(ad::Tensor m) {
  const int rows = m.shape()[0], cols = m.shape()[1];
  std::vector<long> map(static_cast<std::size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j)
      map[static_cast<long>(i) * cols + j] = static_cast<long>(rows - 1 - i) * cols + j;
  return ad::gather(m, map, {rows, cols});
}

GraphInputs build_graph(ad::Tape& tape, const SegModel& model, const std::vector<double>& field,
                        bool input_grad, bool param_grad) {
  const Shape3 s = model.window;
  const long n = numel(s);
  require(static_cast<long>(field.size()) == n, ErrKind::ShapeMismatch,
          "input field has " + std::to_string(field.size()) + " voxels, window wants " +
              std::to_string(n));
  const int c = model.num_classes;
  const auto segs = param_layout(model.arch, c);
  require(static_cast<long>(model.params.size()) == total_params(segs), ErrKind::InvalidArgument,
          "parameter vector length does not match architecture layout");

  GraphInputs g;
  g.input = tape.leaf({static_cast<int>(n)}, field, input_grad);
  g.weights.reserve(segs.size());
  for (const auto& seg : segs) {
    std::vector<double> vals(model.params.begin() + seg.offset,
                             model.params.begin() + seg.offset + seg.count);
    g.weights.push_back(tape.leaf(seg.shape, std::move(vals), param_grad));
  }

  switch (model.arch) {
    case Arch::ConvSeg: {
      ad::Tensor x = ad::gather(g.input, [&] {
        std::vector<long> identity(n);
        std::iota(identity.begin(), identity.end(), 0L);
        return identity;
      }(), {1, s[0], s[1], s[2]});
      ad::Tensor h1 = ad::relu(ad::conv3d(x, g.weights[0], g.weights[1], 1, 8, s));
      ad::Tensor h2 = ad::relu(ad::conv3d(h1, g.weights[2], g.weights[3], 8, 16, s));
      ad::Tensor out = ad::conv3d(h2, g.weights[4], g.weights[5], 16, c, s);
      // (C,H,W,D) is already channel-major; reinterpret as (C,N).
      std::vector<long> identity(static_cast<std::size_t>(c) * n);
      std::iota(identity.begin(), identity.end(), 0L);
      g.logits = ad::gather(out, identity, {c, static_cast<int>(n)});
      break;
    }
    case Arch::MixSeg: {
      const int p = kMixPatch;
      require(s[0] % p == 0 && s[1] % p == 0 && s[2] % p == 0, ErrKind::InvalidArgument,
              "mix-seg window must be divisible by 4, got " + shape_str(s));
      const int gh = s[0] / p, gw = s[1] / p, gd = s[2] / p;
      const int tokens = gh * gw * gd;
      std::vector<long> patchify(static_cast<std::size_t>(tokens) * kMixDim);
      long idx = 0;
      for (int th = 0; th < gh; ++th)
        for (int tw = 0; tw < gw; ++tw)
          for (int td = 0; td < gd; ++td)
            for (int uh = 0; uh < p; ++uh)
              for (int uw = 0; uw < p; ++uw)
                for (int ud = 0; ud < p; ++ud)
                  patchify[idx++] = flat_index(s, th * p + uh, tw * p + uw, td * p + ud);

      ad::Tensor toks = ad::gather(g.input, patchify, {tokens, kMixDim});
      ad::Tensor e = linear(toks, g.weights[0], g.weights[1]);
      ad::Tensor q = ad::matmul(e, g.weights[2]);
      ad::Tensor k = ad::matmul(e, g.weights[3]);
      ad::Tensor v = ad::matmul(e, g.weights[4]);
      ad::Tensor scores = ad::scale(ad::matmul(q, transpose(k)), 1.0 / std::sqrt(double(kMixDim)));
      ad::Tensor ctx = ad::matmul(ad::softmax_rows(scores), v);
      ad::Tensor mixed = ad::add(e, ctx);
      ad::Tensor dec = linear(mixed, g.weights[5], g.weights[6]);  // (tokens, 64*C)

      // Row layout [voxel-in-patch][class] -> channel-major logits.
      std::vector<long> unpatch(static_cast<std::size_t>(c) * n);
      long t = 0;
      for (int th = 0; th < gh; ++th)
        for (int tw = 0; tw < gw; ++tw)
          for (int td = 0; td < gd; ++td, ++t) {
            long u = 0;
            for (int uh = 0; uh < p; ++uh)
              for (int uw = 0; uw < p; ++uw)
                for (int ud = 0; ud < p; ++ud, ++u) {
                  const long vox = flat_index(s, th * p + uh, tw * p + uw, td * p + ud);
                  for (int cc = 0; cc < c; ++cc)
                    unpatch[static_cast<long>(cc) * n + vox] = t * (kMixDim * c) + u * c + cc;
                }
          }
      g.logits = ad::gather(dec, unpatch, {c, static_cast<int>(n)});
      break;
    }
    case Arch::ScanSeg: {
      std::vector<long> identity(n);
      std::iota(identity.begin(), identity.end(), 0L);
      ad::Tensor col = ad::gather(g.input, identity, {static_cast<int>(n), 1});
      ad::Tensor e = linear(col, g.weights[0], g.weights[1]);
      ad::Tensor hf = ad::gated_scan(ad::sigmoid(linear(e, g.weights[2], g.weights[3])),
                                     linear(e, g.weights[4], g.weights[5]));
      ad::Tensor er = reverse_rows(e);
      ad::Tensor hr = ad::gated_scan(ad::sigmoid(linear(er, g.weights[6], g.weights[7])),
                                     linear(er, g.weights[8], g.weights[9]));
      ad::Tensor hb = reverse_rows(hr);
      ad::Tensor dec = ad::add_rowvec(
          ad::add(ad::matmul(hf, g.weights[10]), ad::matmul(hb, g.weights[11])), g.weights[12]);
      g.logits = transpose(dec);  // (N,C) -> (C,N)
      break;
    }
  }
  return g;
}

ad::Tensor loss_tensor(ad::Tape& tape, ad::Tensor logits, const LabelVolume& y,
                       const LossSpec& spec, int num_classes) {
  (void)tape;
  switch (spec.kind) {
    case LossSpec::Kind::SoftDice: {
      ad::Tensor probs = ad::exp(ad::log_softmax_channels(logits));
      return ad::soft_dice_loss(probs, y.labels, num_classes, kDiceSmoothing);
    }
    case LossSpec::Kind::CrossEntropy: {
      ad::Tensor ls = ad::log_softmax_channels(logits);
      return ad::scale(ad::mean(ad::select_channel(ls, y.labels)), -1.0);
    }
    case LossSpec::Kind::CosineWeightedCrossEntropy: {
      // Per-voxel CE scaled by the cosine similarity between the softmax
      // prediction and the one-hot target: w = p_y / ||p||_2. Fully
      // differentiable, weights land in [0,1].
      ad::Tensor ls = ad::log_softmax_channels(logits);
      ad::Tensor probs = ad::exp(ls);
      ad::Tensor p_y = ad::select_channel(probs, y.labels);
      ad::Tensor norm = ad::sqrt(ad::channel_sum(ad::mul(probs, probs)));
      ad::Tensor w = ad::div(p_y, norm);
      ad::Tensor ce = ad::scale(ad::select_channel(ls, y.labels), -1.0);
      return ad::mean(ad::mul(w, ce));
    }
    case LossSpec::Kind::Composite: {
      ad::Tensor ls = ad::log_softmax_channels(logits);
      ad::Tensor probs = ad::exp(ls);
      ad::Tensor dice = ad::soft_dice_loss(probs, y.labels, num_classes, kDiceSmoothing);
      ad::Tensor ce = ad::scale(ad::mean(ad::select_channel(ls, y.labels)), -1.0);
      return ad::add(dice, ce);
    }
  }
  throw Error(ErrKind::InvalidArgument, "unhandled loss kind");
}

void check_pair(const SegModel& model, Shape3 xshape, const LabelVolume& y) {
  require_same_shape(model.window, xshape, "input vs model window");
  require_same_shape(xshape, y.shape, "input vs labels");
  require(y.num_classes == model.num_classes, ErrKind::InvalidArgument,
          "label num_classes " + std::to_string(y.num_classes) + " does not match model " +
              std::to_string(model.num_classes));
}

Logits logits_from_tensor(const ad::Tensor& t, Shape3 shape, int c) {
  Logits out(shape, c);
  out.data = t.value();
  return out;
}

}  // namespace

Arch arch_from_id(const std::string& id) {
  if (id == "conv-seg") return Arch::ConvSeg;
  if (id == "mix-seg") return Arch::MixSeg;
  if (id == "scan-seg") return Arch::ScanSeg;
  throw Error(ErrKind::UnknownArch, "unknown architecture id '" + id + "'");
}

const char* arch_id(Arch arch) {
  switch (arch) {
    case Arch::ConvSeg: return "conv-seg";
    case Arch::MixSeg: return "mix-seg";
    case Arch::ScanSeg: return "scan-seg";
  }
  return "?";
}

SegModel build_model(Arch arch, int num_classes, Shape3 window, std::uint64_t seed) {
  require(num_classes >= 2, ErrKind::InvalidArgument, "model needs num_classes >= 2");
  for (int i = 0; i < 3; ++i)
    require(window[i] >= 4, ErrKind::InvalidArgument,
            "model window must be >= 4 per axis, got " + shape_str(window));
  if (arch == Arch::MixSeg) {
    require(window[0] % kMixPatch == 0 && window[1] % kMixPatch == 0 && window[2] % kMixPatch == 0,
            ErrKind::InvalidArgument, "mix-seg window must be divisible by 4");
  }
  SegModel m;
  m.arch = arch;
  m.num_classes = num_classes;
  m.window = window;
  m.seed = seed;
  m.params = init_params(arch, num_classes, seed);
  return m;
}

SegModel build_model(const std::string& id, int num_classes, Shape3 window, std::uint64_t seed) {
  return build_model(arch_from_id(id), num_classes, window, seed);
}

Logits forward_field(const SegModel& model, const std::vector<double>& field) {
  ad::Tape tape;
  GraphInputs g = build_graph(tape, model, field, false, false);
  return logits_from_tensor(g.logits, model.window, model.num_classes);
}

Logits forward(const SegModel& model, const Volume& x) {
  require_same_shape(model.window, x.shape, "input vs model window");
  return forward_field(model, x.as_doubles());
}

double loss_value_field(const SegModel& model, const std::vector<double>& field,
                        const LabelVolume& y, const LossSpec& spec) {
  check_pair(model, y.shape, y);
  ad::Tape tape;
  GraphInputs g = build_graph(tape, model, field, false, false);
  return loss_tensor(tape, g.logits, y, spec, model.num_classes).value()[0];
}

double loss_value(const SegModel& model, const Volume& x, const LabelVolume& y,
                  const LossSpec& spec) {
  check_pair(model, x.shape, y);
  return loss_value_field(model, x.as_doubles(), y, spec);
}

std::pair<double, GradientField> loss_and_input_gradient(const SegModel& model,
                                                         const std::vector<double>& field,
                                                         const LabelVolume& y,
                                                         const LossSpec& spec) {
  check_pair(model, y.shape, y);
  ad::Tape tape;
  GraphInputs g = build_graph(tape, model, field, true, false);
  ad::Tensor loss = loss_tensor(tape, g.logits, y, spec, model.num_classes);
  tape.backward(loss);
  GradientField gf;
  gf.shape = model.window;
  gf.values = g.input.node()->grad.empty() ? std::vector<double>(field.size(), 0.0)
                                           : g.input.grad();
  return {loss.value()[0], std::move(gf)};
}

GradientField input_gradient_field(const SegModel& model, const std::vector<double>& field,
                                   const LabelVolume& y, const LossSpec& spec) {
  return loss_and_input_gradient(model, field, y, spec).second;
}

GradientField input_gradient(const SegModel& model, const Volume& x, const LabelVolume& y,
                             const LossSpec& spec) {
  check_pair(model, x.shape, y);
  return input_gradient_field(model, x.as_doubles(), y, spec);
}

std::pair<double, std::vector<double>> param_gradient(const SegModel& model,
                                                      const std::vector<double>& field,
                                                      const LabelVolume& y, const LossSpec& spec) {
  check_pair(model, y.shape, y);
  ad::Tape tape;
  GraphInputs g = build_graph(tape, model, field, false, true);
  ad::Tensor loss = loss_tensor(tape, g.logits, y, spec, model.num_classes);
  tape.backward(loss);
  std::vector<double> grad(model.params.size(), 0.0);
  const auto segs = param_layout(model.arch, model.num_classes);
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const auto& gv = g.weights[i].node()->grad;
    if (gv.empty()) continue;
    std::copy(gv.begin(), gv.end(), grad.begin() + segs[i].offset);
  }
  return {loss.value()[0], std::move(grad)};
}

TrainResult train_model(const SegModel& model,
                        const std::vector<std::pair<Volume, LabelVolume>>& data, int epochs,
                        double learning_rate, std::uint64_t seed) {
  require(!data.empty(), ErrKind::InvalidArgument, "training dataset is empty");
  require(epochs >= 0, ErrKind::InvalidArgument, "epochs must be >= 0");
  for (const auto& [x, y] : data) check_pair(model, x.shape, y);

  TrainResult result;
  result.model = model;
  if (epochs == 0) return result;

  const LossSpec spec = LossSpec::composite();
  Rng rng(derive_seed(seed, "train/shuffle"));
  std::vector<double> velocity(model.params.size(), 0.0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 0; epoch < epochs; ++epoch) {
    rng.shuffle(order.begin(), order.end());
    double loss_acc = 0.0;
    for (const std::size_t idx : order) {
      const auto& [x, y] = data[idx];
      auto [loss, grad] = param_gradient(result.model, x.as_doubles(), y, spec);
      if (!std::isfinite(loss)) {
        throw Error(ErrKind::NonFiniteLoss, "training diverged at epoch " +
                                                std::to_string(epoch) + ", sample " +
                                                std::to_string(idx) + ", loss " +
                                                std::to_string(loss));
      }
      loss_acc += loss;
      for (std::size_t i = 0; i < velocity.size(); ++i) {
        velocity[i] = 0.9 * velocity[i] + grad[i];
        result.model.params[i] -= learning_rate * velocity[i];
      }
    }
    result.epoch_loss.push_back(loss_acc / static_cast<double>(data.size()));
  }
  return result;
}

void save_model(const SegModel& model, const std::string& path) {
  nlohmann::json header;
  header["magic"] = "vrm";
  header["version"] = 1;
  header["arch"] = arch_id(model.arch);
  header["num_classes"] = model.num_classes;
  header["window"] = {model.window[0], model.window[1], model.window[2]};
  header["seed"] = model.seed;
  header["param_count"] = model.param_count();

  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrKind::IoFailure, "cannot open '" + path + "' for writing");
  out << header.dump() << '\n';
  std::vector<float> blob(model.params.begin(), model.params.end());
  out.write(reinterpret_cast<const char*>(blob.data()),
            static_cast<std::streamsize>(blob.size() * sizeof(float)));
  require(out.good(), ErrKind::IoFailure, "write failed for '" + path + "'");
}

SegModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrKind::MissingFile, "cannot open checkpoint '" + path + "'");
  std::string line;
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrKind::UnsupportedFormat, "bad checkpoint header in '" + path + "': " + e.what());
  }
  require(header.value("magic", "") == "vrm", ErrKind::BadMagic,
          "'" + path + "' is not a model checkpoint");

  SegModel m;
  m.arch = arch_from_id(header.at("arch").get<std::string>());
  m.num_classes = header.at("num_classes").get<int>();
  const auto win = header.at("window");
  m.window = {win.at(0).get<int>(), win.at(1).get<int>(), win.at(2).get<int>()};
  m.seed = header.at("seed").get<std::uint64_t>();
  const long count = header.at("param_count").get<long>();

  std::vector<float> blob(count);
  in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(count * sizeof(float)));
  require(in.gcount() == static_cast<std::streamsize>(count * sizeof(float)),
          ErrKind::TruncatedFile, "checkpoint '" + path + "' is truncated");
  m.params.assign(blob.begin(), blob.end());

  const auto segs = param_layout(m.arch, m.num_classes);
  require(total_params(segs) == count, ErrKind::UnsupportedFormat,
          "checkpoint parameter count does not match architecture");
  return m;
}

}  // namespace volrob

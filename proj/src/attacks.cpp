#include "volrob/attacks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "volrob/rng.hpp"

namespace volrob {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

AttackOutcome finish(const Volume& x, Volume x_adv, std::vector<double> trace,
                     const StopWatch& watch, std::vector<QuantTable> tables = {}) {
  AttackOutcome out;
  out.stats = perturbation_stats(x, x_adv);
  out.x_adv = std::move(x_adv);
  out.trace = std::move(trace);
  out.tables = std::move(tables);
  out.wall_time_seconds = watch.seconds();
  return out;
}

/// Shared signed-gradient ascent loop; fgsm is the steps=1, alpha=epsilon
/// instance so the two match bit for bit.
AttackOutcome pixel_ascent(const SegModel& model, const Volume& x, const LabelVolume& y,
                           double epsilon, double alpha, int steps, const LossSpec& spec) {
  StopWatch watch;
  const std::vector<double> anchor = x.as_doubles();
  std::vector<double> cur = anchor;
  std::vector<double> trace;
  trace.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    auto [loss, grad] = loss_and_input_gradient(model, cur, y, spec);
    trace.push_back(loss);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      double v = cur[i] + alpha * sign(grad.values[i]);
      v = std::clamp(v, anchor[i] - epsilon, anchor[i] + epsilon);
      cur[i] = std::clamp(v, 0.0, 1.0);
    }
  }
  return finish(x, Volume::from_doubles(x.shape, cur), std::move(trace), watch);
}

}  // namespace

void PixelAttackConfig::validate() const {
  require(epsilon >= 0.0 && epsilon <= 1.0, ErrKind::InvalidArgument,
          "epsilon must lie in [0,1], got " + std::to_string(epsilon));
  require(alpha <= epsilon, ErrKind::InvalidArgument,
          "step size alpha must not exceed epsilon");
  require(steps >= 1, ErrKind::InvalidArgument, "iterative attacks need steps >= 1");
}

void VafaConfig::validate() const {
  require(q_max >= 1.0, ErrKind::InvalidArgument,
          "q_max must be >= 1, got " + std::to_string(q_max));
  require(patch >= 2, ErrKind::InvalidArgument, "patch size must be >= 2");
  require(steps >= 1, ErrKind::InvalidArgument, "vafa needs steps >= 1");
}

AttackOutcome gaussian_noise(const Volume& x, double epsilon, std::uint64_t seed) {
  require(epsilon >= 0.0, ErrKind::InvalidArgument, "epsilon must be >= 0");
  StopWatch watch;
  Rng rng(derive_seed(seed, "attack/gn"));
  std::vector<double> cur(x.size());
  for (long i = 0; i < x.size(); ++i) {
    const double noise = std::clamp(rng.normal(0.0, epsilon / 2.0), -epsilon, epsilon);
    cur[i] = std::clamp(static_cast<double>(x.data[i]) + noise, 0.0, 1.0);
  }
  // No model access, so there is no objective to report; the single trace
  // entry is fixed at zero to keep trace lengths uniform.
  return finish(x, Volume::from_doubles(x.shape, cur), {0.0}, watch);
}

AttackOutcome fgsm(const SegModel& model, const Volume& x, const LabelVolume& y,
                   const PixelAttackConfig& cfg) {
  cfg.validate();
  return pixel_ascent(model, x, y, cfg.epsilon, cfg.epsilon, 1, LossSpec::soft_dice());
}

AttackOutcome pgd(const SegModel& model, const Volume& x, const LabelVolume& y,
                  const PixelAttackConfig& cfg) {
  cfg.validate();
  return pixel_ascent(model, x, y, cfg.epsilon, cfg.effective_alpha(), cfg.steps,
                      LossSpec::soft_dice());
}

AttackOutcome cospgd(const SegModel& model, const Volume& x, const LabelVolume& y,
                     const PixelAttackConfig& cfg) {
  cfg.validate();
  return pixel_ascent(model, x, y, cfg.epsilon, cfg.effective_alpha(), cfg.steps,
                      LossSpec::cosine_weighted_ce());
}

AttackOutcome vafa(const SegModel& model, const Volume& x, const LabelVolume& y,
                   const VafaConfig& cfg) {
  cfg.validate();
  StopWatch watch;
  const int p = cfg.patch;
  const auto patches = partition_patches(x, p);  // throws on indivisible shape
  const std::size_t n_patches = patches.size();

  std::vector<DctBlock> spectra;
  spectra.reserve(n_patches);
  for (const auto& patch : patches) spectra.push_back(dct3(patch, p));

  std::vector<QuantTable> tables(n_patches, QuantTable::ones(p, cfg.q_max));
  const double eta = cfg.effective_step();
  const LossSpec spec = LossSpec::soft_dice();

  const int gh = x.shape[0] / p, gw = x.shape[1] / p, gd = x.shape[2] / p;
  std::vector<double> preclip(x.size()), cur(x.size());
  std::vector<DctBlock> level(n_patches);  // straight-through factors round(c/q)

  auto reconstruct = [&]() {
    std::size_t t = 0;
    for (int th = 0; th < gh; ++th)
      for (int tw = 0; tw < gw; ++tw)
        for (int td = 0; td < gd; ++td, ++t) {
          const DctBlock quantized = quantize_dequantize(spectra[t], tables[t], &level[t]);
          const std::vector<double> block = idct3(quantized);
          long i = 0;
          for (int h = 0; h < p; ++h)
            for (int w = 0; w < p; ++w)
              for (int d = 0; d < p; ++d) {
                const long v = flat_index(x.shape, th * p + h, tw * p + w, td * p + d);
                preclip[v] = block[i++];
                cur[v] = std::clamp(preclip[v], 0.0, 1.0);
              }
        }
  };

  std::vector<double> trace;
  trace.reserve(cfg.steps);
  std::vector<double> gpatch(static_cast<std::size_t>(p) * p * p);
  for (int step = 0; step < cfg.steps; ++step) {
    reconstruct();
    auto [loss, grad] = loss_and_input_gradient(model, cur, y, spec);
    trace.push_back(loss);

    // Clip passes gradient only where the pre-clip value stayed in [0,1];
    // idct3 is orthonormal, so its adjoint is dct3.
    std::size_t t = 0;
    for (int th = 0; th < gh; ++th)
      for (int tw = 0; tw < gw; ++tw)
        for (int td = 0; td < gd; ++td, ++t) {
          long i = 0;
          for (int h = 0; h < p; ++h)
            for (int w = 0; w < p; ++w)
              for (int d = 0; d < p; ++d) {
                const long v = flat_index(x.shape, th * p + h, tw * p + w, td * p + d);
                const bool inside = preclip[v] >= 0.0 && preclip[v] <= 1.0;
                gpatch[i++] = inside ? grad.values[v] : 0.0;
              }
          const DctBlock gcoeff = dct3(gpatch, p);
          for (long k = 0; k < gcoeff.size(); ++k) {
            const double gq = gcoeff.coeffs[k] * level[t].coeffs[k];
            tables[t].values[k] += eta * sign(gq);
          }
          tables[t].project();
        }
  }
  reconstruct();  // reflect the final projected tables
  return finish(x, Volume::from_doubles(x.shape, cur), std::move(trace), watch,
                std::move(tables));
}

AttackKind attack_kind_from_name(const std::string& name) {
  if (name == "gn" || name == "gaussian-noise") return AttackKind::GaussianNoise;
  if (name == "fgsm") return AttackKind::Fgsm;
  if (name == "pgd") return AttackKind::Pgd;
  if (name == "cospgd") return AttackKind::CosPgd;
  if (name == "vafa") return AttackKind::Vafa;
  throw Error(ErrKind::InvalidArgument, "unknown attack '" + name + "'");
}

const char* attack_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::GaussianNoise: return "gn";
    case AttackKind::Fgsm: return "fgsm";
    case AttackKind::Pgd: return "pgd";
    case AttackKind::CosPgd: return "cospgd";
    case AttackKind::Vafa: return "vafa";
  }
  return "?";
}

std::string AttackConfig::label() const { return attack_name(kind); }

AttackOutcome run_attack(const SegModel& model, const Volume& x, const LabelVolume& y,
                         const AttackConfig& cfg) {
  switch (cfg.kind) {
    case AttackKind::GaussianNoise: return gaussian_noise(x, cfg.pixel.epsilon, cfg.pixel.seed);
    case AttackKind::Fgsm: return fgsm(model, x, y, cfg.pixel);
    case AttackKind::Pgd: return pgd(model, x, y, cfg.pixel);
    case AttackKind::CosPgd: return cospgd(model, x, y, cfg.pixel);
    case AttackKind::Vafa: return vafa(model, x, y, cfg.vafa);
  }
  throw Error(ErrKind::InvalidArgument, "unhandled attack kind");
}

}  // namespace volrob

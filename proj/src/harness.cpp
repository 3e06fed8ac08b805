#include "volrob/harness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>

#include "volrob/nifti.hpp"
#include "volrob/rng.hpp"
#include "volrob/signal.hpp"

namespace volrob {

std::vector<int> window_starts(int axis_len, int window, double overlap) {
  require(axis_len >= window, ErrKind::InvalidArgument,
          "axis length " + std::to_string(axis_len) + " is smaller than window " +
              std::to_string(window));
  const int stride = static_cast<int>(std::llround(window * (1.0 - overlap)));
  require(stride >= 1, ErrKind::InvalidArgument, "overlap leaves a stride below 1 voxel");
  std::vector<int> starts;
  for (int s = 0; s + window <= axis_len; s += stride) starts.push_back(s);
  if (starts.back() + window != axis_len) starts.push_back(axis_len - window);
  return starts;
}

Logits sliding_window_infer(const SegModel& model, const Volume& x, Shape3 window,
                            double overlap) {
  require_same_shape(window, model.window, "requested window vs model window");
  for (int i = 0; i < 3; ++i) {
    require(x.shape[i] >= window[i], ErrKind::InvalidArgument,
            "volume " + shape_str(x.shape) + " is smaller than the window " + shape_str(window));
  }

  const auto starts_h = window_starts(x.shape[0], window[0], overlap);
  const auto starts_w = window_starts(x.shape[1], window[1], overlap);
  const auto starts_d = window_starts(x.shape[2], window[2], overlap);

  // Separable Gaussian importance, peak at the window center.
  std::array<std::vector<double>, 3> g;
  for (int axis = 0; axis < 3; ++axis) {
    const int n = window[axis];
    const double sigma = n / 8.0;
    const double center = (n - 1) / 2.0;
    g[axis].resize(n);
    for (int i = 0; i < n; ++i) {
      const double z = (i - center) / sigma;
      g[axis][i] = std::exp(-0.5 * z * z);
    }
  }

  const int c = model.num_classes;
  const long n = numel(x.shape);
  std::vector<double> num(static_cast<long>(c) * n, 0.0), den(n, 0.0);
  std::vector<double> patch(numel(window));

  for (const int sh : starts_h)
    for (const int sw : starts_w)
      for (const int sd : starts_d) {
        long i = 0;
        for (int h = 0; h < window[0]; ++h)
          for (int w = 0; w < window[1]; ++w)
            for (int d = 0; d < window[2]; ++d)
              patch[i++] = x.at(sh + h, sw + w, sd + d);
        const Logits out = forward_field(model, patch);
        const long wn = numel(window);
        for (int h = 0; h < window[0]; ++h)
          for (int w = 0; w < window[1]; ++w) {
            const double ghw = g[0][h] * g[1][w];
            for (int d = 0; d < window[2]; ++d) {
              const double weight = ghw * g[2][d];
              const long vox = flat_index(x.shape, sh + h, sw + w, sd + d);
              const long wvox = flat_index(window, h, w, d);
              den[vox] += weight;
              for (int k = 0; k < c; ++k)
                num[static_cast<long>(k) * n + vox] += weight * out.data[k * wn + wvox];
            }
          }
      }

  Logits blended(x.shape, c);
  for (long v = 0; v < n; ++v)
    for (int k = 0; k < c; ++k)
      blended.data[static_cast<long>(k) * n + v] = num[static_cast<long>(k) * n + v] / den[v];
  return blended;
}

namespace {

Logits predict_logits(const SegModel& model, const Volume& x) {
  if (x.shape == model.window) return forward(model, x);
  return sliding_window_infer(model, x, model.window, 0.5);
}

SampleMetrics metrics_for(const SegModel& model, const Volume& x, const LabelVolume& y) {
  return compute_sample_metrics(predict_labels(predict_logits(model, x)), y);
}

struct LoadedModel {
  std::string id;
  SegModel model;
  bool surrogate = true;
  bool target = true;
};

std::vector<LoadedModel> load_models(const ExperimentConfig& cfg) {
  std::vector<LoadedModel> out;
  for (const auto& ref : cfg.models) {
    LoadedModel lm;
    lm.id = ref.id;
    lm.model = load_model(ref.path);
    lm.surrogate = ref.surrogate;
    lm.target = ref.target;
    require_same_shape(lm.model.window, cfg.window, "model '" + ref.id + "' window vs experiment");
    out.push_back(std::move(lm));
  }
  return out;
}

std::uint64_t craft_seed(const ExperimentConfig& cfg, const std::string& attack,
                         const std::string& surrogate, int sample) {
  return derive_seed(cfg.seed, "attack/" + cfg.dataset.name + "/" + attack + "/" + surrogate +
                                   "/" + std::to_string(sample));
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (const double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

/// Builds the evaluation cell for a fixed (attack, surrogate, target) given
/// crafted adversaries; aggregation order is fixed by sample id.
EvalCell make_cell(const std::string& attack, const std::string& surrogate,
                   const std::string& target, const SegModel& target_model,
                   const std::vector<std::pair<Volume, LabelVolume>>& data,
                   const std::vector<SampleMetrics>& target_clean,
                   const std::vector<int>& crafted_ids, const std::vector<AttackOutcome>& crafted,
                   const std::vector<std::string>& craft_errors) {
  EvalCell cell;
  cell.attack = attack;
  cell.surrogate = surrogate;
  cell.target = target;
  cell.errors = craft_errors;

  std::vector<SampleMetrics> clean_used, adv_used;
  std::vector<double> clean_dsc, clean_hd, adv_dsc, adv_hd;
  for (std::size_t i = 0; i < crafted_ids.size(); ++i) {
    const int sample = crafted_ids[i];
    const AttackOutcome& outcome = crafted[i];
    const SampleMetrics adv = compute_sample_metrics(
        predict_labels(predict_logits(target_model, outcome.x_adv)), data[sample].second);
    const SampleMetrics& clean = target_clean[sample];

    SampleOutcome so;
    so.sample = sample;
    so.clean_dsc = clean.mean_dsc;
    so.clean_hd95 = clean.mean_hd95;
    so.clean_hd95_defined = clean.hd95_defined;
    so.adv_dsc = adv.mean_dsc;
    so.adv_hd95 = adv.mean_hd95;
    so.adv_hd95_defined = adv.hd95_defined;
    so.linf = outcome.stats.linf;
    so.l2 = outcome.stats.l2;
    so.mean_abs = outcome.stats.mean_abs;
    so.final_objective = outcome.trace.empty() ? 0.0 : outcome.trace.back();
    cell.samples.push_back(so);

    clean_used.push_back(clean);
    adv_used.push_back(adv);
    clean_dsc.push_back(clean.mean_dsc);
    adv_dsc.push_back(adv.mean_dsc);
    if (clean.hd95_defined) clean_hd.push_back(clean.mean_hd95);
    if (adv.hd95_defined) adv_hd.push_back(adv.mean_hd95);
  }
  if (!clean_used.empty()) {
    cell.asr.asr_d = asr_d(clean_used, adv_used);
    cell.asr.n_samples = static_cast<int>(clean_used.size());
    try {
      const AsrH h = asr_h(clean_used, adv_used);
      cell.asr.asr_h_signed = h.signed_change;
      cell.asr.asr_h_abs = h.abs_change;
      cell.asr.n_hd95_excluded = h.n_excluded;
    } catch (const Error&) {
      // Every pair carried an empty-mask sentinel; report the DSC side and
      // mark the HD95 aggregate as fully excluded.
      cell.asr.n_hd95_excluded = static_cast<int>(clean_used.size());
      cell.errors.push_back("asr_h undefined: every sample pair had an empty-mask sentinel");
    }
    cell.clean_mean_dsc = mean_of(clean_dsc);
    cell.adv_mean_dsc = mean_of(adv_dsc);
    cell.clean_mean_hd95 = mean_of(clean_hd);
    cell.adv_mean_hd95 = mean_of(adv_hd);
  }
  return cell;
}

RobustnessReport matrix_eval(const ExperimentConfig& cfg, bool full_matrix) {
  cfg.validate();
  const auto data = load_dataset(cfg);
  const auto models = load_models(cfg);

  RobustnessReport report;
  report.kind = full_matrix ? "transfer" : "whitebox";
  report.dataset = cfg.dataset.name;
  report.seed = cfg.seed;
  report.config = experiment_config_to_json(cfg);
  for (const auto& a : cfg.attacks) report.attack_labels.push_back(a.label());

  std::vector<const LoadedModel*> surrogates, targets;
  for (const auto& m : models) {
    report.model_ids.push_back(m.id);
    if (m.surrogate) surrogates.push_back(&m);
    if (m.target) targets.push_back(&m);
  }
  if (full_matrix) {
    require(models.size() >= 2, ErrKind::ConfigError,
            "transfer evaluation needs at least two models");
  }

  // Clean metrics once per target model, fixed sample order.
  std::map<std::string, std::vector<SampleMetrics>> clean;
  for (const auto* t : targets) {
    std::vector<SampleMetrics> list;
    for (const auto& [x, y] : data) list.push_back(metrics_for(t->model, x, y));
    report.clean.push_back({t->id, 0.0, 0.0, 0});
    auto& summary = report.clean.back();
    std::vector<double> d, h;
    for (const auto& m : list) {
      d.push_back(m.mean_dsc);
      if (m.hd95_defined) h.push_back(m.mean_hd95);
    }
    summary.mean_dsc = mean_of(d);
    summary.mean_hd95 = mean_of(h);
    summary.hd95_defined_n = static_cast<int>(h.size());
    clean[t->id] = std::move(list);
  }

  for (const auto& attack : cfg.attacks) {
    for (const auto* s : surrogates) {
      // Craft once per (attack, surrogate, sample); reuse across targets.
      std::vector<int> crafted_ids;
      std::vector<AttackOutcome> crafted;
      std::vector<std::string> craft_errors;
      for (int k = 0; k < static_cast<int>(data.size()); ++k) {
        AttackConfig ac = attack;
        const std::uint64_t seed = craft_seed(cfg, attack.label(), s->id, k);
        ac.pixel.seed = seed;
        ac.vafa.seed = seed;
        try {
          crafted.push_back(run_attack(s->model, data[k].first, data[k].second, ac));
          crafted_ids.push_back(k);
        } catch (const std::exception& e) {
          craft_errors.push_back("sample " + std::to_string(k) + ": " + e.what());
          ++report.partial_failures;
        }
      }
      if (full_matrix) {
        for (const auto* t : targets) {
          report.cells.push_back(make_cell(attack.label(), s->id, t->id, t->model, data,
                                           clean.at(t->id), crafted_ids, crafted, craft_errors));
        }
      } else if (s->target) {
        report.cells.push_back(make_cell(attack.label(), s->id, s->id, s->model, data,
                                         clean.at(s->id), crafted_ids, crafted, craft_errors));
      }
    }
  }
  return report;
}

std::string band_label(int lo, int hi) { return std::to_string(lo) + ":" + std::to_string(hi); }

}  // namespace

std::vector<std::pair<Volume, LabelVolume>> load_dataset(const ExperimentConfig& cfg) {
  std::vector<std::pair<Volume, LabelVolume>> data;
  if (cfg.dataset.phantom && cfg.dataset.phantom_count > 0) {
    for (int k = 0; k < cfg.dataset.phantom_count; ++k) {
      PhantomSpec spec = *cfg.dataset.phantom;
      spec.seed = derive_seed(spec.seed, "dataset/" + cfg.dataset.name + "/" + std::to_string(k));
      data.push_back(generate_phantom(spec));
    }
  } else {
    const NormalizationRule rule = cfg.dataset.normalization == "minmax"
                                       ? NormalizationRule::MinMax
                                       : NormalizationRule::None;
    for (const auto& f : cfg.dataset.files) {
      Volume x = read_nifti_volume(f.image, rule);
      LabelVolume y = read_nifti_labels(f.label);
      require_same_shape(x.shape, y.shape, "image '" + f.image + "' vs label '" + f.label + "'");
      data.emplace_back(std::move(x), std::move(y));
    }
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    require_same_shape(data[i].first.shape, cfg.window,
                       "sample " + std::to_string(i) + " vs experiment window");
  }
  return data;
}

RobustnessReport whitebox_eval(const ExperimentConfig& cfg) { return matrix_eval(cfg, false); }

RobustnessReport transfer_eval(const ExperimentConfig& cfg) { return matrix_eval(cfg, true); }

RobustnessReport frequency_analysis(const ExperimentConfig& cfg) {
  cfg.validate();
  require(!cfg.bands.empty(), ErrKind::ConfigError, "frequency analysis needs a band list");
  const auto data = load_dataset(cfg);
  const auto models = load_models(cfg);

  // Validate every band against the window up front.
  std::vector<FrequencyMask> masks;
  for (const auto& [lo, hi] : cfg.bands) masks.push_back(make_band_mask(cfg.window, lo, hi));

  RobustnessReport report;
  report.kind = "frequency";
  report.dataset = cfg.dataset.name;
  report.seed = cfg.seed;
  report.config = experiment_config_to_json(cfg);
  for (const auto& a : cfg.attacks) report.attack_labels.push_back(a.label());

  for (const auto& m : models) {
    report.model_ids.push_back(m.id);
    std::vector<double> clean_dsc;
    for (const auto& [x, y] : data)
      clean_dsc.push_back(metrics_for(m.model, x, y).mean_dsc);

    for (const auto& attack : cfg.attacks) {
      BandCurve curve;
      curve.model_id = m.id;
      curve.attack = attack.label();
      curve.clean_dsc = mean_of(clean_dsc);

      std::vector<Volume> advs;
      for (int k = 0; k < static_cast<int>(data.size()); ++k) {
        AttackConfig ac = attack;
        const std::uint64_t seed = craft_seed(cfg, attack.label(), m.id, k);
        ac.pixel.seed = seed;
        ac.vafa.seed = seed;
        advs.push_back(run_attack(m.model, data[k].first, data[k].second, ac).x_adv);
      }

      std::vector<double> unrestricted;
      for (int k = 0; k < static_cast<int>(data.size()); ++k)
        unrestricted.push_back(metrics_for(m.model, advs[k], data[k].second).mean_dsc);
      curve.unrestricted_dsc = mean_of(unrestricted);

      for (std::size_t b = 0; b < masks.size(); ++b) {
        std::vector<double> vals;
        for (int k = 0; k < static_cast<int>(data.size()); ++k) {
          const Volume filtered = filter_perturbation(data[k].first, advs[k], masks[b]);
          vals.push_back(metrics_for(m.model, filtered, data[k].second).mean_dsc);
        }
        curve.bands.emplace_back(band_label(cfg.bands[b].first, cfg.bands[b].second),
                                 mean_of(vals));
      }
      report.band_curves.push_back(std::move(curve));
    }
  }
  return report;
}

nlohmann::json RobustnessReport::to_json() const {
  nlohmann::json j;
  j["version"] = version;
  j["kind"] = kind;
  j["dataset"] = dataset;
  j["seed"] = seed;
  j["config"] = config;
  j["models"] = model_ids;
  j["attacks"] = attack_labels;
  j["partial_failures"] = partial_failures;
  nlohmann::json clean_j = nlohmann::json::array();
  for (const auto& c : clean) {
    clean_j.push_back({{"model", c.model_id},
                       {"mean_dsc", c.mean_dsc},
                       {"mean_hd95", c.mean_hd95},
                       {"hd95_defined_n", c.hd95_defined_n}});
  }
  j["clean"] = clean_j;
  nlohmann::json cells_j = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : c.samples) {
      samples.push_back({{"sample", s.sample},
                         {"clean_dsc", s.clean_dsc},
                         {"clean_hd95", s.clean_hd95},
                         {"clean_hd95_defined", s.clean_hd95_defined},
                         {"adv_dsc", s.adv_dsc},
                         {"adv_hd95", s.adv_hd95},
                         {"adv_hd95_defined", s.adv_hd95_defined},
                         {"linf", s.linf},
                         {"l2", s.l2},
                         {"mean_abs", s.mean_abs},
                         {"final_objective", s.final_objective}});
    }
    cells_j.push_back({{"attack", c.attack},
                       {"surrogate", c.surrogate},
                       {"target", c.target},
                       {"asr_d", c.asr.asr_d},
                       {"asr_h_signed", c.asr.asr_h_signed},
                       {"asr_h_abs", c.asr.asr_h_abs},
                       {"n_samples", c.asr.n_samples},
                       {"n_hd95_excluded", c.asr.n_hd95_excluded},
                       {"clean_mean_dsc", c.clean_mean_dsc},
                       {"clean_mean_hd95", c.clean_mean_hd95},
                       {"adv_mean_dsc", c.adv_mean_dsc},
                       {"adv_mean_hd95", c.adv_mean_hd95},
                       {"samples", samples},
                       {"errors", c.errors}});
  }
  j["cells"] = cells_j;
  nlohmann::json bands_j = nlohmann::json::array();
  for (const auto& b : band_curves) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& [label, dsc] : b.bands)
      entries.push_back({{"band", label}, {"mean_dsc", dsc}});
    bands_j.push_back({{"model", b.model_id},
                       {"attack", b.attack},
                       {"clean_dsc", b.clean_dsc},
                       {"unrestricted_dsc", b.unrestricted_dsc},
                       {"bands", entries}});
  }
  j["band_curves"] = bands_j;
  return j;
}

RobustnessReport RobustnessReport::from_json(const nlohmann::json& j) {
  RobustnessReport r;
  r.version = j.at("version").get<int>();
  r.kind = j.at("kind").get<std::string>();
  r.dataset = j.at("dataset").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.config = j.at("config");
  r.model_ids = j.at("models").get<std::vector<std::string>>();
  r.attack_labels = j.at("attacks").get<std::vector<std::string>>();
  r.partial_failures = j.at("partial_failures").get<int>();
  for (const auto& c : j.at("clean")) {
    r.clean.push_back({c.at("model").get<std::string>(), c.at("mean_dsc").get<double>(),
                       c.at("mean_hd95").get<double>(), c.at("hd95_defined_n").get<int>()});
  }
  for (const auto& c : j.at("cells")) {
    EvalCell cell;
    cell.attack = c.at("attack").get<std::string>();
    cell.surrogate = c.at("surrogate").get<std::string>();
    cell.target = c.at("target").get<std::string>();
    cell.asr.asr_d = c.at("asr_d").get<double>();
    cell.asr.asr_h_signed = c.at("asr_h_signed").get<double>();
    cell.asr.asr_h_abs = c.at("asr_h_abs").get<double>();
    cell.asr.n_samples = c.at("n_samples").get<int>();
    cell.asr.n_hd95_excluded = c.at("n_hd95_excluded").get<int>();
    cell.clean_mean_dsc = c.at("clean_mean_dsc").get<double>();
    cell.clean_mean_hd95 = c.at("clean_mean_hd95").get<double>();
    cell.adv_mean_dsc = c.at("adv_mean_dsc").get<double>();
    cell.adv_mean_hd95 = c.at("adv_mean_hd95").get<double>();
    for (const auto& s : c.at("samples")) {
      SampleOutcome so;
      so.sample = s.at("sample").get<int>();
      so.clean_dsc = s.at("clean_dsc").get<double>();
      so.clean_hd95 = s.at("clean_hd95").get<double>();
      so.clean_hd95_defined = s.at("clean_hd95_defined").get<bool>();
      so.adv_dsc = s.at("adv_dsc").get<double>();
      so.adv_hd95 = s.at("adv_hd95").get<double>();
      so.adv_hd95_defined = s.at("adv_hd95_defined").get<bool>();
      so.linf = s.at("linf").get<double>();
      so.l2 = s.at("l2").get<double>();
      so.mean_abs = s.at("mean_abs").get<double>();
      so.final_objective = s.at("final_objective").get<double>();
      cell.samples.push_back(so);
    }
    cell.errors = c.at("errors").get<std::vector<std::string>>();
    r.cells.push_back(std::move(cell));
  }
  for (const auto& b : j.at("band_curves")) {
    BandCurve curve;
    curve.model_id = b.at("model").get<std::string>();
    curve.attack = b.at("attack").get<std::string>();
    curve.clean_dsc = b.at("clean_dsc").get<double>();
    curve.unrestricted_dsc = b.at("unrestricted_dsc").get<double>();
    for (const auto& e : b.at("bands"))
      curve.bands.emplace_back(e.at("band").get<std::string>(), e.at("mean_dsc").get<double>());
    r.band_curves.push_back(std::move(curve));
  }
  return r;
}

const EvalCell* RobustnessReport::find_cell(const std::string& attack,
                                            const std::string& surrogate,
                                            const std::string& target) const {
  for (const auto& c : cells) {
    if (c.attack == attack && c.surrogate == surrogate && c.target == target) return &c;
  }
  return nullptr;
}

namespace {

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
  return buf;
}

std::string fixed2(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", value);
  return buf;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrKind::IoFailure, "cannot open '" + path + "' for writing");
  out << text;
  require(out.good(), ErrKind::IoFailure, "write failed for '" + path + "'");
}

std::string sanitize(const std::string& label) {
  std::string out;
  for (const char c : label) out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

}  // namespace

std::vector<std::string> emit_report(const RobustnessReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;

  const std::string report_path = dir + "/report.json";
  write_text(report_path, report.to_json().dump(2) + "\n");
  written.push_back(report_path);

  if (report.kind == "whitebox") {
    std::string csv = "dataset,attack,model,asr_d,asr_h_signed,asr_h_abs,clean_dsc,clean_hd95\n";
    for (const auto& attack : report.attack_labels) {
      for (const auto& model : report.model_ids) {
        const EvalCell* cell = report.find_cell(attack, model, model);
        if (!cell) continue;
        csv += report.dataset + "," + attack + "," + model + "," + pct(cell->asr.asr_d) + "," +
               fixed2(cell->asr.asr_h_signed) + "," + fixed2(cell->asr.asr_h_abs) + "," +
               pct(cell->clean_mean_dsc) + "," + fixed2(cell->clean_mean_hd95) + "\n";
      }
    }
    const std::string path = dir + "/asr_table.csv";
    write_text(path, csv);
    written.push_back(path);
  }

  if (report.kind == "transfer") {
    // One matrix per attack: Target -> columns, Surrogate (rows), plus the
    // per-row Average column and a leading clean row.
    std::vector<std::string> targets;
    for (const auto& c : report.clean) targets.push_back(c.model_id);
    for (const auto& attack : report.attack_labels) {
      std::string csv = "surrogate\\target";
      for (const auto& t : targets) csv += "," + t + "_asr_d," + t + "_asr_h";
      csv += ",average_asr_d,average_asr_h\n";

      csv += "clean";
      double cd = 0.0, ch = 0.0;
      for (const auto& c : report.clean) {
        csv += "," + pct(c.mean_dsc) + "," + fixed2(c.mean_hd95);
        cd += c.mean_dsc;
        ch += c.mean_hd95;
      }
      csv += "," + pct(cd / targets.size()) + "," + fixed2(ch / targets.size()) + "\n";

      std::vector<std::string> surrogates;
      for (const auto& c : report.cells) {
        if (c.attack == attack &&
            std::find(surrogates.begin(), surrogates.end(), c.surrogate) == surrogates.end()) {
          surrogates.push_back(c.surrogate);
        }
      }
      for (const auto& s : surrogates) {
        csv += s;
        double acc_d = 0.0, acc_h = 0.0;
        int used = 0;
        for (const auto& t : targets) {
          const EvalCell* cell = report.find_cell(attack, s, t);
          if (!cell) {
            csv += ",,";
            continue;
          }
          csv += "," + pct(cell->asr.asr_d) + "," + fixed2(cell->asr.asr_h_signed);
          acc_d += cell->asr.asr_d;
          acc_h += cell->asr.asr_h_signed;
          ++used;
        }
        csv += "," + (used ? pct(acc_d / used) : std::string()) + "," +
               (used ? fixed2(acc_h / used) : std::string()) + "\n";
      }
      const std::string path = dir + "/transfer_" + sanitize(attack) + ".csv";
      write_text(path, csv);
      written.push_back(path);
    }
  }

  if (report.kind == "frequency") {
    std::string csv = "model,attack,band,mean_dsc\n";
    for (const auto& curve : report.band_curves) {
      csv += curve.model_id + "," + curve.attack + ",clean," + pct(curve.clean_dsc) + "\n";
      for (const auto& [label, dsc] : curve.bands)
        csv += curve.model_id + "," + curve.attack + "," + label + "," + pct(dsc) + "\n";
      csv += curve.model_id + "," + curve.attack + ",unrestricted," +
             pct(curve.unrestricted_dsc) + "\n";
    }
    const std::string path = dir + "/bands.csv";
    write_text(path, csv);
    written.push_back(path);
  }
  return written;
}

RobustnessReport read_report(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrKind::MissingFile, "cannot open report '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrKind::UnsupportedFormat, "report '" + path + "' is not valid JSON: " + e.what());
  }
  return RobustnessReport::from_json(j);
}

}  // namespace volrob

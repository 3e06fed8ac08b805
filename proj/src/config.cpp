#include "volrob/config.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>

namespace volrob {

namespace {

bool parse_int(std::string_view text, long& out) {
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

}  // namespace

double parse_rational(const std::string& text) {
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    long num = 0, den = 0;
    if (!parse_int(std::string_view(text).substr(0, slash), num) ||
        !parse_int(std::string_view(text).substr(slash + 1), den) || den == 0) {
      throw Error(ErrKind::ConfigError, "cannot parse '" + text + "' as a rational");
    }
    return static_cast<double>(num) / static_cast<double>(den);
  }
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    require(pos == text.size(), ErrKind::ConfigError, "trailing characters in number '" + text + "'");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrKind::ConfigError, "cannot parse '" + text + "' as a number");
  }
}

namespace {

double number_field(const nlohmann::json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_string()) return parse_rational(v.get<std::string>());
  if (v.is_number()) return v.get<double>();
  throw Error(ErrKind::ConfigError, "field '" + key + "' must be a number or fraction string");
}

}  // namespace

AttackConfig attack_config_from_json(const nlohmann::json& j) {
  require(j.contains("name"), ErrKind::ConfigError, "attack config needs a 'name'");
  AttackConfig cfg;
  cfg.kind = attack_kind_from_name(j.at("name").get<std::string>());
  cfg.pixel.epsilon = number_field(j, "epsilon", cfg.pixel.epsilon);
  cfg.pixel.alpha = number_field(j, "alpha", 0.0);
  cfg.pixel.steps = j.value("steps", cfg.kind == AttackKind::Fgsm ? 1 : 20);
  cfg.vafa.q_max = number_field(j, "q_max", 30.0);
  cfg.vafa.patch = j.value("patch", 8);
  cfg.vafa.steps = j.value("steps", 20);
  cfg.vafa.step_size = number_field(j, "step_size", 0.0);
  return cfg;
}

nlohmann::json attack_config_to_json(const AttackConfig& cfg) {
  nlohmann::json j;
  j["name"] = cfg.label();
  switch (cfg.kind) {
    case AttackKind::GaussianNoise:
      j["epsilon"] = cfg.pixel.epsilon;
      break;
    case AttackKind::Fgsm:
      j["epsilon"] = cfg.pixel.epsilon;
      break;
    case AttackKind::Pgd:
    case AttackKind::CosPgd:
      j["epsilon"] = cfg.pixel.epsilon;
      j["alpha"] = cfg.pixel.effective_alpha();
      j["steps"] = cfg.pixel.steps;
      break;
    case AttackKind::Vafa:
      j["q_max"] = cfg.vafa.q_max;
      j["patch"] = cfg.vafa.patch;
      j["steps"] = cfg.vafa.steps;
      j["step_size"] = cfg.vafa.effective_step();
      j["notes"] = "quantization-table ascent only; the perceptual-preservation term of the "
                   "original frequency attack is omitted";
      break;
  }
  return j;
}

void ExperimentConfig::validate() const {
  require(!models.empty(), ErrKind::ConfigError, "experiment needs at least one model");
  require(overlap >= 0.0 && overlap < 1.0, ErrKind::ConfigError,
          "overlap must lie in [0,1), got " + std::to_string(overlap));
  const bool has_phantom = dataset.phantom.has_value() && dataset.phantom_count > 0;
  const bool has_files = !dataset.files.empty();
  require(has_phantom || has_files, ErrKind::ConfigError,
          "dataset needs either a phantom spec with count >= 1 or a file list");
  for (const auto& m : models) {
    require(std::filesystem::exists(m.path), ErrKind::MissingFile,
            "model checkpoint '" + m.path + "' does not exist");
  }
  for (const auto& f : dataset.files) {
    require(std::filesystem::exists(f.image), ErrKind::MissingFile,
            "image '" + f.image + "' does not exist");
    require(std::filesystem::exists(f.label), ErrKind::MissingFile,
            "label '" + f.label + "' does not exist");
  }
  for (const auto& [lo, hi] : bands) {
    require(lo >= 0 && lo < hi, ErrKind::ConfigError,
            "band (" + std::to_string(lo) + "," + std::to_string(hi) + ") is not ordered");
  }
}

ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  ExperimentConfig cfg;
  try {
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      cfg.dataset.name = d.value("name", cfg.dataset.name);
      cfg.dataset.normalization = d.value("normalization", cfg.dataset.normalization);
      require(cfg.dataset.normalization == "minmax" || cfg.dataset.normalization == "none",
              ErrKind::ConfigError,
              "normalization must be 'minmax' or 'none', got '" + cfg.dataset.normalization + "'");
      if (d.contains("phantom")) {
        const auto& p = d.at("phantom");
        PhantomSpec spec;
        spec.seed = p.value("seed", std::uint64_t{0});
        if (p.contains("shape")) {
          const auto& s = p.at("shape");
          spec.shape = {s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()};
        }
        spec.num_classes = p.value("num_classes", 3);
        spec.min_blobs = p.value("min_blobs", 2);
        spec.max_blobs = p.value("max_blobs", 4);
        spec.noise_amplitude = p.value("noise", 0.05);
        cfg.dataset.phantom = spec;
        cfg.dataset.phantom_count = p.value("count", 8);
      }
      if (d.contains("files")) {
        for (const auto& f : d.at("files")) {
          cfg.dataset.files.push_back({f.at("image").get<std::string>(),
                                       f.at("label").get<std::string>()});
        }
      }
    }
    for (const auto& m : j.value("models", nlohmann::json::array())) {
      ModelRef ref;
      ref.path = m.at("path").get<std::string>();
      ref.id = m.value("id", std::filesystem::path(ref.path).stem().string());
      const std::string role = m.value("role", "both");
      require(role == "both" || role == "surrogate" || role == "target", ErrKind::ConfigError,
              "model role must be both|surrogate|target, got '" + role + "'");
      ref.surrogate = role != "target";
      ref.target = role != "surrogate";
      cfg.models.push_back(std::move(ref));
    }
    for (const auto& a : j.value("attacks", nlohmann::json::array())) {
      cfg.attacks.push_back(attack_config_from_json(a));
    }
    if (j.contains("window")) {
      const auto& w = j.at("window");
      cfg.window = {w.at(0).get<int>(), w.at(1).get<int>(), w.at(2).get<int>()};
    } else if (cfg.dataset.phantom) {
      cfg.window = cfg.dataset.phantom->shape;
    }
    cfg.overlap = j.value("overlap", 0.5);
    cfg.out_dir = j.value("out_dir", cfg.out_dir);
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("bands")) {
      if (j.at("bands").is_string()) {
        cfg.bands = parse_bands(j.at("bands").get<std::string>());
      } else {
        for (const auto& b : j.at("bands"))
          cfg.bands.emplace_back(b.at(0).get<int>(), b.at(1).get<int>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrKind::ConfigError, std::string("malformed experiment config: ") + e.what());
  }
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), ErrKind::MissingFile, "cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrKind::ConfigError, "config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_experiment_config(j);
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  nlohmann::json d;
  d["name"] = cfg.dataset.name;
  d["normalization"] = cfg.dataset.normalization;
  if (cfg.dataset.phantom) {
    const PhantomSpec& p = *cfg.dataset.phantom;
    d["phantom"] = {{"seed", p.seed},
                    {"shape", {p.shape[0], p.shape[1], p.shape[2]}},
                    {"num_classes", p.num_classes},
                    {"min_blobs", p.min_blobs},
                    {"max_blobs", p.max_blobs},
                    {"noise", p.noise_amplitude},
                    {"count", cfg.dataset.phantom_count}};
  }
  if (!cfg.dataset.files.empty()) {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : cfg.dataset.files) files.push_back({{"image", f.image}, {"label", f.label}});
    d["files"] = files;
  }
  j["dataset"] = d;
  nlohmann::json models = nlohmann::json::array();
  for (const auto& m : cfg.models) {
    models.push_back({{"id", m.id},
                      {"path", m.path},
                      {"role", m.surrogate && m.target ? "both" : (m.surrogate ? "surrogate" : "target")}});
  }
  j["models"] = models;
  nlohmann::json attacks = nlohmann::json::array();
  for (const auto& a : cfg.attacks) attacks.push_back(attack_config_to_json(a));
  j["attacks"] = attacks;
  // out_dir is where a report lands, not part of what it measured; keeping
  // it out of the echo lets reruns into fresh directories stay byte-equal.
  j["window"] = {cfg.window[0], cfg.window[1], cfg.window[2]};
  j["overlap"] = cfg.overlap;
  j["seed"] = cfg.seed;
  if (!cfg.bands.empty()) {
    nlohmann::json bands = nlohmann::json::array();
    for (const auto& [lo, hi] : cfg.bands) bands.push_back({lo, hi});
    j["bands"] = bands;
  }
  return j;
}

std::vector<std::pair<int, int>> parse_bands(const std::string& text) {
  std::vector<std::pair<int, int>> bands;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(pos, comma - pos);
    const auto colon = item.find(':');
    long lo = 0, hi = 0;
    if (colon == std::string::npos ||
        !parse_int(std::string_view(item).substr(0, colon), lo) ||
        !parse_int(std::string_view(item).substr(colon + 1), hi)) {
      throw Error(ErrKind::ConfigError, "malformed band '" + item + "', expected lo:hi");
    }
    bands.emplace_back(static_cast<int>(lo), static_cast<int>(hi));
    pos = comma + 1;
  }
  require(!bands.empty(), ErrKind::ConfigError, "band list is empty");
  return bands;
}

}  // namespace volrob

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "volrob/attacks.hpp"
#include "volrob/phantom.hpp"

namespace volrob {

/// Parses "8/255" as the exact rational (then nearest double) or a plain
/// decimal. Throws ConfigError on anything else.
double parse_rational(const std::string& text);

/// Attack description as accepted in experiment configs, e.g.
///   {"name":"pgd","epsilon":"8/255","steps":20,"alpha":"2/255"}
///   {"name":"vafa","q_max":30,"patch":8,"steps":20}
AttackConfig attack_config_from_json(const nlohmann::json& j);
nlohmann::json attack_config_to_json(const AttackConfig& cfg);

struct FilePair {
  std::string image;
  std::string label;
};

struct DatasetConfig {
  std::string name = "phantoms";
  std::optional<PhantomSpec> phantom;  // base spec; per-sample seeds derive from it
  int phantom_count = 0;
  std::vector<FilePair> files;
  std::string normalization = "minmax";  // applied to file-based images
};

struct ModelRef {
  std::string id;    // display / column label
  std::string path;  // .vrm checkpoint
  bool surrogate = true;
  bool target = true;
};

struct ExperimentConfig {
  DatasetConfig dataset;
  std::vector<ModelRef> models;
  std::vector<AttackConfig> attacks;
  Shape3 window{32, 32, 32};
  double overlap = 0.5;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::vector<std::pair<int, int>> bands;  // frequency experiment bands

  /// Structural checks plus existence of every referenced file.
  void validate() const;
};

ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json experiment_config_to_json(const ExperimentConfig& cfg);

/// "0:8,16:48" -> band list; throws ConfigError on malformed input.
std::vector<std::pair<int, int>> parse_bands(const std::string& text);

}  // namespace volrob

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "volrob/config.hpp"
#include "volrob/metrics.hpp"
#include "volrob/model.hpp"

namespace volrob {

/// Window start offsets along one axis: stride = round(window*(1-overlap)),
/// plus a final window flush with the axis end.
std::vector<int> window_starts(int axis_len, int window, double overlap);

/// Tiled inference over an arbitrary-sized volume. Overlapping windows are
/// blended with a separable Gaussian importance map (sigma = window/8, peak
/// at the window center); per-voxel output is the weighted average, which
/// reduces to the direct forward pass when the volume equals the window.
Logits sliding_window_infer(const SegModel& model, const Volume& x, Shape3 window,
                            double overlap = 0.5);

struct SampleOutcome {
  int sample = 0;
  double clean_dsc = 0.0, clean_hd95 = 0.0;
  double adv_dsc = 0.0, adv_hd95 = 0.0;
  bool clean_hd95_defined = true, adv_hd95_defined = true;
  double linf = 0.0, l2 = 0.0, mean_abs = 0.0;
  double final_objective = 0.0;
};

/// Aggregated result of one (attack, surrogate, target) triple.
struct EvalCell {
  std::string attack;
  std::string surrogate;
  std::string target;
  AsrAggregate asr;
  double clean_mean_dsc = 0.0, clean_mean_hd95 = 0.0;
  double adv_mean_dsc = 0.0, adv_mean_hd95 = 0.0;
  std::vector<SampleOutcome> samples;
  std::vector<std::string> errors;
};

struct CleanSummary {
  std::string model_id;
  double mean_dsc = 0.0;
  double mean_hd95 = 0.0;
  int hd95_defined_n = 0;
};

struct BandCurve {
  std::string model_id;
  std::string attack;
  double clean_dsc = 0.0;
  double unrestricted_dsc = 0.0;
  std::vector<std::pair<std::string, double>> bands;  // "a:b" -> mean DSC
};

struct RobustnessReport {
  int version = 1;
  std::string kind;  // "whitebox" | "transfer" | "frequency"
  std::string dataset;
  std::uint64_t seed = 0;
  nlohmann::json config;
  std::vector<std::string> model_ids;
  std::vector<std::string> attack_labels;
  std::vector<CleanSummary> clean;
  std::vector<EvalCell> cells;
  std::vector<BandCurve> band_curves;
  int partial_failures = 0;

  nlohmann::json to_json() const;
  static RobustnessReport from_json(const nlohmann::json& j);

  const EvalCell* find_cell(const std::string& attack, const std::string& surrogate,
                            const std::string& target) const;
};

/// Loads the configured dataset (phantoms are generated, files are read and
/// normalized per the manifest rule); every sample must be window-shaped.
std::vector<std::pair<Volume, LabelVolume>> load_dataset(const ExperimentConfig& cfg);

/// Per-model white-box sweep: adversaries are crafted on the model they are
/// evaluated against. Sample failures are recorded and skipped.
RobustnessReport whitebox_eval(const ExperimentConfig& cfg);

/// Surrogate x target matrix: adversaries are crafted once per surrogate and
/// reused for every target, so the diagonal reproduces whitebox_eval bit for
/// bit under the same seeds.
RobustnessReport transfer_eval(const ExperimentConfig& cfg);

/// Band-restricted evaluation: white-box adversaries filtered through each
/// configured frequency band, plus clean and unrestricted anchors.
RobustnessReport frequency_analysis(const ExperimentConfig& cfg);

/// Writes report.json plus the CSV views for the report kind; returns the
/// paths written. Re-emission is byte-identical.
std::vector<std::string> emit_report(const RobustnessReport& report, const std::string& dir);

RobustnessReport read_report(const std::string& path);

}  // namespace volrob

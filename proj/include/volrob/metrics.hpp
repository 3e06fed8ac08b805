#pragma once

#include <cstdint>
#include <vector>

#include "volrob/volume.hpp"

namespace volrob {

/// Dice overlap for class `c`: 2|A ∩ B| / (|A| + |B|) on the binarized masks.
/// Both masks empty counts as perfect agreement (1.0) and sets *both_empty.
double dsc(const LabelVolume& pred, const LabelVolume& gt, int c, bool* both_empty = nullptr);

/// Binary mask helper (labels == c).
std::vector<std::uint8_t> class_mask(const LabelVolume& labels, int c);

/// Sentinel distance for empty-mask cases: the volume diagonal.
double hd95_sentinel(Shape3 shape);

/// 95th-percentile symmetric boundary distance in voxel units.
/// Boundary: mask voxels with a 6-neighbor outside the mask or on the array
/// edge. Percentile: linear interpolation between closest ranks. Either mask
/// empty yields the sentinel and sets *flagged.
double hd95(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt,
            Shape3 shape, bool* flagged = nullptr);

/// Linear-interpolated percentile (fraction in [0,1]) of ascending values.
double percentile(std::vector<double> values, double fraction);

struct SampleMetrics {
  std::vector<double> class_dsc;    // index 0 unused, classes 1..C-1
  std::vector<double> class_hd95;   // same indexing
  std::vector<bool> dsc_empty;      // both masks empty
  std::vector<bool> hd95_flagged;   // either mask empty -> sentinel
  double mean_dsc = 0.0;            // over foreground classes, flags excluded
  double mean_hd95 = 0.0;
  bool hd95_defined = false;        // at least one unflagged foreground class
};

SampleMetrics compute_sample_metrics(const LabelVolume& pred, const LabelVolume& gt);

struct AsrAggregate {
  double asr_d = 0.0;         // mean |DSC(clean) - DSC(adv)|
  double asr_h_signed = 0.0;  // mean (HD95(adv) - HD95(clean))
  double asr_h_abs = 0.0;     // mean |HD95(adv) - HD95(clean)|
  int n_samples = 0;
  int n_hd95_excluded = 0;    // pairs dropped because HD95 was undefined
};

double asr_d(const std::vector<SampleMetrics>& clean, const std::vector<SampleMetrics>& adv);

struct AsrH {
  double signed_change = 0.0;
  double abs_change = 0.0;
  int n_used = 0;
  int n_excluded = 0;
};

AsrH asr_h(const std::vector<SampleMetrics>& clean, const std::vector<SampleMetrics>& adv);

AsrAggregate aggregate_asr(const std::vector<SampleMetrics>& clean,
                           const std::vector<SampleMetrics>& adv);

struct PerturbationStats {
  double linf = 0.0;
  double l2 = 0.0;
  double mean_abs = 0.0;
};

PerturbationStats perturbation_stats(const Volume& x, const Volume& x_adv);

}  // namespace volrob

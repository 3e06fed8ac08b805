#pragma once

#include <cstdint>
#include <vector>

#include "volrob/common.hpp"

namespace volrob {

/// 3D scalar intensity field, every voxel in [0,1]. Stored as float32 so that
/// on-disk round trips are bit-exact; numeric kernels widen to double.
struct Volume {
  Shape3 shape{0, 0, 0};
  std::vector<float> data;

  Volume() = default;
  Volume(Shape3 s, float fill = 0.0f);

  long size() const { return numel(shape); }
  float at(int h, int w, int d) const { return data[flat_index(shape, h, w, d)]; }
  float& at(int h, int w, int d) { return data[flat_index(shape, h, w, d)]; }

  /// Exact element-wise equality (shape and bits).
  bool operator==(const Volume& other) const;

  /// Widened copy of the intensity field.
  std::vector<double> as_doubles() const;

  /// Checks [0,1] bounds and shape/data consistency; throws on violation.
  void validate() const;

  /// Builds a Volume from doubles, clamping into [0,1] before narrowing.
  static Volume from_doubles(Shape3 s, const std::vector<double>& values);
};

/// Per-voxel integer class labels in [0, num_classes).
struct LabelVolume {
  Shape3 shape{0, 0, 0};
  std::vector<std::int32_t> labels;
  int num_classes = 2;

  LabelVolume() = default;
  LabelVolume(Shape3 s, int classes, std::int32_t fill = 0);

  long size() const { return numel(shape); }
  std::int32_t at(int h, int w, int d) const { return labels[flat_index(shape, h, w, d)]; }
  std::int32_t& at(int h, int w, int d) { return labels[flat_index(shape, h, w, d)]; }

  bool operator==(const LabelVolume& other) const;
  void validate() const;
};

/// Per-class, per-voxel real scores, channel-major: (C, H, W, D).
struct Logits {
  Shape3 shape{0, 0, 0};
  int num_classes = 0;
  std::vector<double> data;  // size C * H * W * D

  Logits() = default;
  Logits(Shape3 s, int classes);

  long voxels() const { return numel(shape); }
  double at(int c, long voxel) const { return data[static_cast<long>(c) * voxels() + voxel]; }
  double& at(int c, long voxel) { return data[static_cast<long>(c) * voxels() + voxel]; }

  void validate() const;
};

/// Channel-simplex probabilities with the same layout as Logits.
using ProbVolume = Logits;

/// Per-voxel softmax over channels. Shift-invariant and overflow-safe;
/// rejects non-finite input.
ProbVolume softmax_channels(const Logits& logits);

/// Per-voxel argmax over channels; ties break toward the lowest class index.
LabelVolume predict_labels(const Logits& logits);

}  // namespace volrob

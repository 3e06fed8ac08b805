#include "volrob/volume.hpp"

#include <algorithm>
#include <cmath>

namespace volrob {

Volume::Volume(Shape3 s, float fill) : shape(s), data(numel(s), fill) {}

bool Volume::operator==(const Volume& other) const {
  return shape == other.shape && data == other.data;
}

std::vector<double> Volume::as_doubles() const {
  return std::vector<double>(data.begin(), data.end());
}

void Volume::validate() const {
  require(shape[0] > 0 && shape[1] > 0 && shape[2] > 0, ErrKind::InvalidArgument,
          "volume shape must be positive, got " + shape_str(shape));
  require(static_cast<long>(data.size()) == size(), ErrKind::ShapeMismatch,
          "volume data length " + std::to_string(data.size()) + " does not match shape " +
              shape_str(shape));
  for (const float v : data) {
    require(std::isfinite(v) && v >= 0.0f && v <= 1.0f, ErrKind::InvalidArgument,
            "volume intensity " + std::to_string(v) + " outside [0,1]");
  }
}

Volume Volume::from_doubles(Shape3 s, const std::vector<double>& values) {
  require(static_cast<long>(values.size()) == numel(s), ErrKind::ShapeMismatch,
          "value count " + std::to_string(values.size()) + " does not match shape " +
              shape_str(s));
  Volume out(s);
  for (long i = 0; i < out.size(); ++i) {
    out.data[i] = static_cast<float>(std::clamp(values[i], 0.0, 1.0));
  }
  return out;
}

LabelVolume::LabelVolume(Shape3 s, int classes, std::int32_t fill)
    : shape(s), labels(numel(s), fill), num_classes(classes) {}

bool LabelVolume::operator==(const LabelVolume& other) const {
  return shape == other.shape && num_classes == other.num_classes && labels == other.labels;
}

void LabelVolume::validate() const {
  require(num_classes >= 2, ErrKind::InvalidArgument,
          "num_classes must be >= 2, got " + std::to_string(num_classes));
  require(static_cast<long>(labels.size()) == size(), ErrKind::ShapeMismatch,
          "label data length does not match shape " + shape_str(shape));
  for (const std::int32_t l : labels) {
    require(l >= 0 && l < num_classes, ErrKind::InvalidArgument,
            "label " + std::to_string(l) + " outside [0," + std::to_string(num_classes) + ")");
  }
}

Logits::Logits(Shape3 s, int classes)
    : shape(s), num_classes(classes), data(static_cast<long>(classes) * numel(s), 0.0) {}

void Logits::validate() const {
  require(num_classes >= 1, ErrKind::InvalidArgument, "logits need at least one channel");
  require(static_cast<long>(data.size()) == static_cast<long>(num_classes) * voxels(),
          ErrKind::ShapeMismatch, "logits data length does not match (C,H,W,D)");
  for (const double v : data) {
    require(std::isfinite(v), ErrKind::NonFiniteInput, "logits contain a non-finite value");
  }
}

ProbVolume softmax_channels(const Logits& logits) {
  logits.validate();
  const long n = logits.voxels();
  const int c = logits.num_classes;
  ProbVolume probs(logits.shape, c);
  for (long v = 0; v < n; ++v) {
    double mx = logits.data[v];
    for (int k = 1; k < c; ++k) mx = std::max(mx, logits.data[static_cast<long>(k) * n + v]);
    double sum = 0.0;
    for (int k = 0; k < c; ++k) {
      const double e = std::exp(logits.data[static_cast<long>(k) * n + v] - mx);
      probs.data[static_cast<long>(k) * n + v] = e;
      sum += e;
    }
    for (int k = 0; k < c; ++k) probs.data[static_cast<long>(k) * n + v] /= sum;
  }
  return probs;
}

LabelVolume predict_labels(const Logits& logits) {
  const long n = logits.voxels();
  const int c = logits.num_classes;
  LabelVolume out(logits.shape, c);
  for (long v = 0; v < n; ++v) {
    int best = 0;
    double best_score = logits.data[v];
    for (int k = 1; k < c; ++k) {
      const double s = logits.data[static_cast<long>(k) * n + v];
      if (s > best_score) {  // strict: ties keep the lower class index
        best_score = s;
        best = k;
      }
    }
    out.labels[v] = best;
  }
  return out;
}

}  // namespace volrob

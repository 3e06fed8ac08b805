#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "volrob/volume.hpp"

namespace volrob {

/// Toy differentiable segmentation backbones. Three distinct inductive
/// biases so cross-architecture transfer is meaningful:
///   conv-seg: three 3x3x3 convolution layers (1 -> 8 -> 16 -> C, ReLU between)
///   mix-seg:  4^3 patch embedding, one global attention mixing layer,
///             per-patch linear decoder (window must be divisible by 4)
///   scan-seg: per-voxel embedding, gated linear recurrence along the raster
///             scan plus the reversed scan, linear decoder
enum class Arch { ConvSeg, MixSeg, ScanSeg };

Arch arch_from_id(const std::string& id);
const char* arch_id(Arch arch);

/// Differentiable segmenter: logits = F(params, x), plus exact reverse-mode
/// loss gradients w.r.t. input and parameters. Immutable value type.
struct SegModel {
  Arch arch = Arch::ConvSeg;
  int num_classes = 2;
  Shape3 window{32, 32, 32};
  std::uint64_t seed = 0;
  std::vector<double> params;

  long param_count() const { return static_cast<long>(params.size()); }
};

struct LossSpec {
  enum class Kind { SoftDice, CrossEntropy, CosineWeightedCrossEntropy, Composite };
  Kind kind = Kind::SoftDice;

  static LossSpec soft_dice() { return {Kind::SoftDice}; }
  static LossSpec cross_entropy() { return {Kind::CrossEntropy}; }
  static LossSpec cosine_weighted_ce() { return {Kind::CosineWeightedCrossEntropy}; }
  static LossSpec composite() { return {Kind::Composite}; }
};

/// Smoothing added to both numerator and denominator of soft dice; keeps
/// empty classes away from 0/0 without moving well-conditioned values.
inline constexpr double kDiceSmoothing = 1e-5;

struct GradientField {
  Shape3 shape{0, 0, 0};
  std::vector<double> values;
};

SegModel build_model(Arch arch, int num_classes, Shape3 window, std::uint64_t seed);
SegModel build_model(const std::string& arch_id, int num_classes, Shape3 window,
                     std::uint64_t seed);

/// Deterministic forward pass to per-class logits; x must be window-shaped.
Logits forward(const SegModel& model, const Volume& x);

/// Forward on a raw double field (same layout as Volume); numeric checks and
/// attack inner loops use this to stay in full precision end to end.
Logits forward_field(const SegModel& model, const std::vector<double>& field);

double loss_value(const SegModel& model, const Volume& x, const LabelVolume& y,
                  const LossSpec& spec);
double loss_value_field(const SegModel& model, const std::vector<double>& field,
                        const LabelVolume& y, const LossSpec& spec);

/// Exact reverse-mode gradient of loss_value w.r.t. the input field.
GradientField input_gradient(const SegModel& model, const Volume& x, const LabelVolume& y,
                             const LossSpec& spec);
GradientField input_gradient_field(const SegModel& model, const std::vector<double>& field,
                                   const LabelVolume& y, const LossSpec& spec);

/// Loss and input gradient from one tape (attack inner loop).
std::pair<double, GradientField> loss_and_input_gradient(const SegModel& model,
                                                         const std::vector<double>& field,
                                                         const LabelVolume& y,
                                                         const LossSpec& spec);

/// Loss and parameter gradient in one pass (training path).
std::pair<double, std::vector<double>> param_gradient(const SegModel& model,
                                                      const std::vector<double>& field,
                                                      const LabelVolume& y, const LossSpec& spec);

struct TrainResult {
  SegModel model;
  std::vector<double> epoch_loss;  // mean loss per epoch, visit order
};

/// SGD with momentum 0.9 on composite(dice+ce), per-sample updates with a
/// seeded shuffle every epoch. Pure function of (model, data, hyper, seed).
TrainResult train_model(const SegModel& model,
                        const std::vector<std::pair<Volume, LabelVolume>>& data, int epochs,
                        double learning_rate, std::uint64_t seed);

/// Checkpoint format: one-line JSON header + little-endian float32 blob.
void save_model(const SegModel& model, const std::string& path);
SegModel load_model(const std::string& path);

}  // namespace volrob

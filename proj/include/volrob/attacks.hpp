#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "volrob/metrics.hpp"
#include "volrob/model.hpp"
#include "volrob/signal.hpp"
#include "volrob/volume.hpp"

namespace volrob {

struct PixelAttackConfig {
  double epsilon = 8.0 / 255.0;  // L-inf budget in intensity units
  double alpha = 0.0;            // step size; <= 0 picks epsilon/4
  int steps = 20;
  std::uint64_t seed = 0;

  double effective_alpha() const { return alpha > 0.0 ? alpha : epsilon / 4.0; }
  void validate() const;
};

struct VafaConfig {
  double q_max = 30.0;
  int patch = 32;
  int steps = 20;
  double step_size = 0.0;  // on the quantization table; <= 0 picks q_max/10
  std::uint64_t seed = 0;

  double effective_step() const { return step_size > 0.0 ? step_size : q_max / 10.0; }
  void validate() const;
};

struct AttackOutcome {
  Volume x_adv;
  std::vector<double> trace;  // objective per iteration (length 1 for FGSM/GN)
  PerturbationStats stats;
  double wall_time_seconds = 0.0;  // in-memory diagnostic; never serialized
  std::vector<QuantTable> tables;  // final per-patch quantization tables (frequency attack only)
};

/// Additive seeded noise, clipped to the L-inf ball then [0,1]. Model-blind.
AttackOutcome gaussian_noise(const Volume& x, double epsilon, std::uint64_t seed);

/// Single signed-gradient step of size epsilon on the Dice objective.
AttackOutcome fgsm(const SegModel& model, const Volume& x, const LabelVolume& y,
                   const PixelAttackConfig& cfg);

/// Iterated signed-gradient ascent with projection onto the epsilon ball
/// intersected with [0,1]. Starts at x (no random start).
AttackOutcome pgd(const SegModel& model, const Volume& x, const LabelVolume& y,
                  const PixelAttackConfig& cfg);

/// PGD on the cosine-weighted cross-entropy objective: each voxel's term is
/// scaled by the cosine similarity between its softmax prediction and the
/// one-hot target, recomputed every iteration.
AttackOutcome cospgd(const SegModel& model, const Volume& x, const LabelVolume& y,
                     const PixelAttackConfig& cfg);

/// Frequency-domain attack: per-patch quantization tables on the 3D DCT,
/// ascended on the Dice objective through straight-through gradients and
/// projected into [1, q_max] every step.
AttackOutcome vafa(const SegModel& model, const Volume& x, const LabelVolume& y,
                   const VafaConfig& cfg);

enum class AttackKind { GaussianNoise, Fgsm, Pgd, CosPgd, Vafa };

AttackKind attack_kind_from_name(const std::string& name);
const char* attack_name(AttackKind kind);

/// One attack invocation as configured by the harness.
struct AttackConfig {
  AttackKind kind = AttackKind::Pgd;
  PixelAttackConfig pixel;
  VafaConfig vafa;

  std::string label() const;  // e.g. "pgd", "vafa"
};

AttackOutcome run_attack(const SegModel& model, const Volume& x, const LabelVolume& y,
                         const AttackConfig& cfg);

}  // namespace volrob

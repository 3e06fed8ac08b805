#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "volrob/attacks.hpp"

using namespace volrob;
using namespace volrob::testing;

namespace {

const TrainedFixture& conv16() {
  static const TrainedFixture f =
      trained_fixture(Arch::ConvSeg, {16, 16, 16}, 3, 8, 2, 8, 0.05, 42);
  return f;
}

double budget_violation(const Volume& x, const Volume& x_adv, double eps) {
  double worst = 0.0;
  for (long i = 0; i < x.size(); ++i) {
    const double d = std::abs(static_cast<double>(x_adv.data[i]) - x.data[i]);
    worst = std::max(worst, d - eps);
  }
  return worst;
}

}  // namespace

TEST_CASE("gaussian noise with zero budget is the identity") {
  const Volume x = random_volume({8, 8, 8}, 1);
  const AttackOutcome out = gaussian_noise(x, 0.0, 7);
  CHECK(out.x_adv == x);
  CHECK(out.stats.linf == 0.0);
  CHECK(out.trace.size() == 1);
}

TEST_CASE("gaussian noise respects the L-inf budget for any seed") {
  const Volume x = random_volume({8, 8, 8}, 2);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AttackOutcome out = gaussian_noise(x, 8.0 / 255.0, seed);
    CHECK(budget_violation(x, out.x_adv, 8.0 / 255.0) <= 1e-6);
    out.x_adv.validate();
  }
}

TEST_CASE("gaussian noise is deterministic in the seed") {
  const Volume x = random_volume({8, 8, 8}, 3);
  const AttackOutcome a = gaussian_noise(x, 0.05, 123);
  const AttackOutcome b = gaussian_noise(x, 0.05, 123);
  CHECK(a.x_adv == b.x_adv);
  CHECK(gaussian_noise(x, 0.05, 124).x_adv.data != a.x_adv.data);
}

TEST_CASE("fgsm with zero budget returns the input") {
  const auto& f = conv16();
  const auto& [x, y] = f.held_out[0];
  PixelAttackConfig cfg;
  cfg.epsilon = 0.0;
  const AttackOutcome out = fgsm(f.model, x, y, cfg);
  CHECK(out.x_adv == x);
  CHECK(out.trace.size() == 1);
}

TEST_CASE("fgsm equals one signed-gradient step of the Dice objective") {
  // Oracle: gradient computed independently through input_gradient, volume
  // kept away from the [0,1] walls so clipping never engages.
  const auto& f = conv16();
  const Volume x = random_volume({16, 16, 16}, 9, 0.2f, 0.8f);
  const LabelVolume y = f.held_out[0].second;
  const double eps = 0.05;
  PixelAttackConfig cfg;
  cfg.epsilon = eps;
  const AttackOutcome out = fgsm(f.model, x, y, cfg);

  const GradientField g = input_gradient(f.model, x, y, LossSpec::soft_dice());
  for (long i = 0; i < x.size(); ++i) {
    const double sign = g.values[i] > 0 ? 1.0 : (g.values[i] < 0 ? -1.0 : 0.0);
    const double expected = static_cast<double>(x.data[i]) + eps * sign;
    CHECK(out.x_adv.data[i] == static_cast<float>(expected));
  }
}

TEST_CASE("every fgsm step lands on 0, +eps or -eps up to clipping") {
  const auto& f = conv16();
  const auto& [x, y] = f.held_out[0];
  const double eps = 8.0 / 255.0;
  PixelAttackConfig cfg;
  cfg.epsilon = eps;
  const AttackOutcome out = fgsm(f.model, x, y, cfg);
  for (long i = 0; i < x.size(); ++i) {
    const double d = std::abs(static_cast<double>(out.x_adv.data[i]) - x.data[i]);
    const bool clipped = out.x_adv.data[i] == 0.0f || out.x_adv.data[i] == 1.0f;
    const bool on_grid = d < 1e-6 || std::abs(d - eps) < 1e-6;
    CHECK((on_grid || clipped));
  }
}

TEST_CASE("pgd with one step of size epsilon collapses to fgsm") {
  const auto& f = conv16();
  const auto& [x, y] = f.held_out[1];
  PixelAttackConfig cfg;
  cfg.epsilon = 8.0 / 255.0;
  cfg.alpha = cfg.epsilon;
  cfg.steps = 1;
  const AttackOutcome a = pgd(f.model, x, y, cfg);
  const AttackOutcome b = fgsm(f.model, x, y, cfg);
  CHECK(a.x_adv == b.x_adv);
}

TEST_CASE("pgd never leaves the projection set") {
  const auto& f = conv16();
  const auto& [x, y] = f.held_out[0];
  PixelAttackConfig cfg;
  cfg.epsilon = 8.0 / 255.0;
  cfg.steps = 5;
  const AttackOutcome out = pgd(f.model, x, y, cfg);
  CHECK(budget_violation(x, out.x_adv, cfg.epsilon) <= 1e-6);
  out.x_adv.validate();
  CHECK(out.trace.size() == 5);
  for (const double v : out.trace) CHECK(std::isfinite(v));
}

TEST_CASE("iterating pgd reaches at least the fgsm objective") {
  const auto& f = conv16();
  const auto& [x, y] = f.held_out[0];
  PixelAttackConfig cfg;
  cfg.epsilon = 8.0 / 255.0;
  cfg.steps = 10;
  const AttackOutcome p = pgd(f.model, x, y, cfg);
  const AttackOutcome g = fgsm(f.model, x, y, cfg);
  const double pgd_final = loss_value(f.model, p.x_adv, y, LossSpec::soft_dice());
  const double fgsm_final = loss_value(f.model, g.x_adv, y, LossSpec::soft_dice());
  CHECK(pgd_final >= fgsm_final - 1e-9);
}

TEST_CASE("cospgd stays within budget and produces finite traces") {
  const auto& f = conv16();
  const auto& [x, y] = f.held_out[1];
  PixelAttackConfig cfg;
  cfg.epsilon = 4.0 / 255.0;
  cfg.steps = 5;
  const AttackOutcome out = cospgd(f.model, x, y, cfg);
  CHECK(budget_violation(x, out.x_adv, cfg.epsilon) <= 1e-6);
  out.x_adv.validate();
  CHECK(out.trace.size() == 5);
  for (const double v : out.trace) {
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
  }
}

TEST_CASE("attacks are deterministic given identical inputs") {
  const auto& f = conv16();
  const auto& [x, y] = f.held_out[0];
  PixelAttackConfig cfg;
  cfg.epsilon = 8.0 / 255.0;
  cfg.steps = 3;
  CHECK(pgd(f.model, x, y, cfg).x_adv == pgd(f.model, x, y, cfg).x_adv);
  CHECK(cospgd(f.model, x, y, cfg).x_adv == cospgd(f.model, x, y, cfg).x_adv);

  VafaConfig vc;
  vc.patch = 8;
  vc.steps = 2;
  CHECK(vafa(f.model, x, y, vc).x_adv == vafa(f.model, x, y, vc).x_adv);
}

TEST_CASE("vafa keeps every quantization table inside [1, q_max]") {
  const auto& f = conv16();
  const auto& [x, y] = f.held_out[0];
  VafaConfig cfg;
  cfg.q_max = 30.0;
  cfg.patch = 8;
  cfg.steps = 5;
  const AttackOutcome out = vafa(f.model, x, y, cfg);
  REQUIRE(!out.tables.empty());
  for (const auto& t : out.tables) {
    CHECK_NOTHROW(t.validate());
    CHECK(t.q_max == 30.0);
  }
  CHECK(out.trace.size() == 5);
}

TEST_CASE("patch round trip without quantization reproduces the volume") {
  const Volume x = random_volume({16, 16, 16}, 33);
  const auto patches = partition_patches(x, 8);
  std::vector<std::vector<double>> recon;
  for (const auto& p : patches) recon.push_back(idct3(dct3(p, 8)));
  const Volume back = assemble_patches(recon, x.shape, 8);
  for (long i = 0; i < x.size(); ++i)
    CHECK(std::abs(static_cast<double>(back.data[i]) - x.data[i]) < 1e-5);
}

TEST_CASE("the reconstruction map fixes volumes with integer DCT spectra") {
  // Constant 0.5 blocks at p=4 put the whole spectrum on integers (DC = 4),
  // so an all-ones table must reproduce the volume exactly.
  const Volume x({8, 8, 8}, 0.5f);
  const auto patches = partition_patches(x, 4);
  std::vector<std::vector<double>> recon;
  for (const auto& p : patches) {
    const DctBlock spectrum = dct3(p, 4);
    recon.push_back(idct3(quantize_dequantize(spectrum, QuantTable::ones(4, 30.0))));
  }
  CHECK(assemble_patches(recon, x.shape, 4) == x);
}

TEST_CASE("vafa degrades segmentation on a trained model") {
  const auto& f = conv16();
  VafaConfig cfg;
  cfg.q_max = 30.0;
  cfg.patch = 8;
  cfg.steps = 10;
  double clean_acc = 0.0, adv_acc = 0.0;
  for (const auto& [x, y] : f.held_out) {
    clean_acc += compute_sample_metrics(predict_labels(forward(f.model, x)), y).mean_dsc;
    const AttackOutcome out = vafa(f.model, x, y, cfg);
    adv_acc += compute_sample_metrics(predict_labels(forward(f.model, out.x_adv)), y).mean_dsc;
  }
  CHECK(adv_acc < clean_acc);
}

TEST_CASE("vafa rejects invalid configurations") {
  const auto& f = conv16();
  const auto& [x, y] = f.held_out[0];
  VafaConfig bad_q;
  bad_q.q_max = 0.5;
  CHECK_THROWS_AS(vafa(f.model, x, y, bad_q), Error);

  VafaConfig bad_patch;
  bad_patch.patch = 5;  // 16 % 5 != 0
  CHECK_THROWS_AS(vafa(f.model, x, y, bad_patch), Error);
}

TEST_CASE("budget compliance holds across attacks, budgets and architectures") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Arch arch = seed % 3 == 0 ? Arch::ConvSeg : (seed % 3 == 1 ? Arch::MixSeg : Arch::ScanSeg);
    const Shape3 shape{8, 8, 8};
    const SegModel m = build_model(arch, 3, shape, seed + 500);
    const Volume x = random_volume(shape, seed + 600);
    const LabelVolume y = random_labels(shape, 3, seed + 700);
    for (const double eps : {4.0 / 255.0, 8.0 / 255.0}) {
      PixelAttackConfig cfg;
      cfg.epsilon = eps;
      cfg.steps = 3;
      for (const AttackOutcome& out :
           {fgsm(m, x, y, cfg), pgd(m, x, y, cfg), cospgd(m, x, y, cfg)}) {
        CHECK(budget_violation(x, out.x_adv, eps) <= 1e-6);
        out.x_adv.validate();
      }
    }
  }
}

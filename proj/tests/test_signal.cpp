#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_support.hpp"
#include "volrob/signal.hpp"

using namespace volrob;
using namespace volrob::testing;

namespace {

std::vector<double> random_cube(int p, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> cube(static_cast<std::size_t>(p) * p * p);
  for (auto& v : cube) v = rng.uniform(-1.0, 1.0);
  return cube;
}

}  // namespace

TEST_CASE("constant cube concentrates all energy in the DC coefficient") {
  const std::vector<double> cube(8, 1.0);
  const DctBlock block = dct3(cube, 2);
  CHECK(std::abs(block.at(0, 0, 0) - std::pow(2.0, 1.5)) < 1e-9);
  for (long i = 1; i < block.size(); ++i) CHECK(std::abs(block.coeffs[i]) < 1e-9);
}

TEST_CASE("dct3/idct3 round trip and Parseval hold for all supported sides") {
  for (const int p : {2, 4, 8, 16, 32}) {
    CAPTURE(p);
    const std::vector<double> cube = random_cube(p, 40 + p);
    const DctBlock block = dct3(cube, p);
    const std::vector<double> back = idct3(block);

    double max_err = 0.0, ex = 0.0, ec = 0.0;
    for (std::size_t i = 0; i < cube.size(); ++i) {
      max_err = std::max(max_err, std::abs(back[i] - cube[i]));
      ex += cube[i] * cube[i];
      ec += block.coeffs[i] * block.coeffs[i];
    }
    CHECK(max_err < 1e-6);
    CHECK(std::abs(ex - ec) / ex < 1e-4);
  }
}

TEST_CASE("dct3 rejects non-cubic input") {
  CHECK_THROWS_AS(dct3(std::vector<double>(12, 0.0), 2), Error);
  CHECK_THROWS_AS(dct3(std::vector<double>(8, 0.0), 1), Error);
}

TEST_CASE("partitioning a 96-cube into 32-patches yields 27 of them") {
  const Volume x = random_volume({96, 96, 96}, 50);
  const auto patches = partition_patches(x, 32);
  CHECK(patches.size() == 27);
}

TEST_CASE("assemble is the exact inverse of partition") {
  const Volume x = random_volume({16, 24, 8}, 51);
  const auto patches = partition_patches(x, 8);
  const Volume back = assemble_patches(patches, x.shape, 8);
  CHECK(back == x);
}

TEST_CASE("a window-sized volume is its own single patch") {
  const Volume x = random_volume({32, 32, 32}, 52);
  const auto patches = partition_patches(x, 32);
  REQUIRE(patches.size() == 1);
  for (long i = 0; i < x.size(); ++i)
    CHECK(patches[0][i] == static_cast<double>(x.data[i]));
}

TEST_CASE("indivisible shapes report the padding they would need") {
  const Volume x = random_volume({30, 32, 32}, 53);
  try {
    partition_patches(x, 8);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrKind::ShapeMismatch);
    CHECK(std::string(e.what()).find("2 voxels of padding") != std::string::npos);
  }
}

TEST_CASE("quantize-dequantize arithmetic") {
  DctBlock block;
  block.p = 2;
  block.coeffs.assign(8, 7.3);
  QuantTable q = QuantTable::ones(2, 30.0);
  std::fill(q.values.begin(), q.values.end(), 2.0);
  const DctBlock out = quantize_dequantize(block, q);
  for (const double v : out.coeffs) CHECK(v == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("integer multiples of the divisor are fixed points") {
  DctBlock block;
  block.p = 2;
  block.coeffs = {0.0, 3.0, -6.0, 9.0, 12.0, -15.0, 18.0, 21.0};
  QuantTable q = QuantTable::ones(2, 30.0);
  std::fill(q.values.begin(), q.values.end(), 3.0);
  const DctBlock out = quantize_dequantize(block, q);
  CHECK(out.coeffs == block.coeffs);
}

TEST_CASE("all-ones table with integer coefficients is the identity") {
  DctBlock block;
  block.p = 2;
  block.coeffs = {4.0, -2.0, 0.0, 7.0, -11.0, 3.0, 1.0, -1.0};
  const DctBlock out = quantize_dequantize(block, QuantTable::ones(2, 30.0));
  CHECK(out.coeffs == block.coeffs);
}

TEST_CASE("quantization error grows along nested divisor chains") {
  // Direct-evaluation oracle over q in {1,2,4,8} on a fixed random block.
  const int p = 4;
  DctBlock block;
  block.p = p;
  block.coeffs = random_cube(p, 54);
  for (auto& c : block.coeffs) c *= 20.0;

  std::vector<std::vector<double>> errors;
  for (const double qv : {1.0, 2.0, 4.0, 8.0}) {
    QuantTable q = QuantTable::ones(p, 30.0);
    std::fill(q.values.begin(), q.values.end(), qv);
    const DctBlock out = quantize_dequantize(block, q);
    std::vector<double> err(block.coeffs.size());
    for (std::size_t i = 0; i < err.size(); ++i) err[i] = std::abs(out.coeffs[i] - block.coeffs[i]);
    errors.push_back(std::move(err));
  }
  for (std::size_t step = 1; step < errors.size(); ++step)
    for (std::size_t i = 0; i < errors[step].size(); ++i)
      CHECK(errors[step][i] >= errors[step - 1][i] - 1e-12);
}

TEST_CASE("quantization rejects divisors outside [1, q_max]") {
  DctBlock block;
  block.p = 2;
  block.coeffs.assign(8, 1.0);
  QuantTable q = QuantTable::ones(2, 4.0);
  q.values[0] = 5.0;
  CHECK_THROWS_AS(quantize_dequantize(block, q), Error);
  q.values[0] = 0.5;
  CHECK_THROWS_AS(quantize_dequantize(block, q), Error);
}

TEST_CASE("table projection restores the divisor bounds") {
  QuantTable q = QuantTable::ones(2, 10.0);
  q.values[0] = -3.0;
  q.values[1] = 99.0;
  q.project();
  CHECK_NOTHROW(q.validate());
  CHECK(q.values[0] == 1.0);
  CHECK(q.values[1] == 10.0);
}

TEST_CASE("band mask pass counts match cube-shell arithmetic") {
  const Shape3 s{96, 96, 96};
  CHECK(make_band_mask(s, 0, 8).pass_count() == 512);
  CHECK(make_band_mask(s, 0, 16).pass_count() == 4096);
  CHECK(make_band_mask(s, 16, 48).pass_count() == 48L * 48 * 48 - 16L * 16 * 16);
  CHECK(make_band_mask(s, 16, 96).pass_count() == 96L * 96 * 96 - 16L * 16 * 16);
}

TEST_CASE("touching bands partition the spectrum") {
  const Shape3 s{96, 96, 96};
  const FrequencyMask low = make_band_mask(s, 0, 16);
  const FrequencyMask high = make_band_mask(s, 16, 96);
  for (long i = 0; i < numel(s); ++i) {
    CHECK(low.pass[i] + high.pass[i] <= 1);           // disjoint
    CHECK(low.pass[i] + high.pass[i] == 1);           // and covering
  }
}

TEST_CASE("degenerate band bounds are rejected") {
  CHECK_THROWS_AS(make_band_mask({32, 32, 32}, 8, 8), Error);
  CHECK_THROWS_AS(make_band_mask({32, 32, 32}, 16, 8), Error);
  CHECK_THROWS_AS(make_band_mask({32, 32, 32}, 0, 33), Error);
}

TEST_CASE("an all-pass filter reproduces the adversarial volume") {
  const Volume x = random_volume({16, 16, 16}, 60);
  const Volume x_adv = random_volume({16, 16, 16}, 61);
  const FrequencyMask all = make_band_mask({16, 16, 16}, 0, 16);
  const Volume out = filter_perturbation(x, x_adv, all);
  for (long i = 0; i < x.size(); ++i)
    CHECK(std::abs(out.data[i] - x_adv.data[i]) < 1e-5);
}

TEST_CASE("an all-block filter returns the clean volume exactly") {
  const Volume x = random_volume({16, 16, 16}, 62);
  const Volume x_adv = random_volume({16, 16, 16}, 63);
  FrequencyMask none;
  none.shape = x.shape;
  none.pass.assign(x.size(), 0);
  const Volume out = filter_perturbation(x, x_adv, none);
  CHECK(out == x);
}

TEST_CASE("complementary bands superpose to the full perturbation") {
  const Volume x = random_volume({16, 16, 16}, 64);
  const Volume x_adv = random_volume({16, 16, 16}, 65);
  const FrequencyMask low = make_band_mask({16, 16, 16}, 0, 4);
  FrequencyMask rest = make_band_mask({16, 16, 16}, 4, 16);
  const std::vector<double> d_low = filtered_delta(x, x_adv, low);
  const std::vector<double> d_rest = filtered_delta(x, x_adv, rest);
  for (long i = 0; i < x.size(); ++i) {
    const double full = static_cast<double>(x_adv.data[i]) - static_cast<double>(x.data[i]);
    CHECK(std::abs(d_low[i] + d_rest[i] - full) < 1e-5);
  }
}

TEST_CASE("filter rejects mismatched shapes") {
  const Volume x = random_volume({16, 16, 16}, 66);
  const Volume x_adv = random_volume({16, 16, 8}, 67);
  const FrequencyMask m = make_band_mask({16, 16, 16}, 0, 16);
  CHECK_THROWS_AS(filter_perturbation(x, x_adv, m), Error);
}

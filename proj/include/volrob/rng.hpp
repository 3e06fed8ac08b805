#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace volrob {

// All randomness flows through this wrapper. std::mt19937_64 output is fully
// specified by the standard; the distributions below are hand-rolled because
// std::*_distribution algorithms are implementation-defined and would break
// seed-stable results across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Integer in [lo, hi] via rejection-free modulo of a 64-bit draw; the bias
  /// is below 2^-50 for the ranges used here.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(engine_() % span);
  }

  /// Standard normal via Box-Muller; one fresh pair per call, second value
  /// cached so consecutive draws stay stream-stable.
  double normal() {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  template <typename It>
  void shuffle(It first, It last) {
    // Fisher-Yates with our own index draws (std::shuffle is unspecified).
    const auto n = static_cast<std::int64_t>(last - first);
    for (std::int64_t i = n - 1; i > 0; --i) {
      std::swap(first[i], first[uniform_int(0, i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

/// Stable sub-seed derivation: hashes a tag string into the base seed so that
/// independent workloads (per sample, per attack, per model) get decorrelated
/// deterministic streams.
std::uint64_t derive_seed(std::uint64_t base, std::string_view tag);

}  // namespace volrob

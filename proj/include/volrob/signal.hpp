#pragma once

#include <cstdint>
#include <vector>

#include "volrob/volume.hpp"

namespace volrob {

/// Coefficients of a p^3 cube under the orthonormal (energy preserving)
/// type-II DCT, applied separably per axis.
struct DctBlock {
  int p = 0;
  std::vector<double> coeffs;

  long size() const { return static_cast<long>(p) * p * p; }
  double at(int i, int j, int k) const { return coeffs[(static_cast<long>(i) * p + j) * p + k]; }
  double& at(int i, int j, int k) { return coeffs[(static_cast<long>(i) * p + j) * p + k]; }
};

/// Forward/inverse 3D orthonormal DCT-II on a cube of side p (p >= 2).
/// Round trip is exact to ~1e-12; the DC basis weight is sqrt(1/p) per axis.
DctBlock dct3(const std::vector<double>& cube, int p);
std::vector<double> idct3(const DctBlock& block);

/// Separable orthonormal DCT over an arbitrary (H,W,D) field; the
/// whole-volume transform behind frequency filtering.
std::vector<double> dct_field(const std::vector<double>& field, Shape3 shape);
std::vector<double> idct_field(const std::vector<double>& field, Shape3 shape);

/// Non-overlapping p^3 tiling in raster order over the patch grid.
/// Every axis must be divisible by p; the error reports the padding needed.
std::vector<std::vector<double>> partition_patches(const Volume& x, int p);
Volume assemble_patches(const std::vector<std::vector<double>>& patches, Shape3 shape, int p);

/// Positive per-frequency divisors, bounded by q_max.
struct QuantTable {
  int p = 0;
  double q_max = 1.0;
  std::vector<double> values;

  static QuantTable ones(int p, double q_max);
  void validate() const;
  /// Clamps every entry back into [1, q_max].
  void project();
};

/// Lossy round trip through the quantization grid:
/// out = round(coeff / q) * q, rounding half away from zero.
/// Declared gradients (straight-through): d out / d coeff = 1,
/// d out / d q = round(coeff / q); the latter is written to grad_q if given.
DctBlock quantize_dequantize(const DctBlock& coeffs, const QuantTable& q,
                             DctBlock* grad_q = nullptr);

/// Binary pass/block filter over DCT coefficients. Band masks pass the cube
/// shell a <= max(i,j,k) < b.
struct FrequencyMask {
  Shape3 shape{0, 0, 0};
  std::vector<std::uint8_t> pass;
  int band_lo = -1;  // -1 when not built from a band
  int band_hi = -1;

  long pass_count() const;
};

FrequencyMask make_band_mask(Shape3 shape, int a, int b);

/// IDCT(DCT(x_adv - x) .* mask): the band-limited part of the perturbation,
/// before adding back to x and clipping. Linear in (x_adv - x).
std::vector<double> filtered_delta(const Volume& x, const Volume& x_adv, const FrequencyMask& m);

/// x + filtered_delta, clipped to [0,1].
Volume filter_perturbation(const Volume& x, const Volume& x_adv, const FrequencyMask& m);

}  // namespace volrob

#include "volrob/signal.hpp"

#include <algorithm>
#include <cmath>

namespace volrob {

namespace {

constexpr double kPi = 3.14159265358979323846;

/// Orthonormal DCT-II basis: row k is the k-th frequency atom over n samples.
std::vector<double> dct_basis(int n) {
  std::vector<double> basis(static_cast<std::size_t>(n) * n);
  const double s0 = std::sqrt(1.0 / n);
  const double sk = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k) {
    const double scale = k == 0 ? s0 : sk;
    for (int i = 0; i < n; ++i) {
      basis[static_cast<long>(k) * n + i] = scale * std::cos(kPi * (2.0 * i + 1.0) * k / (2.0 * n));
    }
  }
  return basis;
}

/// Applies `basis` (or its transpose) to every line along `axis` of a
/// (H,W,D) field. The basis is orthogonal, so transpose == inverse.
void transform_axis(std::vector<double>& field, Shape3 shape, int axis,
                    const std::vector<double>& basis, bool transpose) {
  const int n = shape[axis];
  const long strides[3] = {static_cast<long>(shape[1]) * shape[2], shape[2], 1};
  const long stride = strides[axis];
  std::vector<double> line(n), result(n);

  const int o1 = axis == 0 ? 1 : 0;
  const int o2 = axis == 2 ? 1 : 2;
  for (int a = 0; a < shape[o1]; ++a) {
    for (int b = 0; b < shape[o2]; ++b) {
      long base = 0;
      // Build the flat index with the walked axis zeroed.
      int coord[3] = {0, 0, 0};
      coord[o1] = a;
      coord[o2] = b;
      base = (static_cast<long>(coord[0]) * shape[1] + coord[1]) * shape[2] + coord[2];
      for (int i = 0; i < n; ++i) line[i] = field[base + i * stride];
      for (int k = 0; k < n; ++k) {
        double acc = 0.0;
        if (!transpose) {
          const double* row = basis.data() + static_cast<long>(k) * n;
          for (int i = 0; i < n; ++i) acc += row[i] * line[i];
        } else {
          for (int i = 0; i < n; ++i) acc += basis[static_cast<long>(i) * n + k] * line[i];
        }
        result[k] = acc;
      }
      for (int i = 0; i < n; ++i) field[base + i * stride] = result[i];
    }
  }
}

std::vector<double> transform_field(std::vector<double> field, Shape3 shape, bool inverse) {
  require(static_cast<long>(field.size()) == numel(shape), ErrKind::ShapeMismatch,
          "field size does not match shape " + shape_str(shape));
  for (int axis = 0; axis < 3; ++axis) {
    const auto basis = dct_basis(shape[axis]);
    transform_axis(field, shape, axis, basis, inverse);
  }
  return field;
}

}  // namespace

DctBlock dct3(const std::vector<double>& cube, int p) {
  require(p >= 2, ErrKind::InvalidArgument, "dct3 needs cube side >= 2, got " + std::to_string(p));
  require(static_cast<long>(cube.size()) == static_cast<long>(p) * p * p, ErrKind::ShapeMismatch,
          "dct3 input is not a p^3 cube (p=" + std::to_string(p) + ")");
  DctBlock out;
  out.p = p;
  out.coeffs = transform_field(cube, {p, p, p}, false);
  return out;
}

std::vector<double> idct3(const DctBlock& block) {
  require(block.p >= 2, ErrKind::InvalidArgument, "idct3 needs cube side >= 2");
  return transform_field(block.coeffs, {block.p, block.p, block.p}, true);
}

std::vector<double> dct_field(const std::vector<double>& field, Shape3 shape) {
  return transform_field(field, shape, false);
}

std::vector<double> idct_field(const std::vector<double>& field, Shape3 shape) {
  return transform_field(field, shape, true);
}

std::vector<std::vector<double>> partition_patches(const Volume& x, int p) {
  require(p >= 2, ErrKind::InvalidArgument, "patch size must be >= 2");
  for (int i = 0; i < 3; ++i) {
    if (x.shape[i] % p != 0) {
      const int pad = p - x.shape[i] % p;
      throw Error(ErrKind::ShapeMismatch,
                  "axis " + std::to_string(i) + " length " + std::to_string(x.shape[i]) +
                      " is not divisible by patch size " + std::to_string(p) + "; would need " +
                      std::to_string(pad) + " voxels of padding");
    }
  }
  const int gh = x.shape[0] / p, gw = x.shape[1] / p, gd = x.shape[2] / p;
  std::vector<std::vector<double>> patches;
  patches.reserve(static_cast<std::size_t>(gh) * gw * gd);
  for (int th = 0; th < gh; ++th)
    for (int tw = 0; tw < gw; ++tw)
      for (int td = 0; td < gd; ++td) {
        std::vector<double> patch(static_cast<std::size_t>(p) * p * p);
        long i = 0;
        for (int h = 0; h < p; ++h)
          for (int w = 0; w < p; ++w)
            for (int d = 0; d < p; ++d)
              patch[i++] = x.at(th * p + h, tw * p + w, td * p + d);
        patches.push_back(std::move(patch));
      }
  return patches;
}

Volume assemble_patches(const std::vector<std::vector<double>>& patches, Shape3 shape, int p) {
  require(shape[0] % p == 0 && shape[1] % p == 0 && shape[2] % p == 0, ErrKind::ShapeMismatch,
          "target shape " + shape_str(shape) + " is not tileable by p=" + std::to_string(p));
  const int gh = shape[0] / p, gw = shape[1] / p, gd = shape[2] / p;
  require(static_cast<long>(patches.size()) == static_cast<long>(gh) * gw * gd,
          ErrKind::ShapeMismatch, "patch count does not match target shape");
  Volume out(shape);
  std::size_t t = 0;
  for (int th = 0; th < gh; ++th)
    for (int tw = 0; tw < gw; ++tw)
      for (int td = 0; td < gd; ++td, ++t) {
        const auto& patch = patches[t];
        require(static_cast<long>(patch.size()) == static_cast<long>(p) * p * p,
                ErrKind::ShapeMismatch, "patch " + std::to_string(t) + " is not p^3");
        long i = 0;
        for (int h = 0; h < p; ++h)
          for (int w = 0; w < p; ++w)
            for (int d = 0; d < p; ++d)
              out.at(th * p + h, tw * p + w, td * p + d) =
                  static_cast<float>(std::clamp(patch[i++], 0.0, 1.0));
      }
  return out;
}

QuantTable QuantTable::ones(int p, double q_max) {
  require(q_max >= 1.0, ErrKind::InvalidArgument,
          "q_max must be >= 1, got " + std::to_string(q_max));
  QuantTable t;
  t.p = p;
  t.q_max = q_max;
  t.values.assign(static_cast<std::size_t>(p) * p * p, 1.0);
  return t;
}

void QuantTable::validate() const {
  require(static_cast<long>(values.size()) == static_cast<long>(p) * p * p, ErrKind::ShapeMismatch,
          "quantization table is not p^3");
  for (const double v : values) {
    require(v >= 1.0 && v <= q_max, ErrKind::InvalidArgument,
            "quantization divisor " + std::to_string(v) + " outside [1, " +
                std::to_string(q_max) + "]");
  }
}

void QuantTable::project() {
  for (double& v : values) v = std::clamp(v, 1.0, q_max);
}

DctBlock quantize_dequantize(const DctBlock& coeffs, const QuantTable& q, DctBlock* grad_q) {
  require(coeffs.p == q.p, ErrKind::ShapeMismatch,
          "coefficient block and quantization table sizes differ");
  q.validate();
  DctBlock out;
  out.p = coeffs.p;
  out.coeffs.resize(coeffs.coeffs.size());
  if (grad_q) {
    grad_q->p = coeffs.p;
    grad_q->coeffs.resize(coeffs.coeffs.size());
  }
  for (std::size_t i = 0; i < coeffs.coeffs.size(); ++i) {
    const double level = std::round(coeffs.coeffs[i] / q.values[i]);  // half away from zero
    out.coeffs[i] = level * q.values[i];
    if (grad_q) grad_q->coeffs[i] = level;
  }
  return out;
}

long FrequencyMask::pass_count() const {
  long n = 0;
  for (const std::uint8_t v : pass) n += v;
  return n;
}

FrequencyMask make_band_mask(Shape3 shape, int a, int b) {
  require(a >= 0 && a < b, ErrKind::InvalidArgument,
          "band bounds must satisfy 0 <= a < b, got (" + std::to_string(a) + "," +
              std::to_string(b) + ")");
  const int min_axis = std::min({shape[0], shape[1], shape[2]});
  require(b <= min_axis, ErrKind::InvalidArgument,
          "band upper bound " + std::to_string(b) + " exceeds spectrum extent " +
              std::to_string(min_axis));
  FrequencyMask m;
  m.shape = shape;
  m.band_lo = a;
  m.band_hi = b;
  m.pass.assign(numel(shape), 0);
  for (int i = 0; i < shape[0]; ++i)
    for (int j = 0; j < shape[1]; ++j)
      for (int k = 0; k < shape[2]; ++k) {
        const int radius = std::max({i, j, k});
        if (radius >= a && radius < b) m.pass[flat_index(shape, i, j, k)] = 1;
      }
  return m;
}

std::vector<double> filtered_delta(const Volume& x, const Volume& x_adv, const FrequencyMask& m) {
  require_same_shape(x.shape, x_adv.shape, "clean vs adversarial volume");
  require_same_shape(x.shape, m.shape, "volume vs frequency mask");
  std::vector<double> delta(x.size());
  for (long i = 0; i < x.size(); ++i)
    delta[i] = static_cast<double>(x_adv.data[i]) - static_cast<double>(x.data[i]);
  std::vector<double> spectrum = dct_field(delta, x.shape);
  for (long i = 0; i < x.size(); ++i)
    if (!m.pass[i]) spectrum[i] = 0.0;
  return idct_field(spectrum, x.shape);
}

Volume filter_perturbation(const Volume& x, const Volume& x_adv, const FrequencyMask& m) {
  const std::vector<double> delta = filtered_delta(x, x_adv, m);
  Volume out(x.shape);
  for (long i = 0; i < x.size(); ++i) {
    out.data[i] = static_cast<float>(std::clamp(static_cast<double>(x.data[i]) + delta[i], 0.0, 1.0));
  }
  return out;
}

}  // namespace volrob

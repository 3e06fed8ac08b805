#include "volrob/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace volrob {

double dsc(const LabelVolume& pred, const LabelVolume& gt, int c, bool* both_empty) {
  require_same_shape(pred.shape, gt.shape, "pred vs gt labels");
  require(c >= 0 && c < gt.num_classes, ErrKind::InvalidArgument,
          "class " + std::to_string(c) + " outside [0," + std::to_string(gt.num_classes) + ")");
  long a = 0, b = 0, inter = 0;
  for (long v = 0; v < gt.size(); ++v) {
    const bool in_a = pred.labels[v] == c;
    const bool in_b = gt.labels[v] == c;
    a += in_a;
    b += in_b;
    inter += in_a && in_b;
  }
  if (both_empty) *both_empty = (a + b == 0);
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(a + b);
}

std::vector<std::uint8_t> class_mask(const LabelVolume& labels, int c) {
  std::vector<std::uint8_t> mask(labels.size());
  for (long v = 0; v < labels.size(); ++v) mask[v] = labels.labels[v] == c ? 1 : 0;
  return mask;
}

double hd95_sentinel(Shape3 shape) {
  return std::sqrt(static_cast<double>(shape[0]) * shape[0] +
                   static_cast<double>(shape[1]) * shape[1] +
                   static_cast<double>(shape[2]) * shape[2]);
}

double percentile(std::vector<double> values, double fraction) {
  require(!values.empty(), ErrKind::InvalidArgument, "percentile of empty list");
  std::sort(values.begin(), values.end());
  const double rank = fraction * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

namespace {

/// Face-connected boundary: a mask voxel whose 6-neighborhood leaves the
/// mask or the array.
std::vector<std::uint8_t> boundary_of(const std::vector<std::uint8_t>& mask, Shape3 s) {
  std::vector<std::uint8_t> edge(mask.size(), 0);
  for (int h = 0; h < s[0]; ++h)
    for (int w = 0; w < s[1]; ++w)
      for (int d = 0; d < s[2]; ++d) {
        const long v = flat_index(s, h, w, d);
        if (!mask[v]) continue;
        if (h == 0 || w == 0 || d == 0 || h == s[0] - 1 || w == s[1] - 1 || d == s[2] - 1) {
          edge[v] = 1;
          continue;
        }
        if (!mask[flat_index(s, h - 1, w, d)] || !mask[flat_index(s, h + 1, w, d)] ||
            !mask[flat_index(s, h, w - 1, d)] || !mask[flat_index(s, h, w + 1, d)] ||
            !mask[flat_index(s, h, w, d - 1)] || !mask[flat_index(s, h, w, d + 1)]) {
          edge[v] = 1;
        }
      }
  return edge;
}

// Large finite stand-in for "no seed on this line": keeps the parabola
// intersections finite (inf - inf would be NaN and derail the envelope).
constexpr double kEdtInf = 1e20;

/// 1D squared-distance lower envelope (Felzenszwalb-Huttenlocher).
void edt_1d(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v,
            std::vector<double>& z, int n) {
  int k = 0;
  v[0] = 0;
  z[0] = -kEdtInf;
  z[1] = kEdtInf;
  for (int q = 1; q < n; ++q) {
    double s;
    while (true) {
      s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kEdtInf;
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    d[q] = (q - v[k]) * (q - v[k]) + f[v[k]];
  }
}

/// Exact squared Euclidean distance to the nearest seed voxel.
std::vector<double> edt_squared(const std::vector<std::uint8_t>& seeds, Shape3 s) {
  const double inf = kEdtInf;
  std::vector<double> dist(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) dist[i] = seeds[i] ? 0.0 : inf;

  const int n_max = std::max({s[0], s[1], s[2]});
  std::vector<double> f(n_max), d(n_max), z(n_max + 1);
  std::vector<int> v(n_max);

  // Axis D (contiguous), then W, then H.
  for (int h = 0; h < s[0]; ++h)
    for (int w = 0; w < s[1]; ++w) {
      const long base = flat_index(s, h, w, 0);
      for (int i = 0; i < s[2]; ++i) f[i] = dist[base + i];
      edt_1d(f, d, v, z, s[2]);
      for (int i = 0; i < s[2]; ++i) dist[base + i] = d[i];
    }
  for (int h = 0; h < s[0]; ++h)
    for (int dd = 0; dd < s[2]; ++dd) {
      const long base = flat_index(s, h, 0, dd);
      const long stride = s[2];
      for (int i = 0; i < s[1]; ++i) f[i] = dist[base + i * stride];
      edt_1d(f, d, v, z, s[1]);
      for (int i = 0; i < s[1]; ++i) dist[base + i * stride] = d[i];
    }
  for (int w = 0; w < s[1]; ++w)
    for (int dd = 0; dd < s[2]; ++dd) {
      const long base = flat_index(s, 0, w, dd);
      const long stride = static_cast<long>(s[1]) * s[2];
      for (int i = 0; i < s[0]; ++i) f[i] = dist[base + i * stride];
      edt_1d(f, d, v, z, s[0]);
      for (int i = 0; i < s[0]; ++i) dist[base + i * stride] = d[i];
    }
  return dist;
}

std::vector<double> directed_distances(const std::vector<std::uint8_t>& from_boundary,
                                       const std::vector<double>& to_sq_dist) {
  std::vector<double> out;
  for (std::size_t v = 0; v < from_boundary.size(); ++v)
    if (from_boundary[v]) out.push_back(std::sqrt(to_sq_dist[v]));
  return out;
}

}  // namespace

double hd95(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt,
            Shape3 shape, bool* flagged) {
  require(static_cast<long>(pred.size()) == numel(shape) &&
              static_cast<long>(gt.size()) == numel(shape),
          ErrKind::ShapeMismatch, "mask sizes do not match shape " + shape_str(shape));
  const bool pred_empty = std::find(pred.begin(), pred.end(), 1) == pred.end();
  const bool gt_empty = std::find(gt.begin(), gt.end(), 1) == gt.end();
  if (flagged) *flagged = pred_empty || gt_empty;
  if (pred_empty || gt_empty) return hd95_sentinel(shape);

  const auto pred_edge = boundary_of(pred, shape);
  const auto gt_edge = boundary_of(gt, shape);
  const auto dist_to_gt = edt_squared(gt_edge, shape);
  const auto dist_to_pred = edt_squared(pred_edge, shape);

  const double p_ab = percentile(directed_distances(pred_edge, dist_to_gt), 0.95);
  const double p_ba = percentile(directed_distances(gt_edge, dist_to_pred), 0.95);
  return std::max(p_ab, p_ba);
}

SampleMetrics compute_sample_metrics(const LabelVolume& pred, const LabelVolume& gt) {
  require_same_shape(pred.shape, gt.shape, "pred vs gt labels");
  const int c = gt.num_classes;
  SampleMetrics m;
  m.class_dsc.assign(c, 0.0);
  m.class_hd95.assign(c, 0.0);
  m.dsc_empty.assign(c, false);
  m.hd95_flagged.assign(c, false);

  double dsc_acc = 0.0, hd_acc = 0.0;
  int dsc_n = 0, hd_n = 0;
  for (int cls = 1; cls < c; ++cls) {
    bool both_empty = false;
    m.class_dsc[cls] = dsc(pred, gt, cls, &both_empty);
    m.dsc_empty[cls] = both_empty;
    if (!both_empty) {
      dsc_acc += m.class_dsc[cls];
      ++dsc_n;
    }
    bool hd_flag = false;
    m.class_hd95[cls] = hd95(class_mask(pred, cls), class_mask(gt, cls), gt.shape, &hd_flag);
    m.hd95_flagged[cls] = hd_flag;
    if (!hd_flag) {
      hd_acc += m.class_hd95[cls];
      ++hd_n;
    }
  }
  m.mean_dsc = dsc_n > 0 ? dsc_acc / dsc_n : 1.0;
  m.hd95_defined = hd_n > 0;
  m.mean_hd95 = hd_n > 0 ? hd_acc / hd_n : hd95_sentinel(gt.shape);
  return m;
}

double asr_d(const std::vector<SampleMetrics>& clean, const std::vector<SampleMetrics>& adv) {
  require(clean.size() == adv.size(), ErrKind::ShapeMismatch,
          "clean/adversarial metric lists differ in length");
  require(!clean.empty(), ErrKind::InvalidArgument, "asr_d needs at least one sample");
  double acc = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i)
    acc += std::abs(clean[i].mean_dsc - adv[i].mean_dsc);
  return acc / static_cast<double>(clean.size());
}

AsrH asr_h(const std::vector<SampleMetrics>& clean, const std::vector<SampleMetrics>& adv) {
  require(clean.size() == adv.size(), ErrKind::ShapeMismatch,
          "clean/adversarial metric lists differ in length");
  require(!clean.empty(), ErrKind::InvalidArgument, "asr_h needs at least one sample");
  AsrH result;
  double signed_acc = 0.0, abs_acc = 0.0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (!clean[i].hd95_defined || !adv[i].hd95_defined) {
      ++result.n_excluded;
      continue;
    }
    const double change = adv[i].mean_hd95 - clean[i].mean_hd95;
    signed_acc += change;
    abs_acc += std::abs(change);
    ++result.n_used;
  }
  require(result.n_used > 0, ErrKind::UndefinedMetric,
          "asr_h undefined: every sample pair had an empty-mask sentinel");
  result.signed_change = signed_acc / result.n_used;
  result.abs_change = abs_acc / result.n_used;
  return result;
}

AsrAggregate aggregate_asr(const std::vector<SampleMetrics>& clean,
                           const std::vector<SampleMetrics>& adv) {
  AsrAggregate agg;
  agg.asr_d = asr_d(clean, adv);
  const AsrH h = asr_h(clean, adv);
  agg.asr_h_signed = h.signed_change;
  agg.asr_h_abs = h.abs_change;
  agg.n_samples = static_cast<int>(clean.size());
  agg.n_hd95_excluded = h.n_excluded;
  return agg;
}

PerturbationStats perturbation_stats(const Volume& x, const Volume& x_adv) {
  require_same_shape(x.shape, x_adv.shape, "clean vs adversarial volume");
  PerturbationStats s;
  double sq = 0.0, abs_acc = 0.0;
  for (long i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x_adv.data[i]) - static_cast<double>(x.data[i]);
    s.linf = std::max(s.linf, std::abs(d));
    sq += d * d;
    abs_acc += std::abs(d);
  }
  s.l2 = std::sqrt(sq);
  s.mean_abs = abs_acc / static_cast<double>(x.size());
  return s;
}

}  // namespace volrob

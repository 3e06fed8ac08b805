#include "volrob/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "volrob/rng.hpp"

namespace volrob {

void PhantomSpec::validate() const {
  require(num_classes >= 2, ErrKind::InvalidArgument,
          "phantom needs num_classes >= 2, got " + std::to_string(num_classes));
  for (int i = 0; i < 3; ++i) {
    require(shape[i] >= 8, ErrKind::InvalidArgument,
            "phantom shape must be >= 8 per axis, got " + shape_str(shape));
  }
  require(min_blobs >= 1 && max_blobs >= min_blobs, ErrKind::InvalidArgument,
          "blob count range must satisfy 1 <= min <= max");
  require(noise_amplitude >= 0.0, ErrKind::InvalidArgument, "noise amplitude must be >= 0");
}

double phantom_base_intensity(int c, int num_classes) {
  return 0.1 + 0.8 * static_cast<double>(c) / static_cast<double>(num_classes - 1);
}

namespace {

struct Blob {
  double ch, cw, cd;  // center
  double rh, rw, rd;  // semi-axes, >= 1.5 voxels
};

Blob sample_blob(Rng& rng, const Shape3& shape) {
  Blob b;
  b.rh = std::max(1.5, rng.uniform(0.10, 0.25) * shape[0]);
  b.rw = std::max(1.5, rng.uniform(0.10, 0.25) * shape[1]);
  b.rd = std::max(1.5, rng.uniform(0.10, 0.25) * shape[2]);
  b.ch = rng.uniform(b.rh * 0.5, shape[0] - 1 - b.rh * 0.5);
  b.cw = rng.uniform(b.rw * 0.5, shape[1] - 1 - b.rw * 0.5);
  b.cd = rng.uniform(b.rd * 0.5, shape[2] - 1 - b.rd * 0.5);
  return b;
}

void paint_blob(const Blob& b, std::int32_t cls, LabelVolume& labels) {
  const Shape3& s = labels.shape;
  const int h0 = std::max(0, static_cast<int>(std::floor(b.ch - b.rh)));
  const int h1 = std::min(s[0] - 1, static_cast<int>(std::ceil(b.ch + b.rh)));
  const int w0 = std::max(0, static_cast<int>(std::floor(b.cw - b.rw)));
  const int w1 = std::min(s[1] - 1, static_cast<int>(std::ceil(b.cw + b.rw)));
  const int d0 = std::max(0, static_cast<int>(std::floor(b.cd - b.rd)));
  const int d1 = std::min(s[2] - 1, static_cast<int>(std::ceil(b.cd + b.rd)));
  for (int h = h0; h <= h1; ++h) {
    const double dh = (h - b.ch) / b.rh;
    for (int w = w0; w <= w1; ++w) {
      const double dw = (w - b.cw) / b.rw;
      for (int d = d0; d <= d1; ++d) {
        const double dd = (d - b.cd) / b.rd;
        if (dh * dh + dw * dw + dd * dd <= 1.0) {
          std::int32_t& l = labels.at(h, w, d);
          if (l == 0) l = cls;  // earlier classes keep priority
        }
      }
    }
  }
}

}  // namespace

std::pair<Volume, LabelVolume> generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, "phantom"));
  LabelVolume labels(spec.shape, spec.num_classes);

  for (int cls = 1; cls < spec.num_classes; ++cls) {
    const int count = static_cast<int>(rng.uniform_int(spec.min_blobs, spec.max_blobs));
    for (int i = 0; i < count; ++i) {
      Blob b = sample_blob(rng, spec.shape);
      if (i == 0) {
        // The first blob of each class must land its center on background so
        // the class is guaranteed to appear. Bounded deterministic re-draws,
        // then a linear scan as the last resort.
        for (int attempt = 0; attempt < 64; ++attempt) {
          const int ch = static_cast<int>(std::lround(b.ch));
          const int cw = static_cast<int>(std::lround(b.cw));
          const int cd = static_cast<int>(std::lround(b.cd));
          if (labels.at(ch, cw, cd) == 0) break;
          b = sample_blob(rng, spec.shape);
        }
        const int ch = static_cast<int>(std::lround(b.ch));
        const int cw = static_cast<int>(std::lround(b.cw));
        const int cd = static_cast<int>(std::lround(b.cd));
        if (labels.at(ch, cw, cd) != 0) {
          for (long v = 0; v < labels.size(); ++v) {
            if (labels.labels[v] == 0) {
              const int h = static_cast<int>(v / (spec.shape[1] * spec.shape[2]));
              const int w = static_cast<int>((v / spec.shape[2]) % spec.shape[1]);
              const int d = static_cast<int>(v % spec.shape[2]);
              b.ch = h;
              b.cw = w;
              b.cd = d;
              break;
            }
          }
        }
        labels.at(static_cast<int>(std::lround(b.ch)), static_cast<int>(std::lround(b.cw)),
                  static_cast<int>(std::lround(b.cd))) = cls;
      }
      paint_blob(b, cls, labels);
    }
  }

  Volume image(spec.shape);
  for (long v = 0; v < image.size(); ++v) {
    const double base = phantom_base_intensity(labels.labels[v], spec.num_classes);
    const double noise =
        spec.noise_amplitude > 0.0 ? rng.uniform(-spec.noise_amplitude, spec.noise_amplitude) : 0.0;
    image.data[v] = static_cast<float>(std::clamp(base + noise, 0.0, 1.0));
  }
  return {std::move(image), std::move(labels)};
}

}  // namespace volrob

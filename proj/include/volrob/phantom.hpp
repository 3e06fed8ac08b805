#pragma once

#include <cstdint>
#include <utility>

#include "volrob/volume.hpp"

namespace volrob {

/// Synthetic labelled-volume generator: random ellipsoidal blobs per class on
/// a background, class-specific base intensities plus bounded uniform noise.
/// Identical specs produce bit-identical output.
struct PhantomSpec {
  std::uint64_t seed = 0;
  Shape3 shape{32, 32, 32};
  int num_classes = 3;
  int min_blobs = 2;
  int max_blobs = 4;
  double noise_amplitude = 0.05;

  void validate() const;
};

/// Base intensity assigned to voxels of class `c`; evenly spaced in [0.1, 0.9].
double phantom_base_intensity(int c, int num_classes);

/// Generates one (image, labels) pair. Every class in [0, num_classes) is
/// present in the label field; intensities stay in [0,1].
std::pair<Volume, LabelVolume> generate_phantom(const PhantomSpec& spec);

}  // namespace volrob

#pragma once

#include <string>

#include "volrob/volume.hpp"

namespace volrob {

/// How float images are mapped into [0,1] on load.
///   MinMax: (v - min) / (max - min); constant images become all 0.5.
///   None:   values are trusted to already be intensities; clamped to [0,1].
enum class NormalizationRule { MinMax, None };

/// Supported subset: single-file uncompressed NIfTI-1, little endian,
/// int16 (labels) or float32 (images), orientation ignored (unit voxels).
struct NiftiData {
  bool is_labels = false;
  Volume image;
  LabelVolume labels;
};

NiftiData read_nifti(const std::string& path, NormalizationRule rule = NormalizationRule::MinMax);
Volume read_nifti_volume(const std::string& path,
                         NormalizationRule rule = NormalizationRule::MinMax);
LabelVolume read_nifti_labels(const std::string& path);

/// Minimal valid NIfTI-1: 348-byte header, vox_offset 352, identity
/// orientation, float32 payload for volumes / int16 for labels.
void write_nifti(const Volume& volume, const std::string& path);
void write_nifti(const LabelVolume& labels, const std::string& path);

/// Native intermediate format: raw little-endian blob next to a JSON sidecar
/// (`<path>.json`) carrying shape, dtype and seed lineage.
void write_raw(const Volume& volume, const std::string& path, const std::string& lineage = "");
void write_raw(const LabelVolume& labels, const std::string& path, const std::string& lineage = "");
Volume read_raw_volume(const std::string& path);
LabelVolume read_raw_labels(const std::string& path);

}  // namespace volrob

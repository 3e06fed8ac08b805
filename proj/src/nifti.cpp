#include "volrob/nifti.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace volrob {

static_assert(std::endian::native == std::endian::little,
              "NIfTI subset reader/writer assumes a little-endian host");

namespace {

constexpr int kHeaderSize = 348;
constexpr float kVoxOffset = 352.0f;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtFloat32 = 16;

template <typename T>
void poke(std::vector<char>& buf, std::size_t offset, T value) {
  std::memcpy(buf.data() + offset, &value, sizeof(T));
}

template <typename T>
T peek(const std::vector<char>& buf, std::size_t offset) {
  T value;
  std::memcpy(&value, buf.data() + offset, sizeof(T));
  return value;
}

std::vector<char> build_header(const Shape3& shape, std::int16_t datatype, std::int16_t bitpix) {
  std::vector<char> h(kHeaderSize, 0);
  poke<std::int32_t>(h, 0, kHeaderSize);
  poke<char>(h, 38, 'r');  // regular
  // dim[0] = 3; the fastest-varying NIfTI axis is our contiguous D axis.
  poke<std::int16_t>(h, 40, 3);
  poke<std::int16_t>(h, 42, static_cast<std::int16_t>(shape[2]));
  poke<std::int16_t>(h, 44, static_cast<std::int16_t>(shape[1]));
  poke<std::int16_t>(h, 46, static_cast<std::int16_t>(shape[0]));
  for (int i = 4; i <= 7; ++i) poke<std::int16_t>(h, 40 + 2 * i, 1);
  poke<std::int16_t>(h, 70, datatype);
  poke<std::int16_t>(h, 72, bitpix);
  poke<float>(h, 76, 1.0f);  // pixdim[0] (qfac)
  poke<float>(h, 80, 1.0f);
  poke<float>(h, 84, 1.0f);
  poke<float>(h, 88, 1.0f);
  poke<float>(h, 108, kVoxOffset);
  poke<float>(h, 112, 1.0f);  // scl_slope
  poke<float>(h, 116, 0.0f);  // scl_inter
  poke<std::int16_t>(h, 252, 0);  // qform_code
  poke<std::int16_t>(h, 254, 1);  // sform_code: identity affine below
  poke<float>(h, 280, 1.0f);
  poke<float>(h, 300, 1.0f);
  poke<float>(h, 320, 1.0f);
  h[344] = 'n';
  h[345] = '+';
  h[346] = '1';
  h[347] = '\0';
  return h;
}

void write_payload(const std::string& path, const std::vector<char>& header, const void* data,
                   std::size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrKind::IoFailure, "cannot open '" + path + "' for writing");
  out.write(header.data(), header.size());
  const char pad[4] = {0, 0, 0, 0};  // extension indicator
  out.write(pad, 4);
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  require(out.good(), ErrKind::IoFailure, "write failed for '" + path + "'");
}

}  // namespace

void write_nifti(const Volume& volume, const std::string& path) {
  volume.validate();
  const auto header = build_header(volume.shape, kDtFloat32, 32);
  write_payload(path, header, volume.data.data(), volume.data.size() * sizeof(float));
}

void write_nifti(const LabelVolume& labels, const std::string& path) {
  labels.validate();
  require(labels.num_classes <= 32768, ErrKind::UnsupportedDatatype,
          "labels exceed int16 range");
  const auto header = build_header(labels.shape, kDtInt16, 16);
  std::vector<std::int16_t> narrow(labels.labels.begin(), labels.labels.end());
  write_payload(path, header, narrow.data(), narrow.size() * sizeof(std::int16_t));
}

NiftiData read_nifti(const std::string& path, NormalizationRule rule) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrKind::MissingFile, "cannot open '" + path + "'");
  std::vector<char> h(kHeaderSize);
  in.read(h.data(), kHeaderSize);
  require(in.gcount() == kHeaderSize, ErrKind::TruncatedFile,
          "'" + path + "' is shorter than a NIfTI-1 header");

  require(peek<std::int32_t>(h, 0) == kHeaderSize, ErrKind::UnsupportedFormat,
          "'" + path + "': sizeof_hdr != 348 (byte-swapped or not NIfTI-1)");
  const char* magic = h.data() + 344;
  if (std::strncmp(magic, "ni1", 3) == 0) {
    throw Error(ErrKind::UnsupportedFormat,
                "'" + path + "' uses the two-file NIfTI form (magic ni1)");
  }
  require(std::strncmp(magic, "n+1", 3) == 0, ErrKind::BadMagic,
          "'" + path + "' has no NIfTI-1 magic");

  const std::int16_t ndim = peek<std::int16_t>(h, 40);
  require(ndim == 3 || ndim == 4, ErrKind::UnsupportedFormat,
          "'" + path + "': dim[0] must be 3 or 4, got " + std::to_string(ndim));
  Shape3 shape{peek<std::int16_t>(h, 46), peek<std::int16_t>(h, 44), peek<std::int16_t>(h, 42)};
  require(shape[0] > 0 && shape[1] > 0 && shape[2] > 0, ErrKind::UnsupportedFormat,
          "'" + path + "' has non-positive dimensions");
  if (ndim == 4) {
    require(peek<std::int16_t>(h, 48) == 1, ErrKind::UnsupportedFormat,
            "'" + path + "': trailing dims must have length 1");
  }

  const std::int16_t datatype = peek<std::int16_t>(h, 70);
  require(datatype == kDtInt16 || datatype == kDtFloat32, ErrKind::UnsupportedDatatype,
          "'" + path + "': datatype code " + std::to_string(datatype) +
              " not supported (int16 and float32 only)");

  const float vox_offset = peek<float>(h, 108);
  require(vox_offset >= kHeaderSize, ErrKind::UnsupportedFormat,
          "'" + path + "' has vox_offset before the header end");
  float slope = peek<float>(h, 112);
  const float inter = peek<float>(h, 116);
  if (slope == 0.0f) slope = 1.0f;

  in.seekg(static_cast<std::streamoff>(vox_offset), std::ios::beg);
  const long n = numel(shape);
  NiftiData out;
  if (datatype == kDtFloat32) {
    std::vector<float> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), n * static_cast<long>(sizeof(float)));
    require(in.gcount() == n * static_cast<long>(sizeof(float)), ErrKind::TruncatedFile,
            "'" + path + "' payload is truncated");
    out.is_labels = false;
    out.image.shape = shape;
    out.image.data.resize(n);
    double mn = std::numeric_limits<double>::infinity(), mx = -mn;
    std::vector<double> scaled(n);
    for (long i = 0; i < n; ++i) {
      scaled[i] = static_cast<double>(raw[i]) * slope + inter;
      require(std::isfinite(scaled[i]), ErrKind::NonFiniteInput,
              "'" + path + "' contains a non-finite intensity");
      mn = std::min(mn, scaled[i]);
      mx = std::max(mx, scaled[i]);
    }
    if (rule == NormalizationRule::MinMax) {
      if (mx > mn) {
        for (long i = 0; i < n; ++i)
          out.image.data[i] = static_cast<float>((scaled[i] - mn) / (mx - mn));
      } else {
        std::fill(out.image.data.begin(), out.image.data.end(), 0.5f);
      }
    } else {
      for (long i = 0; i < n; ++i)
        out.image.data[i] = static_cast<float>(std::clamp(scaled[i], 0.0, 1.0));
    }
  } else {
    std::vector<std::int16_t> raw(n);
    in.read(reinterpret_cast<char*>(raw.data()), n * static_cast<long>(sizeof(std::int16_t)));
    require(in.gcount() == n * static_cast<long>(sizeof(std::int16_t)), ErrKind::TruncatedFile,
            "'" + path + "' payload is truncated");
    out.is_labels = true;
    out.labels.shape = shape;
    out.labels.labels.assign(raw.begin(), raw.end());
    std::int32_t max_label = 0;
    for (const std::int32_t l : out.labels.labels) {
      require(l >= 0, ErrKind::InvalidArgument, "'" + path + "' contains a negative label");
      max_label = std::max(max_label, l);
    }
    out.labels.num_classes = std::max(2, max_label + 1);
  }
  return out;
}

Volume read_nifti_volume(const std::string& path, NormalizationRule rule) {
  NiftiData d = read_nifti(path, rule);
  require(!d.is_labels, ErrKind::UnsupportedDatatype,
          "'" + path + "' holds integer labels, expected a float image");
  return std::move(d.image);
}

LabelVolume read_nifti_labels(const std::string& path) {
  NiftiData d = read_nifti(path);
  require(d.is_labels, ErrKind::UnsupportedDatatype,
          "'" + path + "' holds a float image, expected integer labels");
  return std::move(d.labels);
}

namespace {

void write_sidecar(const std::string& path, const Shape3& shape, const std::string& dtype,
                   const std::string& kind, const std::string& lineage, int num_classes) {
  nlohmann::json j;
  j["shape"] = {shape[0], shape[1], shape[2]};
  j["dtype"] = dtype;
  j["kind"] = kind;
  if (!lineage.empty()) j["seed_lineage"] = lineage;
  if (num_classes > 0) j["num_classes"] = num_classes;
  std::ofstream out(path + ".json");
  require(out.good(), ErrKind::IoFailure, "cannot write sidecar '" + path + ".json'");
  out << j.dump(2) << '\n';
}

nlohmann::json read_sidecar(const std::string& path) {
  std::ifstream in(path + ".json");
  require(in.good(), ErrKind::MissingFile, "missing sidecar '" + path + ".json'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrKind::UnsupportedFormat, "bad sidecar '" + path + ".json': " + e.what());
  }
  return j;
}

}  // namespace

void write_raw(const Volume& volume, const std::string& path, const std::string& lineage) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrKind::IoFailure, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(volume.data.data()),
            static_cast<std::streamsize>(volume.data.size() * sizeof(float)));
  require(out.good(), ErrKind::IoFailure, "write failed for '" + path + "'");
  write_sidecar(path, volume.shape, "float32", "volume", lineage, 0);
}

void write_raw(const LabelVolume& labels, const std::string& path, const std::string& lineage) {
  std::vector<std::int16_t> narrow(labels.labels.begin(), labels.labels.end());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrKind::IoFailure, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(narrow.data()),
            static_cast<std::streamsize>(narrow.size() * sizeof(std::int16_t)));
  require(out.good(), ErrKind::IoFailure, "write failed for '" + path + "'");
  write_sidecar(path, labels.shape, "int16", "labels", lineage, labels.num_classes);
}

Volume read_raw_volume(const std::string& path) {
  const nlohmann::json j = read_sidecar(path);
  require(j.value("dtype", "") == "float32", ErrKind::UnsupportedDatatype,
          "'" + path + "' sidecar dtype is not float32");
  Shape3 shape{j.at("shape").at(0).get<int>(), j.at("shape").at(1).get<int>(),
               j.at("shape").at(2).get<int>()};
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrKind::MissingFile, "cannot open '" + path + "'");
  Volume v(shape);
  in.read(reinterpret_cast<char*>(v.data.data()),
          static_cast<std::streamsize>(v.data.size() * sizeof(float)));
  require(in.gcount() == static_cast<std::streamsize>(v.data.size() * sizeof(float)),
          ErrKind::TruncatedFile, "'" + path + "' payload is truncated");
  return v;
}

LabelVolume read_raw_labels(const std::string& path) {
  const nlohmann::json j = read_sidecar(path);
  require(j.value("dtype", "") == "int16", ErrKind::UnsupportedDatatype,
          "'" + path + "' sidecar dtype is not int16");
  Shape3 shape{j.at("shape").at(0).get<int>(), j.at("shape").at(1).get<int>(),
               j.at("shape").at(2).get<int>()};
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrKind::MissingFile, "cannot open '" + path + "'");
  std::vector<std::int16_t> narrow(numel(shape));
  in.read(reinterpret_cast<char*>(narrow.data()),
          static_cast<std::streamsize>(narrow.size() * sizeof(std::int16_t)));
  require(in.gcount() == static_cast<std::streamsize>(narrow.size() * sizeof(std::int16_t)),
          ErrKind::TruncatedFile, "'" + path + "' payload is truncated");
  LabelVolume out(shape, std::max(2, j.value("num_classes", 2)));
  out.labels.assign(narrow.begin(), narrow.end());
  return out;
}

}  // namespace volrob

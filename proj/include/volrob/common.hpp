#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace volrob {

/// Machine-readable failure categories; every Error carries one plus the
/// offending path/flag/axis in its message.
enum class ErrKind {
  ShapeMismatch,
  InvalidArgument,
  UnknownArch,
  UnsupportedModel,
  UnsupportedFormat,
  UnsupportedDatatype,
  BadMagic,
  TruncatedFile,
  IoFailure,
  MissingFile,
  UndefinedMetric,
  NonFiniteLoss,
  NonFiniteInput,
  ConfigError,
};

const char* to_string(ErrKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrKind kind() const { return kind_; }

 private:
  ErrKind kind_;
};

/// Spatial extent (H, W, D). Row-major layout, D contiguous.
using Shape3 = std::array<int, 3>;

inline long numel(const Shape3& s) { return static_cast<long>(s[0]) * s[1] * s[2]; }

inline long flat_index(const Shape3& s, int h, int w, int d) {
  return (static_cast<long>(h) * s[1] + w) * s[2] + d;
}

inline std::string shape_str(const Shape3& s) {
  return "(" + std::to_string(s[0]) + "," + std::to_string(s[1]) + "," + std::to_string(s[2]) + ")";
}

void require(bool cond, ErrKind kind, const std::string& message);

/// Axis-by-axis shape check; the error names the first offending axis.
void require_same_shape(const Shape3& a, const Shape3& b, const std::string& what);

}  // namespace volrob

#include "volrob/common.hpp"

namespace volrob {

const char* to_string(ErrKind kind) {
  switch (kind) {
    case ErrKind::ShapeMismatch: return "shape-mismatch";
    case ErrKind::InvalidArgument: return "invalid-argument";
    case ErrKind::UnknownArch: return "unknown-arch";
    case ErrKind::UnsupportedModel: return "unsupported-model";
    case ErrKind::UnsupportedFormat: return "unsupported-format";
    case ErrKind::UnsupportedDatatype: return "unsupported-datatype";
    case ErrKind::BadMagic: return "bad-magic";
    case ErrKind::TruncatedFile: return "truncated-file";
    case ErrKind::IoFailure: return "io-failure";
    case ErrKind::MissingFile: return "missing-file";
    case ErrKind::UndefinedMetric: return "undefined-metric";
    case ErrKind::NonFiniteLoss: return "non-finite-loss";
    case ErrKind::NonFiniteInput: return "non-finite-input";
    case ErrKind::ConfigError: return "config-error";
  }
  return "unknown";
}

void require(bool cond, ErrKind kind, const std::string& message) {
  if (!cond) throw Error(kind, message);
}

void require_same_shape(const Shape3& a, const Shape3& b, const std::string& what) {
  static const char* axis_name[3] = {"H", "W", "D"};
  for (int i = 0; i < 3; ++i) {
    if (a[i] != b[i]) {
      throw Error(ErrKind::ShapeMismatch, what + ": axis " + axis_name[i] + " differs, " +
                                              std::to_string(a[i]) + " vs " + std::to_string(b[i]));
    }
  }
}

}  // namespace volrob

#pragma once

#include <stdexcept>
#include <string>

namespace lesionseg {

// Malformed or inconsistent data. Distinguishes from usage errors so the CLI
// can map it onto its own exit code.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FormatErrorKind {
  bad_magic,
  bad_maxval,
  bad_header,
  zero_dimension,
  truncated,
  bad_planes,
  bad_version,
  length_mismatch,
  non_finite,
};

inline const char* to_string(FormatErrorKind kind) {
  switch (kind) {
    case FormatErrorKind::bad_magic: return "bad magic";
    case FormatErrorKind::bad_maxval: return "unsupported maxval";
    case FormatErrorKind::bad_header: return "malformed header";
    case FormatErrorKind::zero_dimension: return "zero dimension";
    case FormatErrorKind::truncated: return "truncated payload";
    case FormatErrorKind::bad_planes: return "unsupported plane count";
    case FormatErrorKind::bad_version: return "unsupported version";
    case FormatErrorKind::length_mismatch: return "length mismatch";
    case FormatErrorKind::non_finite: return "non-finite value";
  }
  return "unknown";
}

class FormatError : public DataError {
 public:
  FormatError(FormatErrorKind kind, const std::string& what)
      : DataError(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  FormatErrorKind kind() const noexcept { return kind_; }

 private:
  FormatErrorKind kind_;
};

// Raised when a function argument violates its precondition.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace lesionseg

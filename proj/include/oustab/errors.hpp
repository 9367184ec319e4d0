#pragma once

#include <stdexcept>
#include <string>

namespace oustab {

// Bad argument or malformed configuration (CLI exit code 2).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Operation requested on a model configuration it does not support,
// e.g. a closed-form covariance on a non-isotropic noise model.
class UnsupportedConfigError : public std::runtime_error {
 public:
  explicit UnsupportedConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite value produced where a finite one is required.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed on-disk data (manifest, payload, report).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem failure, reported with path context (CLI exit code 4).
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace oustab

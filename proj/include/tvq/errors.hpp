#pragma once

#include <stdexcept>
#include <string>

namespace tvq {

/// Shape or length disagreement between operands.
class DimensionError : public std::runtime_error {
 public:
  explicit DimensionError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed or inconsistent file content.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid argument value (out-of-range K, bad cluster count, ...).
class ParameterError : public std::runtime_error {
 public:
  explicit ParameterError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Non-finite values or diverging optimization.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Artifacts that do not belong together (hash mismatch between files).
class CompatibilityError : public std::runtime_error {
 public:
  explicit CompatibilityError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace tvq

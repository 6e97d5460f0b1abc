#pragma once

#include <stdexcept>
#include <string>

namespace tclust {

/// Bad caller input: shapes, modes, configuration values, file contents.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

class DimensionError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class InvalidModeError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

class FormatError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

/// The computation itself broke down (non-finite values, singular systems).
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class RankDeficientError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

namespace detail {

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

} // namespace detail
} // namespace tclust

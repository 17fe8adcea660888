#pragma once

#include <stdexcept>
#include <string>

namespace vbspca {

/// Bad user input: files, schemas, dimensions, tags, option values.
class InputError : public std::runtime_error {
 public:
  explicit InputError(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure inside a fit or statistic (non-PD covariance,
/// non-finite intermediate, degenerate data).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace vbspca

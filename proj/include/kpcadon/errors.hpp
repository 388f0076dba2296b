#pragma once

#include <stdexcept>
#include <string>

namespace kpcadon {

// Invalid argument shapes, out-of-range parameters, inconsistent configs.
// std::invalid_argument is used directly for those. The types below mark
// failures that callers may want to distinguish.

/// Numerical failure (no convergence, non-SPD pivot, NaN loss).
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

/// File format / persistence failure (bad magic, truncation, shape mismatch).
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kpcadon

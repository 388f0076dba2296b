#pragma once

#include <span>
#include <stdexcept>
#include <string>

#include "kpcadon/matrix.hpp"

namespace kpcadon {

/// Raise to a non-negative integer power by repeated multiplication, so that
/// k(x, y) is exactly symmetric in its arguments and bit-reproducible across
/// libm implementations.
inline double pow_int(double base, int exponent) {
  if (exponent < 0) {
    throw std::invalid_argument("pow_int: negative exponent " +
                                std::to_string(exponent));
  }
  double result = 1.0;
  for (int i = 0; i < exponent; ++i) result *= base;
  return result;
}

/// Polynomial kernel k(x, y) = (gamma * <x, y> + offset)^degree.
/// degree == 1, offset == 0 recovers a scaled linear kernel.
struct PolynomialKernel {
  double gamma = 1.0;
  double offset = 0.0;
  int degree = 1;

  PolynomialKernel() = default;
  PolynomialKernel(double gamma_, double offset_, int degree_)
      : gamma(gamma_), offset(offset_), degree(degree_) {
    validate();
  }

  void validate() const {
    if (!(gamma > 0.0)) {
      throw std::invalid_argument("PolynomialKernel: gamma must be > 0, got " +
                                  std::to_string(gamma));
    }
    if (offset < 0.0) {
      throw std::invalid_argument("PolynomialKernel: offset must be >= 0, got " +
                                  std::to_string(offset));
    }
    if (degree < 1) {
      throw std::invalid_argument("PolynomialKernel: degree must be >= 1, got " +
                                  std::to_string(degree));
    }
  }

  bool is_linear() const { return degree == 1 && offset == 0.0; }

  double operator()(std::span<const double> x, std::span<const double> y) const {
    if (x.size() != y.size()) {
      throw std::invalid_argument("PolynomialKernel: argument lengths " +
                                  std::to_string(x.size()) + " and " +
                                  std::to_string(y.size()) + " differ");
    }
    return pow_int(gamma * dot(x, y) + offset, degree);
  }
};

/// Gram matrix K[i][j] = k(x_i, x_j) for the rows of X. The upper triangle is
/// computed and mirrored so the result is exactly symmetric.
inline Matrix gram(const PolynomialKernel& kernel, const Matrix& x) {
  Matrix k(x.rows(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = i; j < x.rows(); ++j) {
      const double v = kernel(x.row(i), x.row(j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

/// Cross-Gram matrix K[i][j] = k(x_i, y_j) for rows x_i of X and y_j of Y.
inline Matrix cross_gram(const PolynomialKernel& kernel, const Matrix& x,
                         const Matrix& y) {
  if (x.cols() != y.cols()) {
    throw std::invalid_argument("cross_gram: feature dimensions " +
                                std::to_string(x.cols()) + " and " +
                                std::to_string(y.cols()) + " differ");
  }
  Matrix k(x.rows(), y.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < y.rows(); ++j) {
      k(i, j) = kernel(x.row(i), y.row(j));
    }
  }
  return k;
}

}  // namespace kpcadon

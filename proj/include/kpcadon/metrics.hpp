#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kpcadon/matrix.hpp"

namespace kpcadon {

/// Mean and population standard deviation (divide by N).
struct MeanStd {
  double mean = 0.0;
  double std_dev = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("mean_std: empty sample");
  MeanStd s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  double acc = 0.0;
  for (double v : values) {
    const double d = v - s.mean;
    acc += d * d;
  }
  s.std_dev = std::sqrt(acc / static_cast<double>(values.size()));
  return s;
}

/// Relative L2 error of one prediction row against its reference row:
/// ||pred - ref|| / ||ref||. A zero-norm reference with a nonzero prediction
/// is reported as infinity; zero against zero is zero.
inline double relative_l2(std::span<const double> pred,
                          std::span<const double> ref) {
  if (pred.size() != ref.size()) {
    throw std::invalid_argument("relative_l2: lengths " +
                                std::to_string(pred.size()) + " and " +
                                std::to_string(ref.size()) + " differ");
  }
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - ref[i];
    num += d * d;
    den += ref[i] * ref[i];
  }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

/// Primary accuracy metric: relative L2 error per sample, averaged over the
/// rows of the matrices.
inline double mean_relative_l2(const Matrix& pred, const Matrix& ref) {
  if (pred.rows() != ref.rows() || pred.cols() != ref.cols()) {
    throw std::invalid_argument("mean_relative_l2: shape mismatch");
  }
  if (pred.rows() == 0) throw std::invalid_argument("mean_relative_l2: empty");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.rows(); ++i) {
    acc += relative_l2(pred.row(i), ref.row(i));
  }
  return acc / static_cast<double>(pred.rows());
}

/// Alternative convention: relative L2 error of the flattened prediction
/// matrix against the flattened reference. Reported alongside the per-sample
/// mean where both are of interest.
inline double flattened_relative_l2(const Matrix& pred, const Matrix& ref) {
  if (pred.rows() != ref.rows() || pred.cols() != ref.cols()) {
    throw std::invalid_argument("flattened_relative_l2: shape mismatch");
  }
  return relative_l2(std::span<const double>(pred.data()),
                     std::span<const double>(ref.data()));
}

}  // namespace kpcadon

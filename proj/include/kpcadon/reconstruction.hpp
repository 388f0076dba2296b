#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kpcadon/kernels.hpp"
#include "kpcadon/linalg.hpp"
#include "kpcadon/matrix.hpp"

namespace kpcadon {

/// Kernel ridge regression from latent coordinates back to output snapshots.
/// Predictions are kernel expansions over the training latents:
///
///   v(z) = sum_i coefficients[i] * k(z, train_latents_i) + mean
///
/// with coefficients = (K + lambda I)^{-1} (V - 1 mean^T). The mean snapshot
/// is removed before solving so the expansion only has to explain deviations.
struct RidgeModel {
  PolynomialKernel kernel;
  double lambda = 0.0;
  Matrix train_latents;  // N x p
  Matrix coefficients;   // N x M
  std::vector<double> mean;  // length M
};

inline RidgeModel fit_ridge(const PolynomialKernel& kernel,
                            const Matrix& latents, const Matrix& snapshots,
                            double lambda) {
  if (latents.rows() != snapshots.rows()) {
    throw std::invalid_argument("fit_ridge: " + std::to_string(latents.rows()) +
                                " latent rows vs " +
                                std::to_string(snapshots.rows()) +
                                " snapshot rows");
  }
  if (latents.rows() == 0) throw std::invalid_argument("fit_ridge: no samples");
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("fit_ridge: lambda must be > 0, got " +
                                std::to_string(lambda));
  }

  RidgeModel out;
  out.kernel = kernel;
  out.lambda = lambda;
  out.train_latents = latents;
  out.mean = column_means(snapshots);

  Matrix rhs = snapshots;
  for (std::size_t i = 0; i < rhs.rows(); ++i) {
    double* row = &rhs(i, 0);
    for (std::size_t j = 0; j < rhs.cols(); ++j) row[j] -= out.mean[j];
  }

  Matrix k = gram(kernel, latents);
  for (std::size_t i = 0; i < k.rows(); ++i) k(i, i) += lambda;
  out.coefficients = solve_spd(k, rhs);
  return out;
}

/// Predict snapshots for new latent rows (Q x p) -> Q x M.
inline Matrix ridge_predict(const RidgeModel& model, const Matrix& latents) {
  if (latents.cols() != model.train_latents.cols()) {
    throw std::invalid_argument("ridge_predict: latent dimension " +
                                std::to_string(latents.cols()) +
                                " does not match fitted dimension " +
                                std::to_string(model.train_latents.cols()));
  }
  const Matrix k = cross_gram(model.kernel, latents, model.train_latents);
  Matrix v = matmul(k, model.coefficients);
  for (std::size_t i = 0; i < v.rows(); ++i) {
    double* row = &v(i, 0);
    for (std::size_t j = 0; j < v.cols(); ++j) row[j] += model.mean[j];
  }
  return v;
}

}  // namespace kpcadon

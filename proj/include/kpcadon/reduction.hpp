#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "kpcadon/errors.hpp"
#include "kpcadon/kernels.hpp"
#include "kpcadon/linalg.hpp"
#include "kpcadon/matrix.hpp"

namespace kpcadon {

/// Shared rank cutoff: spectrum entries at or below 1e-10 times the largest
/// positive entry count as numerically zero.
inline double rank_tolerance(const std::vector<double>& spectrum) {
  double top = 0.0;
  for (double v : spectrum) top = std::max(top, v);
  return 1e-10 * top;
}

/// Fraction of total (positive) spectral mass captured by the first p modes.
inline double captured_fraction(const std::vector<double>& spectrum,
                                std::size_t p) {
  double total = 0.0;
  double head = 0.0;
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    const double v = std::max(spectrum[k], 0.0);
    total += v;
    if (k < p) head += v;
  }
  return total > 0.0 ? head / total : 0.0;
}

// ---------------------------------------------------------------------------
// POD (proper orthogonal decomposition) by the method of snapshots.
// ---------------------------------------------------------------------------

/// Truncated POD basis of a snapshot set. `mean` is subtracted before
/// projection; `basis` columns are orthonormal modes in snapshot space.
struct PodBasis {
  std::vector<double> mean;             // length M (snapshot dimension)
  Matrix basis;                         // M x p, orthonormal columns
  std::vector<double> singular_values;  // length p, descending
  std::vector<double> spectrum;         // all N Gram eigenvalues, descending
};

/// Fit a rank-p POD basis from the rows of `snapshots` (N x M). Works through
/// the N x N Gram matrix of centered snapshots, so the cost is governed by the
/// sample count rather than the snapshot dimension. When the centered data has
/// rank below p the basis is completed with orthonormalized canonical
/// directions (deterministically), so degenerate inputs still produce a valid
/// orthonormal basis.
inline PodBasis fit_pod(const Matrix& snapshots, std::size_t p) {
  const std::size_t n = snapshots.rows();
  const std::size_t m = snapshots.cols();
  if (n == 0) throw std::invalid_argument("fit_pod: no snapshots");
  if (p == 0 || p > m) {
    throw std::invalid_argument("fit_pod: p must be in [1, " +
                                std::to_string(m) + "], got " +
                                std::to_string(p));
  }

  PodBasis out;
  out.mean = column_means(snapshots);
  Matrix centered = snapshots;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = &centered(i, 0);
    for (std::size_t j = 0; j < m; ++j) row[j] -= out.mean[j];
  }

  const Matrix g = matmul_a_bt(centered, centered);
  const EigenDecomposition eig = eigh(g);
  out.spectrum = eig.eigenvalues;

  const double tol = rank_tolerance(out.spectrum);
  out.basis = Matrix(m, p);
  out.singular_values.assign(p, 0.0);
  std::size_t filled = 0;
  for (std::size_t k = 0; k < n && filled < p; ++k) {
    if (eig.eigenvalues[k] <= tol) break;
    const double sigma = std::sqrt(eig.eigenvalues[k]);
    // Mode = centered^T u_k / sigma.
    for (std::size_t i = 0; i < n; ++i) {
      const double w = eig.eigenvectors(i, k) / sigma;
      const double* row = &centered(i, 0);
      for (std::size_t j = 0; j < m; ++j) out.basis(j, filled) += w * row[j];
    }
    out.singular_values[filled] = sigma;
    ++filled;
  }

  // Deterministic completion: orthonormalize canonical directions against the
  // existing columns until the basis has p columns.
  for (std::size_t cand = 0; cand < m && filled < p; ++cand) {
    std::vector<double> w(m, 0.0);
    w[cand] = 1.0;
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < filled; ++k) {
        double proj = 0.0;
        for (std::size_t j = 0; j < m; ++j) proj += out.basis(j, k) * w[j];
        for (std::size_t j = 0; j < m; ++j) w[j] -= proj * out.basis(j, k);
      }
    }
    const double nrm = norm2(w);
    if (nrm < 1e-6) continue;
    for (std::size_t j = 0; j < m; ++j) out.basis(j, filled) = w[j] / nrm;
    ++filled;
  }
  if (filled < p) {
    throw numeric_error("fit_pod: could not complete an orthonormal basis of " +
                        std::to_string(p) + " columns (got " +
                        std::to_string(filled) + ")");
  }
  return out;
}

/// Latent coordinates z = basis^T (v - mean) for each row of `snapshots`.
inline Matrix pod_project(const PodBasis& pod, const Matrix& snapshots) {
  if (snapshots.cols() != pod.basis.rows()) {
    throw std::invalid_argument("pod_project: snapshot dimension " +
                                std::to_string(snapshots.cols()) +
                                " does not match basis dimension " +
                                std::to_string(pod.basis.rows()));
  }
  Matrix z(snapshots.rows(), pod.basis.cols());
  for (std::size_t i = 0; i < snapshots.rows(); ++i) {
    const double* row = &snapshots(i, 0);
    for (std::size_t k = 0; k < pod.basis.cols(); ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < pod.basis.rows(); ++j) {
        s += pod.basis(j, k) * (row[j] - pod.mean[j]);
      }
      z(i, k) = s;
    }
  }
  return z;
}

/// Reconstruction v = basis z + mean for each row of `latents`.
inline Matrix pod_reconstruct(const PodBasis& pod, const Matrix& latents) {
  if (latents.cols() != pod.basis.cols()) {
    throw std::invalid_argument("pod_reconstruct: latent dimension " +
                                std::to_string(latents.cols()) +
                                " does not match basis rank " +
                                std::to_string(pod.basis.cols()));
  }
  const std::size_t m = pod.basis.rows();
  Matrix v(latents.rows(), m);
  for (std::size_t i = 0; i < latents.rows(); ++i) {
    double* row = &v(i, 0);
    for (std::size_t j = 0; j < m; ++j) row[j] = pod.mean[j];
    for (std::size_t k = 0; k < pod.basis.cols(); ++k) {
      const double zk = latents(i, k);
      for (std::size_t j = 0; j < m; ++j) row[j] += zk * pod.basis(j, k);
    }
  }
  return v;
}

// ---------------------------------------------------------------------------
// Kernel PCA.
// ---------------------------------------------------------------------------

/// Kernel principal components of a snapshot set. The mean snapshot is
/// subtracted first, the kernel acts on the centered snapshots, and the Gram
/// matrix is double-centered in feature space. Latents of new snapshots come
/// from the usual out-of-sample centering of their kernel row.
struct KpcaModel {
  PolynomialKernel kernel;
  std::vector<double> mean;            // length M
  Matrix centered_snapshots;           // N x M (kept for out-of-sample rows)
  std::vector<double> gram_row_means;  // length N
  double gram_total_mean = 0.0;
  std::vector<double> eigenvalues;     // p kept, descending
  std::vector<double> spectrum;        // all N eigenvalues, descending
  Matrix alpha;                        // N x p, columns v_k / sqrt(lambda_k)
  Matrix train_latents;               // N x p
};

/// Center the kernel rows of out-of-sample points against the training Gram
/// statistics: ktilde[i][j] = k[i][j] - rowmean_i(k) - train_rowmean_j + total.
inline Matrix center_kernel_rows(const Matrix& k,
                                 const std::vector<double>& train_row_means,
                                 double total_mean) {
  if (k.cols() != train_row_means.size()) {
    throw std::invalid_argument("center_kernel_rows: " +
                                std::to_string(k.cols()) +
                                " columns vs " +
                                std::to_string(train_row_means.size()) +
                                " training row means");
  }
  Matrix out = k;
  const double inv_n = 1.0 / static_cast<double>(k.cols());
  for (std::size_t i = 0; i < k.rows(); ++i) {
    double row_mean = 0.0;
    const double* src = &k(i, 0);
    for (std::size_t j = 0; j < k.cols(); ++j) row_mean += src[j];
    row_mean *= inv_n;
    double* dst = &out(i, 0);
    for (std::size_t j = 0; j < k.cols(); ++j) {
      dst[j] = src[j] - row_mean - train_row_means[j] + total_mean;
    }
  }
  return out;
}

/// Fit kernel PCA with p components. Eigenvalues at or below the rank
/// tolerance are unusable; requesting more components than the achievable
/// rank throws numeric_error naming that rank.
inline KpcaModel fit_kpca(const PolynomialKernel& kernel,
                          const Matrix& snapshots, std::size_t p) {
  const std::size_t n = snapshots.rows();
  const std::size_t m = snapshots.cols();
  if (n == 0) throw std::invalid_argument("fit_kpca: no snapshots");
  if (p == 0 || p > n) {
    throw std::invalid_argument("fit_kpca: p must be in [1, " +
                                std::to_string(n) + "], got " +
                                std::to_string(p));
  }

  KpcaModel out;
  out.kernel = kernel;
  out.mean = column_means(snapshots);
  out.centered_snapshots = snapshots;
  for (std::size_t i = 0; i < n; ++i) {
    double* row = &out.centered_snapshots(i, 0);
    for (std::size_t j = 0; j < m; ++j) row[j] -= out.mean[j];
  }

  const Matrix k = gram(kernel, out.centered_snapshots);
  out.gram_row_means.assign(n, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += k(i, j);
    out.gram_row_means[i] = s / static_cast<double>(n);
    total += s;
  }
  out.gram_total_mean = total / static_cast<double>(n * n);

  // Double centering; mirrored so the eigensolver sees an exactly symmetric
  // matrix despite rounding in the rank-one updates.
  Matrix kc(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      const double v = k(i, j) - out.gram_row_means[i] -
                       out.gram_row_means[j] + out.gram_total_mean;
      kc(i, j) = v;
      kc(j, i) = v;
    }
  }

  const EigenDecomposition eig = eigh(kc);
  out.spectrum = eig.eigenvalues;
  const double tol = rank_tolerance(out.spectrum);
  std::size_t rank = 0;
  while (rank < n && eig.eigenvalues[rank] > tol) ++rank;
  if (p > rank) {
    throw numeric_error("fit_kpca: requested " + std::to_string(p) +
                        " components but the centered Gram matrix has rank " +
                        std::to_string(rank));
  }

  out.eigenvalues.assign(eig.eigenvalues.begin(), eig.eigenvalues.begin() + p);
  out.alpha = Matrix(n, p);
  for (std::size_t q = 0; q < p; ++q) {
    const double scale = 1.0 / std::sqrt(eig.eigenvalues[q]);
    for (std::size_t i = 0; i < n; ++i) {
      out.alpha(i, q) = eig.eigenvectors(i, q) * scale;
    }
  }
  out.train_latents = matmul(kc, out.alpha);
  return out;
}

/// Latent coordinates of new snapshots (rows of `snapshots`, Q x M).
inline Matrix kpca_project(const KpcaModel& model, const Matrix& snapshots) {
  if (snapshots.cols() != model.centered_snapshots.cols()) {
    throw std::invalid_argument("kpca_project: snapshot dimension " +
                                std::to_string(snapshots.cols()) +
                                " does not match fitted dimension " +
                                std::to_string(model.centered_snapshots.cols()));
  }
  Matrix centered = snapshots;
  for (std::size_t i = 0; i < centered.rows(); ++i) {
    double* row = &centered(i, 0);
    for (std::size_t j = 0; j < centered.cols(); ++j) row[j] -= model.mean[j];
  }
  const Matrix k =
      cross_gram(model.kernel, centered, model.centered_snapshots);
  const Matrix kc =
      center_kernel_rows(k, model.gram_row_means, model.gram_total_mean);
  return matmul(kc, model.alpha);
}

}  // namespace kpcadon

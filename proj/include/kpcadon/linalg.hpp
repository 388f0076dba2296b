#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "kpcadon/errors.hpp"
#include "kpcadon/matrix.hpp"

namespace kpcadon {

/// Result of a symmetric eigendecomposition. Eigenvalues are sorted in
/// descending order; eigenvectors() column k pairs with eigenvalues()[k].
struct EigenDecomposition {
  std::vector<double> eigenvalues;
  Matrix eigenvectors;
};

namespace detail {

inline double off_diagonal_frobenius(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (i != j) s += a(i, j) * a(i, j);
    }
  }
  return std::sqrt(s);
}

inline void check_symmetric(const Matrix& a, const char* who) {
  if (a.rows() != a.cols()) {
    throw std::invalid_argument(std::string(who) + ": matrix is " +
                                std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + ", expected square");
  }
  const double tol = 1e-10 * (1.0 + frobenius_norm(a));
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = i + 1; j < a.cols(); ++j) {
      if (std::abs(a(i, j) - a(j, i)) > tol) {
        throw std::invalid_argument(std::string(who) +
                                    ": matrix is not symmetric at (" +
                                    std::to_string(i) + "," + std::to_string(j) +
                                    ")");
      }
    }
  }
}

}  // namespace detail

/// Symmetric eigendecomposition by cyclic Jacobi rotations with threshold
/// skipping. Converges when the off-diagonal Frobenius norm drops below
/// 1e-12 times the Frobenius norm of the input; throws numeric_error if that
/// has not happened after 100 sweeps. Eigenvalues come back descending and
/// each eigenvector is signed so its largest-magnitude entry is positive
/// (first such entry on ties), which keeps results reproducible across runs.
inline EigenDecomposition eigh(const Matrix& input) {
  detail::check_symmetric(input, "eigh");
  const std::size_t n = input.rows();
  if (n == 0) return {{}, Matrix()};

  Matrix a = input;
  Matrix v = Matrix::identity(n);

  const double norm = frobenius_norm(input);
  const double target = 1e-12 * norm;
  // If every pair in a sweep falls below `skip`, then off(A) < target, so the
  // skip threshold and the convergence test are consistent by construction.
  const double skip = target / static_cast<double>(n);

  constexpr int kMaxSweeps = 100;
  double off = detail::off_diagonal_frobenius(a);
  int sweep = 0;
  for (; sweep < kMaxSweeps && off > target; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= skip) continue;

        // Symmetric Schur rotation annihilating a(p, q).
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t =
            (theta >= 0.0 ? 1.0 : -1.0) /
            (std::abs(theta) + std::sqrt(1.0 + theta * theta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          if (k == p || k == q) continue;
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = a(p, k) = c * akp - s * akq;
          a(k, q) = a(q, k) = s * akp + c * akq;
        }
        a(p, p) -= t * apq;
        a(q, q) += t * apq;
        a(p, q) = a(q, p) = 0.0;

        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
    off = detail::off_diagonal_frobenius(a);
  }
  if (off > target) {
    throw numeric_error("eigh: Jacobi iteration did not converge in " +
                        std::to_string(kMaxSweeps) +
                        " sweeps; off-diagonal residual " + std::to_string(off) +
                        " > " + std::to_string(target));
  }

  // Sort eigenpairs by descending eigenvalue.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) {
                     return a(i, i) > a(j, j);
                   });

  EigenDecomposition out;
  out.eigenvalues.resize(n);
  out.eigenvectors = Matrix(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    out.eigenvalues[k] = a(src, src);
    // Fix the sign: largest-magnitude entry positive, first one on ties.
    std::size_t arg = 0;
    double best = std::abs(v(0, src));
    for (std::size_t i = 1; i < n; ++i) {
      const double m = std::abs(v(i, src));
      if (m > best) {
        best = m;
        arg = i;
      }
    }
    const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.eigenvectors(i, k) = sign * v(i, src);
  }
  return out;
}

/// Cholesky factor L with A = L * L^T; throws numeric_error naming the first
/// non-positive pivot when A is not positive definite.
inline Matrix cholesky(const Matrix& a) {
  detail::check_symmetric(a, "cholesky");
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0)) {
      throw numeric_error("cholesky: non-positive pivot " + std::to_string(d) +
                          " at index " + std::to_string(j) +
                          "; matrix is not positive definite");
    }
    l(j, j) = std::sqrt(d);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / l(j, j);
    }
  }
  return l;
}

/// Solve A X = B for symmetric positive definite A via Cholesky.
inline Matrix solve_spd(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("solve_spd: A has " + std::to_string(a.rows()) +
                                " rows but B has " + std::to_string(b.rows()));
  }
  const Matrix l = cholesky(a);
  const std::size_t n = a.rows();
  const std::size_t m = b.cols();

  // Forward substitution L Y = B, then back substitution L^T X = Y.
  Matrix x = b;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      const double lik = l(i, k);
      for (std::size_t j = 0; j < m; ++j) x(i, j) -= lik * x(k, j);
    }
    const double inv = 1.0 / l(i, i);
    for (std::size_t j = 0; j < m; ++j) x(i, j) *= inv;
  }
  for (std::size_t ii = n; ii-- > 0;) {
    for (std::size_t k = ii + 1; k < n; ++k) {
      const double lki = l(k, ii);
      for (std::size_t j = 0; j < m; ++j) x(ii, j) -= lki * x(k, j);
    }
    const double inv = 1.0 / l(ii, ii);
    for (std::size_t j = 0; j < m; ++j) x(ii, j) *= inv;
  }
  return x;
}

/// Solve A x = b for symmetric positive definite A.
inline std::vector<double> solve_spd(const Matrix& a,
                                     std::span<const double> b) {
  Matrix rhs(b.size(), 1);
  for (std::size_t i = 0; i < b.size(); ++i) rhs(i, 0) = b[i];
  Matrix x = solve_spd(a, rhs);
  return x.data();
}

}  // namespace kpcadon

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kpcadon/matrix.hpp"

namespace kpcadon {

/// Axis-aligned tensor-product grid recovered from a flat list of coordinate
/// rows. Rows may appear in any order; the constructor infers the per-axis
/// tick values and a permutation from lexicographic position to row index,
/// and rejects coordinate sets that do not form a full tensor product.
///
/// The grid is what makes output fields interpolable: predictions live on the
/// stored rows, and multilinear interpolation evaluates them anywhere inside
/// the bounding box.
class TensorGrid {
 public:
  TensorGrid() = default;

  /// `coords` is m x d: one row per grid point.
  static TensorGrid from_coords(const Matrix& coords) {
    if (coords.rows() == 0 || coords.cols() == 0) {
      throw std::invalid_argument("TensorGrid: empty coordinate matrix");
    }
    TensorGrid g;
    const std::size_t m = coords.rows();
    const std::size_t d = coords.cols();

    // Per-axis tick values, merged with a relative tolerance so that ticks
    // written out and read back through text formats still coincide.
    g.ticks_.resize(d);
    std::vector<double> tols(d);
    for (std::size_t ax = 0; ax < d; ++ax) {
      std::vector<double> col(m);
      for (std::size_t r = 0; r < m; ++r) col[r] = coords(r, ax);
      std::sort(col.begin(), col.end());
      const double scale =
          std::max({1.0, std::abs(col.front()), std::abs(col.back())});
      const double tol = 1e-9 * scale;
      tols[ax] = tol;
      std::vector<double>& ticks = g.ticks_[ax];
      for (double v : col) {
        if (ticks.empty() || v - ticks.back() > tol) ticks.push_back(v);
      }
    }

    std::size_t expected = 1;
    for (const auto& ticks : g.ticks_) expected *= ticks.size();
    if (expected != m) {
      throw std::invalid_argument(
          "TensorGrid: " + std::to_string(m) +
          " coordinate rows cannot form a tensor product of " +
          std::to_string(expected) + " tick combinations");
    }

    // Map every row to its lexicographic position (axis 0 slowest).
    g.row_of_.assign(m, m);
    for (std::size_t r = 0; r < m; ++r) {
      std::size_t flat = 0;
      for (std::size_t ax = 0; ax < d; ++ax) {
        const std::size_t idx = g.tick_index(ax, coords(r, ax), tols[ax]);
        flat = flat * g.ticks_[ax].size() + idx;
      }
      if (g.row_of_[flat] != m) {
        throw std::invalid_argument(
            "TensorGrid: duplicate grid point at row " + std::to_string(r));
      }
      g.row_of_[flat] = r;
    }
    return g;
  }

  std::size_t dim() const { return ticks_.size(); }
  std::size_t size() const { return row_of_.size(); }
  const std::vector<double>& ticks(std::size_t axis) const {
    return ticks_[axis];
  }

  /// Multilinear interpolation of row-indexed values at one query point.
  /// `values` is m x r (one row per grid point, any number of columns);
  /// queries outside the bounding box are refused rather than extrapolated.
  std::vector<double> interpolate(const Matrix& values,
                                  std::span<const double> point) const {
    if (values.rows() != size()) {
      throw std::invalid_argument("TensorGrid::interpolate: values have " +
                                  std::to_string(values.rows()) +
                                  " rows for a grid of " +
                                  std::to_string(size()) + " points");
    }
    if (point.size() != dim()) {
      throw std::invalid_argument("TensorGrid::interpolate: query has " +
                                  std::to_string(point.size()) +
                                  " coordinates, grid has " +
                                  std::to_string(dim()));
    }
    const std::size_t d = dim();
    std::vector<std::size_t> lo(d);
    std::vector<double> frac(d);
    for (std::size_t ax = 0; ax < d; ++ax) {
      locate(ax, point[ax], lo[ax], frac[ax]);
    }

    // Accumulate the 2^d cell corners with product weights.
    std::vector<double> out(values.cols(), 0.0);
    const std::size_t corners = std::size_t{1} << d;
    for (std::size_t mask = 0; mask < corners; ++mask) {
      double w = 1.0;
      std::size_t flat = 0;
      for (std::size_t ax = 0; ax < d; ++ax) {
        const bool hi = (mask >> ax) & 1u;
        const std::size_t n = ticks_[ax].size();
        std::size_t idx = lo[ax];
        if (hi) {
          if (n == 1 || frac[ax] == 0.0) {
            w = 0.0;
            break;
          }
          idx += 1;
          w *= frac[ax];
        } else {
          w *= 1.0 - frac[ax];
        }
        flat = flat * n + idx;
      }
      if (w == 0.0) continue;
      const double* row = &values(row_of_[flat], 0);
      for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * row[j];
    }
    return out;
  }

  /// Interpolate at many query points; returns queries.rows() x values.cols().
  Matrix interpolate_many(const Matrix& values, const Matrix& queries) const {
    Matrix out(queries.rows(), values.cols());
    for (std::size_t i = 0; i < queries.rows(); ++i) {
      const std::vector<double> v = interpolate(values, queries.row(i));
      std::copy(v.begin(), v.end(), &out(i, 0));
    }
    return out;
  }

 private:
  std::size_t tick_index(std::size_t axis, double value, double tol) const {
    const std::vector<double>& ticks = ticks_[axis];
    const auto it =
        std::lower_bound(ticks.begin(), ticks.end(), value - tol);
    if (it == ticks.end() || std::abs(*it - value) > tol) {
      throw std::invalid_argument("TensorGrid: coordinate " +
                                  std::to_string(value) +
                                  " does not match any tick on axis " +
                                  std::to_string(axis));
    }
    return static_cast<std::size_t>(it - ticks.begin());
  }

  /// Find the cell [ticks[lo], ticks[lo+1]] containing `value` and the
  /// fractional position within it. Inside-the-box is enforced here.
  void locate(std::size_t axis, double value, std::size_t& lo,
              double& frac) const {
    const std::vector<double>& ticks = ticks_[axis];
    const double scale =
        std::max({1.0, std::abs(ticks.front()), std::abs(ticks.back())});
    const double tol = 1e-9 * scale;
    if (value < ticks.front() - tol || value > ticks.back() + tol) {
      throw std::invalid_argument(
          "TensorGrid: query coordinate " + std::to_string(value) +
          " on axis " + std::to_string(axis) + " is outside [" +
          std::to_string(ticks.front()) + ", " + std::to_string(ticks.back()) +
          "]; extrapolation is not supported");
    }
    const double v = std::clamp(value, ticks.front(), ticks.back());
    if (ticks.size() == 1) {
      lo = 0;
      frac = 0.0;
      return;
    }
    auto it = std::upper_bound(ticks.begin(), ticks.end(), v);
    std::size_t hi = static_cast<std::size_t>(it - ticks.begin());
    hi = std::clamp<std::size_t>(hi, 1, ticks.size() - 1);
    lo = hi - 1;
    frac = (v - ticks[lo]) / (ticks[hi] - ticks[lo]);
  }

  std::vector<std::vector<double>> ticks_;
  std::vector<std::size_t> row_of_;  // lexicographic position -> coords row
};

/// Uniform ticks: n points spanning [lo, hi] inclusive.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) throw std::invalid_argument("linspace: n must be positive");
  std::vector<double> t(n);
  if (n == 1) {
    t[0] = lo;
    return t;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = lo + step * static_cast<double>(i);
  }
  t[n - 1] = hi;  // avoid drift at the far endpoint
  return t;
}

/// Row-major tensor product of axis ticks: one coordinate row per grid point,
/// axis 0 varying slowest.
inline Matrix tensor_coords(const std::vector<std::vector<double>>& axes) {
  if (axes.empty()) throw std::invalid_argument("tensor_coords: no axes");
  std::size_t m = 1;
  for (const auto& t : axes) {
    if (t.empty()) throw std::invalid_argument("tensor_coords: empty axis");
    m *= t.size();
  }
  Matrix coords(m, axes.size());
  for (std::size_t r = 0; r < m; ++r) {
    std::size_t rem = r;
    for (std::size_t ax = axes.size(); ax-- > 0;) {
      const std::size_t n = axes[ax].size();
      coords(r, ax) = axes[ax][rem % n];
      rem /= n;
    }
  }
  return coords;
}

}  // namespace kpcadon

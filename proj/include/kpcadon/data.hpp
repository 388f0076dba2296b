#pragma once

#include <charconv>
#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kpcadon/errors.hpp"
#include "kpcadon/grid.hpp"
#include "kpcadon/matrix.hpp"
#include "kpcadon/rng.hpp"
#include "kpcadon/serialize.hpp"

namespace kpcadon {

inline constexpr char kDatasetMagic[] = "KPCADAT1";

/// A set of input/output function samples on a shared output grid.
///
/// Outputs are flattened point-major: row i is
/// [v_1(x_0), ..., v_dv(x_0), v_1(x_1), ...] over the grid points in the
/// order of `out_coords` rows, so reshaping a row to (grid_points x
/// field_count) recovers per-point field values directly.
struct Dataset {
  std::string problem;          // generator name, or "imported"
  std::size_t field_count = 1;  // number of output fields (dv)
  Matrix inputs;                // N x n branch inputs
  Matrix outputs;               // N x (grid_points * field_count)
  Matrix out_coords;            // grid_points x coord_dim
  Matrix in_coords;             // optional sensor coordinates (may be empty)

  std::size_t sample_count() const { return inputs.rows(); }
  std::size_t input_dim() const { return inputs.cols(); }
  std::size_t grid_points() const { return out_coords.rows(); }
  std::size_t coord_dim() const { return out_coords.cols(); }

  void validate() const {
    if (inputs.rows() == 0) {
      throw std::invalid_argument("Dataset: no samples");
    }
    if (outputs.rows() != inputs.rows()) {
      throw std::invalid_argument("Dataset: " + std::to_string(inputs.rows()) +
                                  " input rows vs " +
                                  std::to_string(outputs.rows()) +
                                  " output rows");
    }
    if (field_count == 0) {
      throw std::invalid_argument("Dataset: field_count must be positive");
    }
    if (outputs.cols() != grid_points() * field_count) {
      throw std::invalid_argument(
          "Dataset: outputs have " + std::to_string(outputs.cols()) +
          " columns, expected grid_points * field_count = " +
          std::to_string(grid_points() * field_count));
    }
  }

  /// One sample's outputs reshaped to (grid_points x field_count), ready for
  /// interpolation on the grid.
  Matrix sample_field(std::size_t i) const {
    Matrix f(grid_points(), field_count);
    std::copy_n(&outputs(i, 0), outputs.cols(), f.data().data());
    return f;
  }
};

// ---------------------------------------------------------------------------
// Benchmark generators.
// ---------------------------------------------------------------------------

struct Gen1dOptions {
  std::size_t n_train = 51;
  std::size_t n_test = 51;
  std::size_t grid_size = 100;
  double mu_min = 1.0;
  double mu_max = std::numbers::pi;
};

struct DatasetPair {
  Dataset train;
  Dataset test;
};

/// 1D nonlinear parametrized benchmark, the test function introduced with
/// DEIM (Chaturantabut & Sorensen 2010, section 3.3.1):
///
///   s(x; mu) = (1 - x) cos(3 pi mu (x + 1)) exp(-(1 + x) mu)
///
/// on x in [-1, 1] with mu in [mu_min, mu_max]. Parameters are evenly spaced
/// over the closed interval with n_train + n_test values; even positions
/// (0, 2, ...) form the training set and odd positions the test set, so both
/// sets cover the parameter range. The evaluation order (parameters outer,
/// grid points inner) is fixed, making output deterministic everywhere.
inline DatasetPair generate_1d_nonlinear(const Gen1dOptions& opt) {
  if (opt.n_train == 0 || opt.n_test == 0) {
    throw std::invalid_argument("generate_1d_nonlinear: empty split");
  }
  if (opt.grid_size < 2) {
    throw std::invalid_argument("generate_1d_nonlinear: grid_size must be >= 2");
  }
  if (!(opt.mu_max > opt.mu_min)) {
    throw std::invalid_argument("generate_1d_nonlinear: mu range is empty");
  }
  const std::vector<double> xs = linspace(-1.0, 1.0, opt.grid_size);
  const std::vector<double> mus =
      linspace(opt.mu_min, opt.mu_max, opt.n_train + opt.n_test);

  DatasetPair out;
  auto init = [&](Dataset& ds, std::size_t n) {
    ds.problem = "1d-nonlinear";
    ds.field_count = 1;
    ds.inputs = Matrix(n, 1);
    ds.outputs = Matrix(n, opt.grid_size);
    ds.out_coords = Matrix(opt.grid_size, 1);
    for (std::size_t j = 0; j < opt.grid_size; ++j) ds.out_coords(j, 0) = xs[j];
  };
  init(out.train, opt.n_train);
  init(out.test, opt.n_test);

  std::size_t next_train = 0;
  std::size_t next_test = 0;
  for (std::size_t i = 0; i < mus.size(); ++i) {
    const double mu = mus[i];
    const bool is_train = (i % 2 == 0) ? (next_train < opt.n_train)
                                       : !(next_test < opt.n_test);
    Dataset& ds = is_train ? out.train : out.test;
    const std::size_t row = is_train ? next_train++ : next_test++;
    ds.inputs(row, 0) = mu;
    for (std::size_t j = 0; j < opt.grid_size; ++j) {
      const double x = xs[j];
      ds.outputs(row, j) = (1.0 - x) *
                           std::cos(3.0 * std::numbers::pi * mu * (x + 1.0)) *
                           std::exp(-(1.0 + x) * mu);
    }
  }
  return out;
}

struct Gen2dOptions {
  std::size_t n_train = 80;
  std::size_t n_test = 40;
  std::size_t nx = 24;
  std::size_t ny = 24;
  std::size_t field_count = 1;  // 1 or 2
  std::uint64_t seed = 7;
};

/// Synthetic two-dimensional benchmark with a smooth closed-form solution,
/// used to exercise vector-valued outputs and bilinear interpolation:
///
///   v1(x, y; t) = sin(pi (1 + t1) x) cos(pi (1 + t2) y) + (t1 + t2) x y
///   v2(x, y; t) = cos(pi (1 + t1) x) sin(pi (1 + t2) y) - t1 x + t2 y
///
/// on the unit square with parameters t = (t1, t2) drawn uniformly from
/// [0, 0.5]^2 (training samples first, then test samples, one fixed stream
/// from `seed`). Branch inputs are the parameters themselves.
inline DatasetPair generate_synthetic_2d(const Gen2dOptions& opt) {
  if (opt.n_train == 0 || opt.n_test == 0) {
    throw std::invalid_argument("generate_synthetic_2d: empty split");
  }
  if (opt.nx < 2 || opt.ny < 2) {
    throw std::invalid_argument("generate_synthetic_2d: grid must be >= 2x2");
  }
  if (opt.field_count != 1 && opt.field_count != 2) {
    throw std::invalid_argument("generate_synthetic_2d: field_count must be 1 or 2");
  }
  const std::vector<double> xs = linspace(0.0, 1.0, opt.nx);
  const std::vector<double> ys = linspace(0.0, 1.0, opt.ny);
  const Matrix coords = tensor_coords({xs, ys});
  const std::size_t m = coords.rows();

  Rng rng(opt.seed);
  auto fill = [&](Dataset& ds, std::size_t n) {
    ds.problem = "synthetic-2d";
    ds.field_count = opt.field_count;
    ds.inputs = Matrix(n, 2);
    ds.outputs = Matrix(n, m * opt.field_count);
    ds.out_coords = coords;
    for (std::size_t i = 0; i < n; ++i) {
      const double t1 = rng.uniform(0.0, 0.5);
      const double t2 = rng.uniform(0.0, 0.5);
      ds.inputs(i, 0) = t1;
      ds.inputs(i, 1) = t2;
      double* row = &ds.outputs(i, 0);
      for (std::size_t g = 0; g < m; ++g) {
        const double x = coords(g, 0);
        const double y = coords(g, 1);
        row[g * opt.field_count] =
            std::sin(std::numbers::pi * (1.0 + t1) * x) *
                std::cos(std::numbers::pi * (1.0 + t2) * y) +
            (t1 + t2) * x * y;
        if (opt.field_count == 2) {
          row[g * opt.field_count + 1] =
              std::cos(std::numbers::pi * (1.0 + t1) * x) *
                  std::sin(std::numbers::pi * (1.0 + t2) * y) -
              t1 * x + t2 * y;
        }
      }
    }
  };
  DatasetPair out;
  fill(out.train, opt.n_train);
  fill(out.test, opt.n_test);
  return out;
}

// ---------------------------------------------------------------------------
// Binary persistence.
// ---------------------------------------------------------------------------

inline void save_dataset(const Dataset& ds, const std::string& path) {
  ds.validate();
  io::AtomicFile file(path);
  std::ostream& os = file.stream();
  io::write_magic(os, kDatasetMagic);

  nlohmann::json meta;
  meta["problem"] = ds.problem;
  meta["field_count"] = ds.field_count;
  meta["n_samples"] = ds.sample_count();
  meta["input_dim"] = ds.input_dim();
  meta["grid_points"] = ds.grid_points();
  meta["coord_dim"] = ds.coord_dim();
  meta["has_in_coords"] = !ds.in_coords.empty();
  io::write_string(os, meta.dump());

  const std::uint32_t blocks = ds.in_coords.empty() ? 3 : 4;
  io::write_u32(os, blocks);
  io::write_array(os, ds.inputs);
  io::write_array(os, ds.outputs);
  io::write_array(os, ds.out_coords);
  if (!ds.in_coords.empty()) io::write_array(os, ds.in_coords);
  file.commit();
}

inline Dataset load_dataset(const std::string& path) {
  std::ifstream is = io::open_input(path);
  io::expect_magic(is, kDatasetMagic, "dataset '" + path + "'");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(io::read_string(is, "dataset metadata"));
  } catch (const nlohmann::json::exception& e) {
    throw io_error("dataset '" + path + "': invalid metadata: " + e.what());
  }

  Dataset ds;
  ds.problem = meta.value("problem", std::string("imported"));
  ds.field_count = meta.at("field_count").get<std::size_t>();
  const std::uint32_t blocks = io::read_u32(is, "dataset block count");
  if (blocks != 3 && blocks != 4) {
    throw io_error("dataset '" + path + "': unexpected block count " +
                   std::to_string(blocks));
  }
  ds.inputs = io::read_array_2d(is, "dataset inputs");
  ds.outputs = io::read_array_2d(is, "dataset outputs");
  ds.out_coords = io::read_array_2d(is, "dataset out_coords");
  if (blocks == 4) ds.in_coords = io::read_array_2d(is, "dataset in_coords");

  if (ds.sample_count() != meta.at("n_samples").get<std::size_t>() ||
      ds.input_dim() != meta.at("input_dim").get<std::size_t>() ||
      ds.grid_points() != meta.at("grid_points").get<std::size_t>() ||
      ds.coord_dim() != meta.at("coord_dim").get<std::size_t>()) {
    throw io_error("dataset '" + path +
                   "': array shapes disagree with metadata");
  }
  try {
    ds.validate();
    TensorGrid::from_coords(ds.out_coords);
  } catch (const std::invalid_argument& e) {
    throw io_error("dataset '" + path + "': " + e.what());
  }
  return ds;
}

// ---------------------------------------------------------------------------
// CSV import.
// ---------------------------------------------------------------------------

namespace detail {

inline bool parse_csv_row(const std::string& line, std::vector<double>& out) {
  out.clear();
  std::size_t pos = 0;
  while (pos <= line.size()) {
    std::size_t end = line.find(',', pos);
    if (end == std::string::npos) end = line.size();
    std::size_t a = pos;
    std::size_t b = end;
    while (a < b && (line[a] == ' ' || line[a] == '\t')) ++a;
    while (b > a && (line[b - 1] == ' ' || line[b - 1] == '\t' ||
                     line[b - 1] == '\r')) {
      --b;
    }
    double value = 0.0;
    const auto res = std::from_chars(line.data() + a, line.data() + b, value);
    if (res.ec != std::errc() || res.ptr != line.data() + b) return false;
    out.push_back(value);
    pos = end + 1;
    if (end == line.size()) break;
  }
  return !out.empty();
}

}  // namespace detail

/// Numeric CSV file -> matrix. Rows must have a consistent column count; a
/// single leading non-numeric row is treated as a header and skipped.
inline Matrix load_csv_matrix(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw io_error("cannot open '" + path + "' for reading");
  std::vector<std::vector<double>> rows;
  std::string line;
  std::vector<double> row;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string trimmed = line;
    while (!trimmed.empty() &&
           (trimmed.back() == '\r' || trimmed.back() == ' ')) {
      trimmed.pop_back();
    }
    if (trimmed.empty()) continue;
    if (!detail::parse_csv_row(trimmed, row)) {
      if (rows.empty() && lineno == 1) continue;  // header row
      throw io_error("'" + path + "' line " + std::to_string(lineno) +
                     ": not a numeric CSV row");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw io_error("'" + path + "' line " + std::to_string(lineno) +
                     ": expected " + std::to_string(rows.front().size()) +
                     " columns, got " + std::to_string(row.size()));
    }
    rows.push_back(row);
  }
  if (rows.empty()) throw io_error("'" + path + "' contains no data rows");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy(rows[i].begin(), rows[i].end(), &m(i, 0));
  }
  return m;
}

/// Assemble a dataset from three CSV files: branch inputs (one row per
/// sample), outputs (one row per sample, point-major flattening), and grid
/// coordinates (one row per grid point).
inline Dataset import_csv_dataset(const std::string& inputs_path,
                                  const std::string& outputs_path,
                                  const std::string& coords_path,
                                  std::size_t field_count) {
  Dataset ds;
  ds.problem = "imported";
  ds.field_count = field_count;
  ds.inputs = load_csv_matrix(inputs_path);
  ds.outputs = load_csv_matrix(outputs_path);
  ds.out_coords = load_csv_matrix(coords_path);
  ds.validate();
  try {
    TensorGrid::from_coords(ds.out_coords);
  } catch (const std::invalid_argument& e) {
    throw io_error("'" + coords_path + "': " + e.what());
  }
  return ds;
}

}  // namespace kpcadon

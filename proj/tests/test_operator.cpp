#include "kpcadon/operator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstddef>
#include <fstream>
#include <string>
#include <vector>

#include "kpcadon/config.hpp"
#include "kpcadon/data.hpp"
#include "kpcadon/errors.hpp"
#include "kpcadon/kernels.hpp"
#include "kpcadon/matrix.hpp"
#include "kpcadon/metrics.hpp"
#include "kpcadon/serialize.hpp"

using kpcadon::Dataset;
using kpcadon::DatasetPair;
using kpcadon::flattened_relative_l2;
using kpcadon::Gen1dOptions;
using kpcadon::generate_1d_nonlinear;
using kpcadon::io_error;
using kpcadon::load_model;
using kpcadon::Matrix;
using kpcadon::max_abs_diff;
using kpcadon::mean_relative_l2;
using kpcadon::numeric_error;
using kpcadon::OperatorConfig;
using kpcadon::OperatorModel;
using kpcadon::save_model;
using kpcadon::train_operator;
using kpcadon::Variant;

namespace {

std::string tmp_path(const std::string& name) {
  return ::testing::TempDir() + "kpcadon_operator_" + name;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is),
                     std::istreambuf_iterator<char>());
}

/// Shrunk version of the 1D benchmark so each fit takes milliseconds.
const DatasetPair& small_benchmark() {
  static const DatasetPair pair = [] {
    Gen1dOptions opt;
    opt.n_train = 20;
    opt.n_test = 10;
    opt.grid_size = 30;
    return generate_1d_nonlinear(opt);
  }();
  return pair;
}

OperatorConfig quick_config(Variant variant, std::size_t p) {
  OperatorConfig c;
  c.variant = variant;
  c.p = p;
  c.lambda = 1e-6;
  c.hidden = {32, 32};
  c.training.epochs = 4000;
  c.training.decay_steps = 400;
  c.training.log_every = 1000;
  return c;
}

/// One trained model per variant, shared across tests.
const OperatorModel& kpca_model() {
  static const OperatorModel model =
      train_operator(small_benchmark().train, quick_config(Variant::kKpca, 6), 1);
  return model;
}

const OperatorModel& pod_model() {
  static const OperatorModel model =
      train_operator(small_benchmark().train, quick_config(Variant::kPod, 6), 1);
  return model;
}

}  // namespace

// ---------------------------------------------------------------------------
// End-to-end accuracy on the shrunk benchmark
// ---------------------------------------------------------------------------

TEST(TrainOperator, KpcaLearnsTheBenchmark) {
  const OperatorModel& model = kpca_model();
  const Dataset& test = small_benchmark().test;
  const double err = mean_relative_l2(model.predict(test.inputs), test.outputs);
  EXPECT_LT(err, 0.1);
}

TEST(TrainOperator, PodLearnsTheBenchmark) {
  const OperatorModel& model = pod_model();
  const Dataset& test = small_benchmark().test;
  const double err = mean_relative_l2(model.predict(test.inputs), test.outputs);
  EXPECT_LT(err, 0.1);
}

TEST(TrainOperator, EncodeDecodeRoundTripsTrainingOutputs) {
  // With a tiny ridge penalty the decoder nearly interpolates the training
  // snapshots; POD reconstruction is limited only by the truncated tail.
  const Dataset& train = small_benchmark().train;
  const Matrix kpca_rt = kpca_model().decode(kpca_model().encode(train.outputs));
  EXPECT_LT(flattened_relative_l2(kpca_rt, train.outputs), 1e-3);
  const Matrix pod_rt = pod_model().decode(pod_model().encode(train.outputs));
  EXPECT_LT(flattened_relative_l2(pod_rt, train.outputs), 0.1);
}

TEST(TrainOperator, PopulatesTrainingInfo) {
  const OperatorModel& model = kpca_model();
  EXPECT_EQ(model.train_info.steps, 4000u);  // full batch: 1 step per epoch
  ASSERT_FALSE(model.train_info.loss_history.empty());
  EXPECT_EQ(model.train_info.loss_history.back(), model.train_info.final_loss);
  EXPECT_LT(model.train_info.final_loss,
            model.train_info.loss_history.front());
}

// ---------------------------------------------------------------------------
// Prediction structure
// ---------------------------------------------------------------------------

TEST(OperatorPredict, MatchesExplicitKernelExpansion) {
  // The kpca prediction must equal the explicit sum
  //   sum_i c_i k_z(b(u), z_i) + mean
  // evaluated with nothing but the stored model arrays.
  const OperatorModel& model = kpca_model();
  const Dataset& test = small_benchmark().test;
  const Matrix latents = model.branch_latents(test.inputs);
  const Matrix pred = model.predict(test.inputs);

  const Matrix& zt = model.ridge.train_latents;
  const Matrix& coef = model.ridge.coefficients;
  for (std::size_t i = 0; i < latents.rows(); ++i) {
    for (std::size_t j = 0; j < pred.cols(); ++j) {
      double acc = model.ridge.mean[j];
      for (std::size_t t = 0; t < zt.rows(); ++t) {
        acc += coef(t, j) * model.ridge.kernel(latents.row(i), zt.row(t));
      }
      ASSERT_NEAR(pred(i, j), acc, 1e-10) << "entry (" << i << ", " << j << ")";
    }
  }
}

TEST(OperatorPredict, PodPredictionIsLinearCombinationOfModes) {
  const OperatorModel& model = pod_model();
  const Dataset& test = small_benchmark().test;
  const Matrix latents = model.branch_latents(test.inputs);
  const Matrix pred = model.predict(test.inputs);
  for (std::size_t i = 0; i < latents.rows(); ++i) {
    for (std::size_t j = 0; j < pred.cols(); ++j) {
      double acc = model.pod.mean[j];
      for (std::size_t k = 0; k < model.p; ++k) {
        acc += latents(i, k) * model.pod.basis(j, k);
      }
      ASSERT_NEAR(pred(i, j), acc, 1e-10) << "entry (" << i << ", " << j << ")";
    }
  }
}

TEST(OperatorPredict, AtGridNodesMatchesOnGridPrediction) {
  const OperatorModel& model = kpca_model();
  const Dataset& test = small_benchmark().test;
  const Matrix on_grid = model.predict(test.inputs);
  const Matrix at_nodes = model.predict_at(test.inputs, model.out_coords);
  EXPECT_LT(max_abs_diff(at_nodes, on_grid), 1e-12);
}

TEST(OperatorPredict, AtMidpointsInterpolatesLinearly) {
  const OperatorModel& model = kpca_model();
  const Dataset& test = small_benchmark().test;
  const Matrix on_grid = model.predict(test.inputs);

  Matrix queries(5, 1);
  for (std::size_t q = 0; q < 5; ++q) {
    queries(q, 0) =
        0.5 * (model.out_coords(2 * q, 0) + model.out_coords(2 * q + 1, 0));
  }
  const Matrix at = model.predict_at(test.inputs, queries);
  ASSERT_EQ(at.rows(), test.inputs.rows());
  ASSERT_EQ(at.cols(), 5u);
  for (std::size_t i = 0; i < at.rows(); ++i) {
    for (std::size_t q = 0; q < 5; ++q) {
      const double want = 0.5 * (on_grid(i, 2 * q) + on_grid(i, 2 * q + 1));
      EXPECT_NEAR(at(i, q), want, 1e-12);
    }
  }
}

TEST(OperatorPredict, RefusesQueriesOutsideTheGrid) {
  const OperatorModel& model = kpca_model();
  Matrix inputs(1, 1, {2.0});
  Matrix outside(1, 1, {1.5});  // grid covers [-1, 1]
  EXPECT_THROW(model.predict_at(inputs, outside), std::invalid_argument);
}

TEST(OperatorPredict, HandlesVectorValuedFields) {
  kpcadon::Gen2dOptions gopt;
  gopt.n_train = 12;
  gopt.n_test = 4;
  gopt.nx = 6;
  gopt.ny = 5;
  gopt.field_count = 2;
  const DatasetPair pair = kpcadon::generate_synthetic_2d(gopt);

  OperatorConfig c = quick_config(Variant::kKpca, 4);
  c.training.epochs = 500;
  const OperatorModel model = train_operator(pair.train, c, 3);

  const Matrix on_grid = model.predict(pair.test.inputs);
  EXPECT_EQ(on_grid.cols(), 60u);  // 30 grid points x 2 fields

  // Point-major layout survives interpolation: querying the grid nodes
  // reproduces both field slices.
  const Matrix at_nodes = model.predict_at(pair.test.inputs, model.out_coords);
  EXPECT_LT(max_abs_diff(at_nodes, on_grid), 1e-12);

  Matrix query(1, 2);
  query(0, 0) = 0.37;
  query(0, 1) = 0.61;
  const Matrix at = model.predict_at(pair.test.inputs, query);
  EXPECT_EQ(at.rows(), 4u);
  EXPECT_EQ(at.cols(), 2u);
  for (double v : at.data()) EXPECT_TRUE(std::isfinite(v));
}

// ---------------------------------------------------------------------------
// Determinism
// ---------------------------------------------------------------------------

TEST(OperatorDeterminism, SameSeedProducesByteIdenticalModels) {
  const Dataset& train = small_benchmark().train;
  OperatorConfig c = quick_config(Variant::kKpca, 4);
  c.training.epochs = 300;
  const OperatorModel a = train_operator(train, c, 7);
  const OperatorModel b = train_operator(train, c, 7);

  const std::string pa = tmp_path("det_a.bin");
  const std::string pb = tmp_path("det_b.bin");
  save_model(a, pa);
  save_model(b, pb);
  const std::string bytes = read_file(pa);
  EXPECT_FALSE(bytes.empty());
  EXPECT_EQ(bytes, read_file(pb));
}

TEST(OperatorDeterminism, SeedChangesTheFit) {
  const Dataset& train = small_benchmark().train;
  OperatorConfig c = quick_config(Variant::kKpca, 4);
  c.training.epochs = 300;
  const OperatorModel a = train_operator(train, c, 7);
  const OperatorModel b = train_operator(train, c, 8);
  EXPECT_GT(max_abs_diff(a.net.weights()[0], b.net.weights()[0]), 0.0);
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

TEST(OperatorIo, KpcaRoundTripReproducesPredictions) {
  const OperatorModel& model = kpca_model();
  const std::string path = tmp_path("kpca_model.bin");
  save_model(model, path);
  const OperatorModel back = load_model(path);

  EXPECT_EQ(back.variant, Variant::kKpca);
  EXPECT_EQ(back.problem, model.problem);
  EXPECT_EQ(back.seed, model.seed);
  EXPECT_EQ(back.p, model.p);
  EXPECT_EQ(back.field_count, model.field_count);
  EXPECT_EQ(back.config.lambda, model.config.lambda);
  EXPECT_EQ(back.config.kernel_z.degree, model.config.kernel_z.degree);
  EXPECT_EQ(back.config.hidden, model.config.hidden);
  EXPECT_EQ(back.config.training.epochs, model.config.training.epochs);
  EXPECT_EQ(back.train_info.final_loss, model.train_info.final_loss);
  EXPECT_EQ(back.train_info.loss_history, model.train_info.loss_history);

  const Dataset& test = small_benchmark().test;
  EXPECT_EQ(max_abs_diff(back.predict(test.inputs),
                         model.predict(test.inputs)),
            0.0);
}

TEST(OperatorIo, PodRoundTripReproducesPredictions) {
  const OperatorModel& model = pod_model();
  const std::string path = tmp_path("pod_model.bin");
  save_model(model, path);
  const OperatorModel back = load_model(path);
  EXPECT_EQ(back.variant, Variant::kPod);
  EXPECT_EQ(max_abs_diff(back.pod.basis, model.pod.basis), 0.0);

  const Dataset& test = small_benchmark().test;
  EXPECT_EQ(max_abs_diff(back.predict(test.inputs),
                         model.predict(test.inputs)),
            0.0);
}

TEST(OperatorIo, FileStartsWithMagic) {
  const std::string path = tmp_path("magic.bin");
  save_model(kpca_model(), path);
  EXPECT_EQ(read_file(path).substr(0, 8), "KPCADON1");
}

TEST(OperatorIo, RejectsForeignAndDamagedFiles) {
  // A dataset file is not a model file.
  const std::string dataset_path = tmp_path("dataset.bin");
  kpcadon::save_dataset(small_benchmark().train, dataset_path);
  EXPECT_THROW(load_model(dataset_path), io_error);

  const std::string model_path = tmp_path("to_truncate.bin");
  save_model(kpca_model(), model_path);
  const std::string bytes = read_file(model_path);
  const std::string cut = tmp_path("truncated.bin");
  {
    std::ofstream os(cut, std::ios::binary);
    os << bytes.substr(0, bytes.size() / 3);
  }
  EXPECT_THROW(load_model(cut), io_error);

  EXPECT_THROW(load_model(tmp_path("missing.bin")), io_error);
}

TEST(OperatorIo, RejectsUnsupportedFormatVersion) {
  const std::string path = tmp_path("future.bin");
  {
    std::ofstream os = kpcadon::io::open_output(path);
    kpcadon::io::write_magic(os, kpcadon::kModelMagic);
    kpcadon::io::write_string(os, R"({"format_version": 2})");
  }
  try {
    load_model(path);
    FAIL() << "expected io_error";
  } catch (const io_error& e) {
    EXPECT_NE(std::string(e.what()).find("format version"), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Misconfiguration
// ---------------------------------------------------------------------------

TEST(TrainOperator, RejectsBadSetups) {
  const Dataset& train = small_benchmark().train;
  OperatorConfig c = quick_config(Variant::kKpca, 4);
  c.hidden.clear();
  EXPECT_THROW(train_operator(train, c, 1), std::invalid_argument);

  // Duplicated snapshots leave the centered Gram matrix rank deficient.
  Dataset degenerate;
  degenerate.problem = "degenerate";
  degenerate.inputs = Matrix(4, 1, {0.0, 1.0, 2.0, 3.0});
  degenerate.outputs = Matrix(4, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    const double v = (i % 2 == 0) ? 1.0 : 2.0;  // only two distinct rows
    for (std::size_t j = 0; j < 3; ++j) degenerate.outputs(i, j) = v;
  }
  degenerate.out_coords = Matrix(3, 1, {0.0, 0.5, 1.0});
  c = quick_config(Variant::kKpca, 3);
  EXPECT_THROW(train_operator(degenerate, c, 1), numeric_error);

  // p beyond the flattened output dimension cannot even be completed with
  // extra orthonormal directions and is rejected up front.
  c = quick_config(Variant::kPod, train.outputs.cols() + 1);
  EXPECT_THROW(train_operator(train, c, 1), std::invalid_argument);
}

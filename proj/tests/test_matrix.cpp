#include "kpcadon/matrix.hpp"

#include <gtest/gtest.h>

#include "kpcadon/rng.hpp"
#include "test_support.hpp"

using kpcadon::Matrix;

TEST(Matrix, ConstructionAndAccess) {
  Matrix m(2, 3, 1.5);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m.size(), 6u);
  EXPECT_DOUBLE_EQ(m(1, 2), 1.5);
  m(0, 1) = -2.0;
  EXPECT_DOUBLE_EQ(m(0, 1), -2.0);
  EXPECT_DOUBLE_EQ(m.row(0)[1], -2.0);
}

TEST(Matrix, FromDataValidatesSize) {
  EXPECT_NO_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3, 4}));
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}),
               std::invalid_argument);
}

TEST(Matrix, Identity) {
  const Matrix i = Matrix::identity(3);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_DOUBLE_EQ(i(r, c), r == c ? 1.0 : 0.0);
    }
  }
}

TEST(Matrix, MatmulHandComputed) {
  const Matrix a(2, 3, {1, 2, 3, 4, 5, 6});
  const Matrix b(3, 2, {7, 8, 9, 10, 11, 12});
  const Matrix c = matmul(a, b);
  EXPECT_DOUBLE_EQ(c(0, 0), 58.0);
  EXPECT_DOUBLE_EQ(c(0, 1), 64.0);
  EXPECT_DOUBLE_EQ(c(1, 0), 139.0);
  EXPECT_DOUBLE_EQ(c(1, 1), 154.0);
}

TEST(Matrix, MatmulShapeMismatchThrows) {
  EXPECT_THROW(matmul(Matrix(2, 3), Matrix(2, 2)), std::invalid_argument);
}

TEST(Matrix, TransposedProductsMatchExplicitTranspose) {
  kpcadon::Rng rng(11);
  const Matrix a = testsupport::random_matrix(rng, 4, 6);
  const Matrix b = testsupport::random_matrix(rng, 4, 3);
  const Matrix c = testsupport::random_matrix(rng, 5, 6);

  const Matrix atb = matmul_at_b(a, b);
  const Matrix atb_ref = matmul(transpose(a), b);
  EXPECT_LT(max_abs_diff(atb, atb_ref), 1e-14);

  const Matrix abt = matmul_a_bt(a, c);
  const Matrix abt_ref = matmul(a, transpose(c));
  EXPECT_LT(max_abs_diff(abt, abt_ref), 1e-14);
}

TEST(Matrix, TransposeRoundTrip) {
  kpcadon::Rng rng(5);
  const Matrix a = testsupport::random_matrix(rng, 3, 7);
  const Matrix t = transpose(transpose(a));
  EXPECT_EQ(max_abs_diff(a, t), 0.0);
}

TEST(Matrix, ColumnMeans) {
  const Matrix a(2, 2, {1, 2, 3, 6});
  const std::vector<double> mu = column_means(a);
  EXPECT_DOUBLE_EQ(mu[0], 2.0);
  EXPECT_DOUBLE_EQ(mu[1], 4.0);
  EXPECT_THROW(column_means(Matrix(0, 2)), std::invalid_argument);
}

TEST(Matrix, NormsAndDot) {
  const std::vector<double> x = {3.0, 4.0};
  const std::vector<double> y = {1.0, -1.0};
  EXPECT_DOUBLE_EQ(kpcadon::dot(x, y), -1.0);
  EXPECT_DOUBLE_EQ(kpcadon::norm2(x), 5.0);
  const Matrix a(1, 2, {3, 4});
  EXPECT_DOUBLE_EQ(frobenius_norm(a), 5.0);
}

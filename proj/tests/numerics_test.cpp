#include "reuse/numerics.h"

#include <Eigen/Dense>
#include <cmath>

#include "gtest/gtest.h"
#include "test_util.h"

namespace reuse {
namespace {

using testing::naive_matmul;
using testing::random_matrix;

TEST(MatmulTest, IdentityAndScalar) {
  Rng rng(1);
  const Tensor2D m = random_matrix(rng, 3, 4);
  EXPECT_EQ(matmul(Tensor2D::identity(3), m), m);
  const Tensor2D p = matmul(Tensor2D{{2.0}}, Tensor2D{{3.0}});
  EXPECT_EQ(p(0, 0), 6.0);
}

TEST(MatmulTest, MatchesTripleLoop) {
  Rng rng(2);
  const Tensor2D a = random_matrix(rng, 4, 5);
  const Tensor2D b = random_matrix(rng, 5, 3);
  EXPECT_LE(max_abs_diff(matmul(a, b), naive_matmul(a, b)), 1e-12);
  EXPECT_LE(max_abs_diff(matmul_tn(testing::naive_transpose(a), b), naive_matmul(a, b)), 1e-12);
  EXPECT_LE(max_abs_diff(matmul_nt(a, testing::naive_transpose(b)), naive_matmul(a, b)), 1e-12);
}

TEST(MatmulTest, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor2D(2, 3), Tensor2D(4, 2));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("[4x2]"), std::string::npos);
  }
}

TEST(MatmulTest, AssociativeAndDistributive) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.index(5), k = 1 + rng.index(5), m = 1 + rng.index(5),
                      p = 1 + rng.index(5);
    const Tensor2D a = random_matrix(rng, n, k);
    const Tensor2D b = random_matrix(rng, k, m);
    const Tensor2D b2 = random_matrix(rng, k, m);
    const Tensor2D c = random_matrix(rng, m, p);
    EXPECT_LE(max_abs_diff(matmul(matmul(a, b), c), matmul(a, matmul(b, c))), 1e-9);
    EXPECT_LE(max_abs_diff(matmul(a, b + b2), matmul(a, b) + matmul(a, b2)), 1e-9);
  }
}

TEST(SoftmaxTest, WorkedCases) {
  const Tensor2D uniform = row_softmax(Tensor2D(1, 4), 1.0);
  for (double v : uniform.values()) EXPECT_NEAR(v, 0.25, 1e-15);

  const Tensor2D dominant = row_softmax(Tensor2D{{1000.0, 0.0}}, 1.0);
  EXPECT_NEAR(dominant(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(dominant(0, 1), 0.0, 1e-12);

  Rng rng(4);
  const Tensor2D column = row_softmax(random_matrix(rng, 5, 1, 10.0), 0.5);
  for (double v : column.values()) EXPECT_EQ(v, 1.0);
}

TEST(SoftmaxTest, MatchesDirectFormula) {
  Rng rng(5);
  const Tensor2D logits = random_matrix(rng, 6, 7, 3.0);
  EXPECT_LE(max_abs_diff(row_softmax(logits, 0.7), testing::naive_softmax_rows(logits, 0.7)),
            1e-14);
}

TEST(SoftmaxTest, RowsSumToOneAndShiftInvariant) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 1 + rng.index(6), cols = 1 + rng.index(9);
    Tensor2D logits = random_matrix(rng, rows, cols, 50.0);
    const double scale = 0.01 + 2.0 * rng.uniform();
    const Tensor2D s = row_softmax(logits, scale);
    EXPECT_LE(row_stochastic_error(s), 1e-12);

    Tensor2D shifted = logits;
    for (std::size_t r = 0; r < rows; ++r) {
      const double shift = 100.0 * (2.0 * rng.uniform() - 1.0);
      for (double& v : shifted.row(r)) v += shift;
    }
    EXPECT_LE(max_abs_diff(row_softmax(shifted, scale), s), 1e-12);
  }
}

TEST(SoftmaxTest, RejectsNonFinite) {
  Tensor2D bad{{1.0, NAN}};
  EXPECT_THROW(row_softmax(bad, 1.0), NumericError);
  Tensor2D inf{{1.0, INFINITY}};
  EXPECT_THROW(row_softmax(inf, 1.0), NumericError);
}

double eigen_spectral_norm(const Tensor2D& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return Eigen::JacobiSVD<Eigen::MatrixXd>(e).singularValues()(0);
}

TEST(SpectralNormTest, ClosedForms) {
  EXPECT_NEAR(spectral_norm(Tensor2D::identity(4)).value, 1.0, 1e-12);

  Rng rng(7);
  const Tensor2D u = random_matrix(rng, 5, 1);
  const Tensor2D v = random_matrix(rng, 3, 1);
  const double expected = frobenius_norm(u) * frobenius_norm(v);
  EXPECT_NEAR(spectral_norm(matmul_nt(u, v)).value, expected, 1e-12 * expected);
}

TEST(SpectralNormTest, ZeroMatrixIsFlagged) {
  const SpectralNormResult r = spectral_norm(Tensor2D(3, 3));
  EXPECT_TRUE(r.degenerate);
  EXPECT_EQ(r.value, 0.0);
}

TEST(SpectralNormTest, MatchesSvdOracle) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor2D m = random_matrix(rng, 8, 8);
    const SpectralNormResult r = spectral_norm(m, 200000, 1e-15);
    EXPECT_NEAR(r.value, eigen_spectral_norm(m), 1e-8);
  }
}

TEST(SpectralNormTest, TransposeAndScaling) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor2D m = random_matrix(rng, 1 + rng.index(7), 1 + rng.index(7));
    const double s = spectral_norm(m, 100000, 1e-15).value;
    EXPECT_NEAR(spectral_norm(transpose(m), 100000, 1e-15).value, s, 1e-8 * s);
    const double c = -3.5;
    EXPECT_NEAR(spectral_norm(c * m, 100000, 1e-15).value, std::abs(c) * s, 1e-8 * s);
  }
}

TEST(FiniteDiffTest, QuadraticAndConstant) {
  const std::vector<double> theta{1.0, 2.0};
  const auto quad = [](std::span<const double> t) { return t[0] * t[0] + t[1] * t[1]; };
  const std::vector<double> g = finite_diff_grad(quad, theta, 1e-5);
  EXPECT_NEAR(g[0], 2.0, 1e-8);
  EXPECT_NEAR(g[1], 4.0, 1e-8);

  const auto constant = [](std::span<const double>) { return 3.0; };
  for (double v : finite_diff_grad(constant, theta, 1e-5)) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(finite_diff_grad(constant, theta, 0.0), std::invalid_argument);
}

TEST(RngTest, SameSeedSameStream) {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 10000; ++i) {
    const double x = a.normal();
    ASSERT_EQ(x, b.normal());
    differs |= x != c.normal();
  }
  EXPECT_TRUE(differs);
  EXPECT_EQ(Rng(5).fork(1).next_u64(), Rng(5).fork(1).next_u64());
  EXPECT_NE(Rng(5).fork(1).next_u64(), Rng(5).fork(2).next_u64());
}

}  // namespace
}  // namespace reuse

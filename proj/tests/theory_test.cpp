#include "reuse/theory.h"

#include <cmath>

#include "gtest/gtest.h"
#include "test_util.h"

namespace reuse {
namespace {

using testing::naive_matmul;
using testing::random_matrix;

TEST(Lemma1Test, GaussianRatioNearOne) {
  Lemma1Options o;
  o.samples = 20000;
  o.seed = 3;
  const Lemma1Result r = lemma1_mc(o);
  EXPECT_NEAR(r.ratio, 1.0, 0.15);
  EXPECT_GT(r.rhs, 0.0);
}

TEST(Lemma1Test, RademacherRatioNearOne) {
  Lemma1Options o;
  o.samples = 20000;
  o.seed = 4;
  o.distribution = WeightDistribution::kRademacher;
  EXPECT_NEAR(lemma1_mc(o).ratio, 1.0, 0.15);
}

TEST(Lemma1Test, TiedHeadsGiveZero) {
  Lemma1Options o;
  o.samples = 10000;
  o.tie_heads = true;
  const Lemma1Result r = lemma1_mc(o);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.ratio, 0.0);
}

TEST(Lemma1Test, RejectsDegenerateInput) {
  Lemma1Options o;
  o.samples = 10000;
  o.x = Tensor2D(8, 16);
  EXPECT_THROW(lemma1_mc(o), std::invalid_argument);
  o.x = Tensor2D(3, 3);
  EXPECT_THROW(lemma1_mc(o), ShapeError);
  o.x.reset();
  o.samples = 9999;
  EXPECT_THROW(lemma1_mc(o), std::invalid_argument);
}

TEST(Lemma1Test, DeterministicPerSeed) {
  Lemma1Options o;
  o.samples = 10000;
  o.seed = 9;
  EXPECT_EQ(lemma1_mc(o).lhs, lemma1_mc(o).lhs);
}

TEST(LinearTwoLayerTest, DegenerateCases) {
  Rng rng(1);
  const Tensor2D x = random_matrix(rng, 4, 3);
  const Tensor2D a = testing::random_stochastic(rng, 4);
  const Tensor2D zero(3, 3);
  EXPECT_EQ(linear_two_layer_forward(x, a, a, zero, zero), x);

  const Tensor2D w1 = random_matrix(rng, 3, 3);
  const Tensor2D w2 = random_matrix(rng, 3, 3);
  const Tensor2D id = Tensor2D::identity(4);
  const Tensor2D xw1 = naive_matmul(x, w1);
  Tensor2D expect = x + xw1 + naive_matmul(x, w2) + naive_matmul(xw1, w2);
  EXPECT_LT(max_abs_diff(linear_two_layer_forward(x, id, id, w1, w2), expect), 1e-12);
}

TEST(LinearTwoLayerTest, MatchesTermByTermOracle) {
  Rng rng(2);
  const Tensor2D x = random_matrix(rng, 5, 4);
  const Tensor2D a1 = testing::random_stochastic(rng, 5);
  const Tensor2D a2 = testing::random_stochastic(rng, 5);
  const Tensor2D w1 = random_matrix(rng, 4, 4);
  const Tensor2D w2 = random_matrix(rng, 4, 4);
  const Tensor2D expect = x + naive_matmul(naive_matmul(a1, x), w1) +
                          naive_matmul(naive_matmul(a2, x), w2) +
                          naive_matmul(naive_matmul(naive_matmul(naive_matmul(a2, a1), x), w1), w2);
  EXPECT_LT(max_abs_diff(linear_two_layer_forward(x, a1, a2, w1, w2), expect), 1e-12);
  EXPECT_THROW(linear_two_layer_forward(x, a1, a2, w1, Tensor2D(3, 4)), ShapeError);
}

TEST(Lemma2Test, ZeroEpsilonGivesZeroError) {
  const LinearTwoLayerInstance in = sample_lemma2_instance(8, 8, 7, 0.0);
  EXPECT_EQ(in.a1, in.a2);
  const Lemma2Result r = lemma2_check(in);
  EXPECT_EQ(r.err, 0.0);
  EXPECT_TRUE(r.holds);
}

TEST(Lemma2Test, GeneratorHitsTarget) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const LinearTwoLayerInstance in = sample_lemma2_instance(8, 8, seed, 0.1);
    EXPECT_GE(in.epsilon, 0.09);
    EXPECT_LE(in.epsilon, 0.11);
    EXPECT_NEAR(spectral_norm(in.a1 - in.a2).value, in.epsilon, 1e-9);
    EXPECT_TRUE(is_row_stochastic(in.a2, 1e-12));
    EXPECT_LE(spectral_norm(in.x).value, 1.0 + 1e-9);
    EXPECT_LE(spectral_norm(in.w1).value, 1.0 + 1e-9);
    EXPECT_TRUE(is_row_stochastic(in.a_hat(), 1e-12));
  }
}

TEST(Lemma2Test, InfeasibleTargetsAreRejected) {
  EXPECT_THROW(sample_lemma2_instance(8, 8, 1, 3.0), std::invalid_argument);
  EXPECT_THROW(sample_lemma2_instance(8, 8, 1, -0.1), std::invalid_argument);
}

TEST(Lemma2Test, BoundHoldsOnRandomInstances) {
  for (double eps : {0.05, 0.25, 0.5, 1.0}) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
      const Lemma2Result r = lemma2_check(sample_lemma2_instance(6, 5, seed, eps));
      EXPECT_TRUE(r.holds) << "eps " << eps << " seed " << seed;
      EXPECT_NEAR(r.bound, 2 * eps + eps * eps / 2, 1e-9);
    }
  }
}

TEST(Lemma2Test, EqualWeightsTightenTheBound) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    LinearTwoLayerInstance in = sample_lemma2_instance(6, 6, seed, 0.3);
    in.w2 = in.w1;
    const Lemma2Result r = lemma2_check(in);
    EXPECT_LE(r.err, in.epsilon + in.epsilon * in.epsilon / 2 + 1e-9);
  }
}

TEST(Lemma2Test, NormViolationNamesTheNorm) {
  LinearTwoLayerInstance in = sample_lemma2_instance(6, 6, 1, 0.2);
  in.w2 = in.w2 * 2.5;
  try {
    lemma2_check(in);
    FAIL() << "expected a norm violation";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("W2"), std::string::npos);
  }
  EXPECT_NO_THROW(lemma2_check(in, /*enforce_norms=*/false));
}

TEST(Lemma2Test, SweepBoundIsMonotoneAndCsvHasOneRowPerTarget) {
  const std::vector<double> targets{0.0, 0.25, 0.5, 0.75, 1.0};
  const auto rows = lemma2_sweep(6, 6, 3, targets, 10);
  ASSERT_EQ(rows.size(), targets.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].held, 10);
    if (i > 0) EXPECT_GE(rows[i].max_bound, rows[i - 1].max_bound);
  }
  const std::string csv = lemma2_sweep_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(Lemma2Test, NegativeControlRuns) {
  const Lemma2Result r = lemma2_negative_control(6, 6, 2, 0.25);
  EXPECT_GT(r.err, 0.0);
  EXPECT_TRUE(std::isfinite(r.err));
}

}  // namespace
}  // namespace reuse

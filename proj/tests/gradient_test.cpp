#include <cmath>

#include "gtest/gtest.h"
#include "reuse/gradcheck.h"
#include "reuse/train.h"

namespace reuse {
namespace {

struct NamedSchedule {
  const char* name;
  ReuseSchedule schedule;
};

std::vector<NamedSchedule> all_variants() {
  return {
      {"baseline", ReuseSchedule::baseline()},   {"partial", ReuseSchedule::partial_layer(1)},
      {"full", ReuseSchedule::full_layer(1)},    {"full_p2", ReuseSchedule::full_layer(2)},
      {"alternate", ReuseSchedule::alternate(1)}, {"allend", ReuseSchedule::all_end(1)},
      {"skip", ReuseSchedule::skip(1)},
  };
}

TEST(GradientTest, AnalyticMatchesFiniteDifferencesForEverySchedule) {
  for (const auto& [name, schedule] : all_variants()) {
    for (std::uint64_t seed : {11u, 12u}) {
      const GradCheckReport report = run_gradcheck(tiny_gradcheck_config(schedule), seed);
      EXPECT_LT(report.max_relative_error, 1e-4)
          << name << " seed " << seed << " worst " << report.worst_parameter;
    }
  }
}

TEST(GradientTest, ReluModelAlsoChecks) {
  ModelConfig config = tiny_gradcheck_config(ReuseSchedule::partial_layer(1));
  config.activation = Activation::kRelu;
  const GradCheckReport report = run_gradcheck(config, 3);
  EXPECT_LT(report.max_relative_error, 1e-4) << report.worst_parameter;
}

TEST(GradientTest, CorruptedGradientIsCaught) {
  GradCheckOptions options;
  options.corrupt_gradient = true;
  const GradCheckReport report =
      run_gradcheck(tiny_gradcheck_config(ReuseSchedule::baseline()), 11, options);
  EXPECT_GT(report.max_relative_error, 1e-2);
}

TEST(GradientTest, ZeroUpstreamGradientGivesZeroGradients) {
  const ModelConfig config = tiny_gradcheck_config(ReuseSchedule::full_layer(1));
  Rng rng(1);
  const ModelParams params = ModelParams::init(config, rng);
  const ForwardResult fwd = transformer_forward({1, 2, 3, 4}, params, config);
  ModelParams grads = ModelParams::zeros_like(params);
  transformer_backward(fwd, Tensor2D(fwd.logits.rows(), fwd.logits.cols()), params, config, grads);
  for (double g : grads.flatten()) EXPECT_EQ(g, 0.0);
}

TEST(GradientTest, MissingCacheIsRejected) {
  const ModelConfig config = tiny_gradcheck_config(ReuseSchedule::baseline());
  Rng rng(1);
  const ModelParams params = ModelParams::init(config, rng);
  ModelParams grads = ModelParams::zeros_like(params);
  EXPECT_THROW(transformer_backward(ForwardResult{}, Tensor2D(1, 1), params, config, grads),
               std::invalid_argument);
}

// With layer 1's value projections zeroed, layer 1's scores reach the loss only
// through the heads of layer 2 that reuse them.
class ReuseRoutingTest : public ::testing::Test {
 protected:
  void SetUp() override {
    config_ = tiny_gradcheck_config(ReuseSchedule::full_layer(1));
    config_.layers = 2;
    Rng rng(21);
    params_ = ModelParams::init(config_, rng);
    for (Tensor2D& w : params_.layers[0].attn.w_v) w.set_zero();
    tokens_ = {3, 1, 4, 1, 5};
    targets_ = {9, 2, 6, 5, 3};
  }

  double loss(const ModelParams& p) const {
    return cross_entropy(transformer_forward(tokens_, p, config_).logits, targets_).loss_sum;
  }

  ModelParams analytic(const ModelConfig& config) const {
    ModelParams grads = ModelParams::zeros_like(params_);
    const ForwardResult fwd = transformer_forward(tokens_, params_, config);
    transformer_backward(fwd, cross_entropy(fwd.logits, targets_).dlogits, params_, config, grads);
    return grads;
  }

  ModelConfig config_;
  ModelParams params_;
  std::vector<int> tokens_, targets_;
};

TEST_F(ReuseRoutingTest, GradientReachesOriginLayerQueryWeights) {
  const ModelParams grads = analytic(config_);
  const Tensor2D& gq = grads.layers[0].attn.w_q[0];
  double numeric_max = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < gq.size(); ++i) {
    ModelParams plus = params_, minus = params_;
    plus.layers[0].attn.w_q[0].data()[i] += 1e-5;
    minus.layers[0].attn.w_q[0].data()[i] -= 1e-5;
    const double fd = (loss(plus) - loss(minus)) / 2e-5;
    numeric_max = std::max(numeric_max, std::abs(fd));
    worst = std::max(worst, std::abs(fd - gq.data()[i]) / std::max(std::abs(fd), 1e-6));
  }
  EXPECT_GT(numeric_max, 1e-4);
  EXPECT_GT(frobenius_norm(gq), 1e-4);
  EXPECT_LT(worst, 1e-4);
}

TEST_F(ReuseRoutingTest, DetachToggleStopsTheRoute) {
  ModelConfig detached = config_;
  detached.detach_reused_scores = true;
  const ModelParams grads = analytic(detached);
  EXPECT_EQ(frobenius_norm(grads.layers[0].attn.w_q[0]), 0.0);
  EXPECT_EQ(frobenius_norm(grads.layers[0].attn.w_k[1]), 0.0);
  // Value weights of the reuse layer still learn.
  EXPECT_GT(frobenius_norm(grads.layers[1].attn.w_v[0]), 0.0);
}

}  // namespace
}  // namespace reuse

#ifndef REUSE_THEORY_H_
#define REUSE_THEORY_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "reuse/numerics.h"

namespace reuse {

enum class WeightDistribution { kGaussian, kRademacher };

std::string_view distribution_name(WeightDistribution d);
WeightDistribution parse_distribution(std::string_view name);

// Two independent random heads scoring the same input:
//   Ã = X W_q W_kᵀ Xᵀ  (n x n, pre-softmax)
struct Lemma1Options {
  int d = 16;
  int n = 8;
  long samples = 100000;
  WeightDistribution distribution = WeightDistribution::kGaussian;
  std::uint64_t seed = 0;
  // Reuses head 1's weights for head 2, which makes the two score matrices equal.
  bool tie_heads = false;
  // Fixed input; drawn from the seed when absent. An all-zero X is rejected.
  std::optional<Tensor2D> x;
};

struct Lemma1Result {
  double lhs = 0.0;    // mean over samples and entries of (Ã₁ - Ã₂)²
  double rhs = 0.0;    // 2 * mean of Ã₁²
  double ratio = 0.0;  // lhs / rhs
  long samples = 0;
};

Lemma1Result lemma1_mc(const Lemma1Options& options);

// Two linear attention layers with residuals, ignoring the layer-1 shift of X.
struct LinearTwoLayerInstance {
  Tensor2D x;   // n x d
  Tensor2D w1;  // d x d
  Tensor2D w2;  // d x d
  Tensor2D a1;  // n x n, row-stochastic
  Tensor2D a2;  // n x n, row-stochastic
  double epsilon = 0.0;  // spectral norm of a1 - a2

  // Shared attention of the reuse construction, (a1 + a2) / 2.
  Tensor2D a_hat() const;
};

// Y = X + A₁XW₁ + A₂XW₂ + A₂A₁XW₁W₂
Tensor2D linear_two_layer_forward(const Tensor2D& x, const Tensor2D& a1, const Tensor2D& a2,
                                  const Tensor2D& w1, const Tensor2D& w2);

struct Lemma2Result {
  double epsilon = 0.0;
  double err = 0.0;    // spectral norm of Ŷ - Y
  double bound = 0.0;  // 2ε + ε²/2
  bool holds = false;  // err <= bound + 1e-9
};

// Throws std::invalid_argument naming the offending norm when ‖X‖, ‖W₁‖ or ‖W₂‖
// exceeds 1, unless enforce_norms is false (negative controls only).
Lemma2Result lemma2_check(const LinearTwoLayerInstance& instance, bool enforce_norms = true);

// A₁ is doubly stochastic (a random mixture of permutation matrices) and A₂ moves
// it toward a permutation matrix until ‖A₁ - A₂‖ equals epsilon_target. X and the
// W's are rescaled to spectral norm in [0.5, 1]. Targets above 2 are unreachable.
LinearTwoLayerInstance sample_lemma2_instance(int n, int d, std::uint64_t seed,
                                              double epsilon_target);

struct Lemma2SweepRow {
  double epsilon_target = 0.0;
  int trials = 0;
  int held = 0;
  double max_err = 0.0;
  double max_bound = 0.0;
  double max_err_over_bound = 0.0;  // 0 where the bound is 0
  double max_epsilon_deviation = 0.0;  // max |achieved ε - target| / max(target, 1e-12)
};

// Runs `trials` instances per target; trial t of target i uses seed
// Rng(seed).fork(i).fork(t).
std::vector<Lemma2SweepRow> lemma2_sweep(int n, int d, std::uint64_t seed,
                                         const std::vector<double>& targets, int trials);
std::string lemma2_sweep_csv(const std::vector<Lemma2SweepRow>& rows);

// Same instance family with ‖W₁‖ forced to 3; the bound is not expected to hold.
Lemma2Result lemma2_negative_control(int n, int d, std::uint64_t seed, double epsilon_target);

}  // namespace reuse

#endif  // REUSE_THEORY_H_

#include "reuse/theory.h"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace reuse {

namespace {

constexpr double kNormSlack = 1e-9;

Tensor2D random_weights(Rng& rng, int rows, int cols, WeightDistribution dist) {
  Tensor2D w(rows, cols);
  for (double& v : w.values()) {
    v = dist == WeightDistribution::kGaussian ? rng.normal() : rng.rademacher();
  }
  return w;
}

// Scales m so that its spectral norm is drawn uniformly from [lo, hi].
Tensor2D rescale(const Tensor2D& m, Rng& rng, double lo, double hi) {
  const SpectralNormResult s = spectral_norm(m);
  if (s.degenerate) throw NumericError("cannot rescale a zero matrix");
  return m * ((lo + (hi - lo) * rng.uniform()) / s.value);
}

std::vector<int> random_permutation(Rng& rng, int n) {
  std::vector<int> p(n);
  for (int i = 0; i < n; ++i) p[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(p[i], p[rng.index(i + 1)]);
  return p;
}

Tensor2D permutation_matrix(const std::vector<int>& p) {
  const std::size_t n = p.size();
  Tensor2D m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, p[i]) = 1.0;
  return m;
}

// Convex combination of a few random permutation matrices.
Tensor2D doubly_stochastic(Rng& rng, int n) {
  const int parts = 2 + static_cast<int>(rng.index(3));
  std::vector<double> weights(parts);
  double total = 0.0;
  for (double& w : weights) {
    w = -std::log(1.0 - rng.uniform());  // Exp(1) gives Dirichlet(1, .., 1)
    total += w;
  }
  Tensor2D a(n, n);
  for (int k = 0; k < parts; ++k) {
    add_inplace(a, permutation_matrix(random_permutation(rng, n)) * (weights[k] / total));
  }
  return a;
}

void check_norm(const Tensor2D& m, const char* name) {
  const double s = spectral_norm(m).value;
  if (s > 1.0 + kNormSlack) {
    std::ostringstream msg;
    msg << "spectral norm of " << name << " is " << s << ", must be <= 1";
    throw std::invalid_argument(msg.str());
  }
}

}  // namespace

std::string_view distribution_name(WeightDistribution d) {
  return d == WeightDistribution::kGaussian ? "gaussian" : "rademacher";
}

WeightDistribution parse_distribution(std::string_view name) {
  if (name == "gaussian") return WeightDistribution::kGaussian;
  if (name == "rademacher") return WeightDistribution::kRademacher;
  throw std::invalid_argument("unknown weight distribution \"" + std::string(name) +
                              "\" (expected gaussian|rademacher)");
}

Lemma1Result lemma1_mc(const Lemma1Options& o) {
  if (o.d < 1 || o.n < 1) throw std::invalid_argument("lemma1 needs d >= 1 and n >= 1");
  if (o.samples < 10000) {
    throw std::invalid_argument("lemma1 needs at least 10000 samples, got " +
                                std::to_string(o.samples));
  }
  const Rng root(o.seed);
  Tensor2D x;
  if (o.x) {
    x = *o.x;
    if (x.rows() != static_cast<std::size_t>(o.n) || x.cols() != static_cast<std::size_t>(o.d)) {
      throw ShapeError("lemma1 input must be " + std::to_string(o.n) + "x" +
                       std::to_string(o.d) + ", got " + x.shape_string());
    }
  } else {
    Rng xr = root.fork(0);
    x = xr.gaussian(o.n, o.d, 1.0);
  }
  if (frobenius_norm(x) == 0.0) throw std::invalid_argument("lemma1 input X is all zeros");

  Rng rng = root.fork(1);
  double sum_diff = 0.0;
  double sum_sq = 0.0;
  for (long s = 0; s < o.samples; ++s) {
    const Tensor2D wq1 = random_weights(rng, o.d, o.d, o.distribution);
    const Tensor2D wk1 = random_weights(rng, o.d, o.d, o.distribution);
    const Tensor2D a1 = matmul_nt(matmul(x, matmul_nt(wq1, wk1)), x);
    Tensor2D a2;
    if (o.tie_heads) {
      a2 = matmul_nt(matmul(x, matmul_nt(wq1, wk1)), x);
    } else {
      const Tensor2D wq2 = random_weights(rng, o.d, o.d, o.distribution);
      const Tensor2D wk2 = random_weights(rng, o.d, o.d, o.distribution);
      a2 = matmul_nt(matmul(x, matmul_nt(wq2, wk2)), x);
    }
    for (std::size_t i = 0; i < a1.size(); ++i) {
      const double diff = a1.data()[i] - a2.data()[i];
      sum_diff += diff * diff;
      sum_sq += a1.data()[i] * a1.data()[i];
    }
  }
  const double count = static_cast<double>(o.samples) * o.n * o.n;
  Lemma1Result r;
  r.samples = o.samples;
  r.lhs = sum_diff / count;
  r.rhs = 2.0 * sum_sq / count;
  r.ratio = r.rhs > 0.0 ? r.lhs / r.rhs : 0.0;
  return r;
}

Tensor2D LinearTwoLayerInstance::a_hat() const { return (a1 + a2) * 0.5; }

Tensor2D linear_two_layer_forward(const Tensor2D& x, const Tensor2D& a1, const Tensor2D& a2,
                                  const Tensor2D& w1, const Tensor2D& w2) {
  const std::size_t n = x.rows();
  const std::size_t d = x.cols();
  auto expect = [](const Tensor2D& m, std::size_t r, std::size_t c, const char* name) {
    if (m.rows() != r || m.cols() != c) {
      throw ShapeError(std::string(name) + " must be " + std::to_string(r) + "x" +
                       std::to_string(c) + ", got " + m.shape_string());
    }
  };
  expect(a1, n, n, "A1");
  expect(a2, n, n, "A2");
  expect(w1, d, d, "W1");
  expect(w2, d, d, "W2");
  const Tensor2D a1xw1 = matmul(matmul(a1, x), w1);
  Tensor2D y = x;
  add_inplace(y, a1xw1);
  add_inplace(y, matmul(matmul(a2, x), w2));
  add_inplace(y, matmul(a2, matmul(a1xw1, w2)));
  return y;
}

Lemma2Result lemma2_check(const LinearTwoLayerInstance& in, bool enforce_norms) {
  if (enforce_norms) {
    check_norm(in.x, "X");
    check_norm(in.w1, "W1");
    check_norm(in.w2, "W2");
  }
  if (!is_row_stochastic(in.a1, 1e-10)) throw std::invalid_argument("A1 is not row-stochastic");
  if (!is_row_stochastic(in.a2, 1e-10)) throw std::invalid_argument("A2 is not row-stochastic");
  const Tensor2D y = linear_two_layer_forward(in.x, in.a1, in.a2, in.w1, in.w2);
  const Tensor2D a_hat = in.a_hat();
  // W₃ = W₁ and W₄ = W₂ in the reuse construction.
  const Tensor2D y_hat = linear_two_layer_forward(in.x, a_hat, a_hat, in.w1, in.w2);
  Lemma2Result r;
  r.epsilon = in.epsilon;
  const Tensor2D diff = y_hat - y;
  r.err = frobenius_norm(diff) == 0.0 ? 0.0 : spectral_norm(diff).value;
  r.bound = 2.0 * in.epsilon + in.epsilon * in.epsilon / 2.0;
  r.holds = r.err <= r.bound + kNormSlack;
  return r;
}

LinearTwoLayerInstance sample_lemma2_instance(int n, int d, std::uint64_t seed,
                                              double epsilon_target) {
  if (n < 2 || d < 1) throw std::invalid_argument("lemma2 instances need n >= 2 and d >= 1");
  if (!(epsilon_target >= 0.0)) throw std::invalid_argument("epsilon target must be >= 0");
  if (epsilon_target > 2.0) {
    throw std::invalid_argument("epsilon target " + std::to_string(epsilon_target) +
                                " is unreachable: stochastic attention differs by at most 2");
  }
  Rng rng(seed);
  LinearTwoLayerInstance in;
  in.x = rescale(rng.gaussian(n, d, 1.0), rng, 0.5, 1.0);
  in.w1 = rescale(rng.gaussian(d, d, 1.0), rng, 0.5, 1.0);
  in.w2 = rescale(rng.gaussian(d, d, 1.0), rng, 0.5, 1.0);
  in.a1 = doubly_stochastic(rng, n);
  if (epsilon_target == 0.0) {
    in.a2 = in.a1;
    in.epsilon = 0.0;
    return in;
  }
  for (int attempt = 0; attempt < 64; ++attempt) {
    const Tensor2D b = permutation_matrix(random_permutation(rng, n));
    const double reach = spectral_norm(in.a1 - b).value;
    if (reach < epsilon_target) continue;
    const double t = epsilon_target / reach;
    in.a2 = in.a1 * (1.0 - t) + b * t;
    in.epsilon = spectral_norm(in.a1 - in.a2).value;
    if (std::abs(in.epsilon - epsilon_target) <= 0.1 * epsilon_target) return in;
  }
  throw std::invalid_argument("could not reach epsilon target " + std::to_string(epsilon_target) +
                              " at n = " + std::to_string(n));
}

std::vector<Lemma2SweepRow> lemma2_sweep(int n, int d, std::uint64_t seed,
                                         const std::vector<double>& targets, int trials) {
  if (trials < 1) throw std::invalid_argument("lemma2 sweep needs at least one trial");
  const Rng root(seed);
  std::vector<Lemma2SweepRow> rows;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    Lemma2SweepRow row;
    row.epsilon_target = targets[i];
    row.trials = trials;
    const Rng target_rng = root.fork(i);
    for (int t = 0; t < trials; ++t) {
      const LinearTwoLayerInstance in =
          sample_lemma2_instance(n, d, target_rng.fork(t).next_u64(), targets[i]);
      const Lemma2Result r = lemma2_check(in);
      row.held += r.holds ? 1 : 0;
      row.max_err = std::max(row.max_err, r.err);
      row.max_bound = std::max(row.max_bound, r.bound);
      if (r.bound > 0.0) row.max_err_over_bound = std::max(row.max_err_over_bound, r.err / r.bound);
      row.max_epsilon_deviation =
          std::max(row.max_epsilon_deviation,
                   std::abs(r.epsilon - targets[i]) / std::max(targets[i], 1e-12));
    }
    rows.push_back(row);
  }
  return rows;
}

std::string lemma2_sweep_csv(const std::vector<Lemma2SweepRow>& rows) {
  std::ostringstream out;
  out.precision(10);
  out << "epsilon_target,trials,held,max_err,max_bound,max_err_over_bound,max_epsilon_deviation\n";
  for (const Lemma2SweepRow& r : rows) {
    out << r.epsilon_target << ',' << r.trials << ',' << r.held << ',' << r.max_err << ','
        << r.max_bound << ',' << r.max_err_over_bound << ',' << r.max_epsilon_deviation << '\n';
  }
  return out.str();
}

Lemma2Result lemma2_negative_control(int n, int d, std::uint64_t seed, double epsilon_target) {
  LinearTwoLayerInstance in = sample_lemma2_instance(n, d, seed, epsilon_target);
  in.w1 = in.w1 * (3.0 / spectral_norm(in.w1).value);
  return lemma2_check(in, /*enforce_norms=*/false);
}

}  // namespace reuse

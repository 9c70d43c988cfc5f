#ifndef REUSE_TESTS_TEST_UTIL_H_
#define REUSE_TESTS_TEST_UTIL_H_

// Independent reference implementations used as oracles by the tests. Nothing
// here calls into the library's matmul/softmax paths.

#include <cmath>
#include <cstddef>
#include <vector>

#include "reuse/numerics.h"

namespace reuse::testing {

inline Tensor2D naive_matmul(const Tensor2D& a, const Tensor2D& b) {
  Tensor2D out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      out(i, j) = acc;
    }
  return out;
}

inline Tensor2D naive_transpose(const Tensor2D& a) {
  Tensor2D out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

// Softmax written without max subtraction; fine for the small logits used in tests.
inline Tensor2D naive_softmax_rows(const Tensor2D& logits, double scale) {
  Tensor2D out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) z += std::exp(scale * logits(i, j));
    for (std::size_t j = 0; j < logits.cols(); ++j) out(i, j) = std::exp(scale * logits(i, j)) / z;
  }
  return out;
}

inline Tensor2D random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Tensor2D m(rows, cols);
  for (double& v : m.values()) v = scale * (2.0 * rng.uniform() - 1.0);
  return m;
}

// Row-stochastic matrix with rows drawn from a Dirichlet(1) distribution.
inline Tensor2D random_stochastic(Rng& rng, std::size_t n, std::size_t cols = 0) {
  if (cols == 0) cols = n;
  Tensor2D m(n, cols);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      m(i, j) = -std::log(1.0 - rng.uniform());
      sum += m(i, j);
    }
    for (std::size_t j = 0; j < cols; ++j) m(i, j) /= sum;
  }
  return m;
}

// Equation for TV similarity written directly from its definition.
inline double oracle_tv_similarity(const Tensor2D& a, const Tensor2D& b) {
  double total = 0.0;
  for (std::size_t p = 0; p < a.rows(); ++p) {
    double l1 = 0.0;
    for (std::size_t q = 0; q < a.cols(); ++q) l1 += std::abs(a(p, q) - b(p, q));
    total += 0.5 * l1;
  }
  return 1.0 - total / static_cast<double>(a.rows());
}

}  // namespace reuse::testing

#endif  // REUSE_TESTS_TEST_UTIL_H_

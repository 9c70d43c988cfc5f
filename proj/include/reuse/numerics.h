#ifndef REUSE_NUMERICS_H_
#define REUSE_NUMERICS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace reuse {

// Raised for any shape disagreement between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a NaN/Inf shows up where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Dense row-major matrix of doubles. Activations are sequence-major
// (one token per row), so attention matrices are row-stochastic.
class Tensor2D {
 public:
  Tensor2D() = default;
  Tensor2D(std::size_t rows, std::size_t cols);
  Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data);
  Tensor2D(std::initializer_list<std::initializer_list<double>> rows);

  static Tensor2D identity(std::size_t n);
  static Tensor2D filled(std::size_t rows, std::size_t cols, double value);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  std::string shape_string() const;
  bool same_shape(const Tensor2D& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  void set_zero();

  // Bitwise equality of shape and payload.
  bool operator==(const Tensor2D& other) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);
// aᵀ·b and a·bᵀ without materializing the transpose.
Tensor2D matmul_tn(const Tensor2D& a, const Tensor2D& b);
Tensor2D matmul_nt(const Tensor2D& a, const Tensor2D& b);
// out += aᵀ·b, used for gradient accumulation.
void matmul_tn_accumulate(const Tensor2D& a, const Tensor2D& b, Tensor2D& out);

Tensor2D transpose(const Tensor2D& m);
Tensor2D operator+(const Tensor2D& a, const Tensor2D& b);
Tensor2D operator-(const Tensor2D& a, const Tensor2D& b);
Tensor2D operator*(double s, const Tensor2D& m);
inline Tensor2D operator*(const Tensor2D& m, double s) { return s * m; }
void add_inplace(Tensor2D& dst, const Tensor2D& src);
double max_abs_diff(const Tensor2D& a, const Tensor2D& b);
double frobenius_norm(const Tensor2D& m);

// Softmax of scale·logits along each row, stabilized by row-max subtraction.
Tensor2D row_softmax(const Tensor2D& logits, double scale);

// Largest deviation of any row sum from 1, or +inf if an entry is negative.
double row_stochastic_error(const Tensor2D& m);
bool is_row_stochastic(const Tensor2D& m, double tol);

struct SpectralNormResult {
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false;  // zero matrix
};

// Largest singular value by power iteration on mᵀm from a seeded start vector.
SpectralNormResult spectral_norm(const Tensor2D& m, int max_iters = 10000,
                                 double tol = 1e-13, std::uint64_t seed = 0x5eed);

// Central differences (f(θ+h·eᵢ) − f(θ−h·eᵢ)) / 2h for every coordinate.
std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& loss_fn,
    std::span<const double> theta, double h);

// Seeded 64-bit generator; the only source of randomness in the project.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }
  double uniform();                              // [0, 1)
  double normal(double mean = 0.0, double stddev = 1.0);
  double rademacher() { return (engine_() >> 63) ? 1.0 : -1.0; }
  std::size_t index(std::size_t n);              // uniform in [0, n)

  Tensor2D gaussian(std::size_t rows, std::size_t cols, double stddev);

  // Independent child stream; children of the same parent and tag agree.
  Rng fork(std::uint64_t tag) const;

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace reuse

#endif  // REUSE_NUMERICS_H_

#include "reuse/numerics.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

namespace reuse {

namespace {

void require_finite(const Tensor2D& m, const char* op) {
  if (!m.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite input " + m.shape_string());
  }
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor2D& a, const Tensor2D& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

// splitmix64 finalizer, used to derive child seeds.
std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Tensor2D::Tensor2D(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Tensor2D: payload of length " + std::to_string(data_.size()) +
                     " does not fit " + shape_string());
  }
}

Tensor2D::Tensor2D(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Tensor2D: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Tensor2D Tensor2D::identity(std::size_t n) {
  Tensor2D m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Tensor2D Tensor2D::filled(std::size_t rows, std::size_t cols, double value) {
  return Tensor2D(rows, cols, std::vector<double>(rows * cols, value));
}

std::string Tensor2D::shape_string() const {
  std::ostringstream os;
  os << "[" << rows_ << "x" << cols_ << "]";
  return os.str();
}

bool Tensor2D::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor2D::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

bool Tensor2D::operator==(const Tensor2D& other) const {
  return same_shape(other) &&
         (data_.empty() ||
          std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(double)) == 0);
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.rows()) shape_mismatch("matmul", a, b);
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Tensor2D out(n, m);
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = po + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

void matmul_tn_accumulate(const Tensor2D& a, const Tensor2D& b, Tensor2D& out) {
  if (a.rows() != b.rows()) shape_mismatch("matmul_tn", a, b);
  if (out.rows() != a.cols() || out.cols() != b.cols()) shape_mismatch("matmul_tn(out)", out, b);
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t r = 0; r < n; ++r) {
    const double* arow = pa + r * k;
    const double* brow = pb + r * m;
    for (std::size_t i = 0; i < k; ++i) {
      const double av = arow[i];
      double* orow = po + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
}

Tensor2D matmul_tn(const Tensor2D& a, const Tensor2D& b) {
  Tensor2D out(a.cols(), b.cols());
  matmul_tn_accumulate(a, b, out);
  return out;
}

Tensor2D matmul_nt(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.cols()) shape_mismatch("matmul_nt", a, b);
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  Tensor2D out(n, m);
  const double* pa = a.data();
  const double* pb = b.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = pa + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = pb + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      out(i, j) = acc;
    }
  }
  return out;
}

Tensor2D transpose(const Tensor2D& m) {
  Tensor2D out(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(j, i) = m(i, j);
  return out;
}

Tensor2D operator+(const Tensor2D& a, const Tensor2D& b) {
  if (!a.same_shape(b)) shape_mismatch("add", a, b);
  Tensor2D out = a;
  add_inplace(out, b);
  return out;
}

Tensor2D operator-(const Tensor2D& a, const Tensor2D& b) {
  if (!a.same_shape(b)) shape_mismatch("sub", a, b);
  Tensor2D out = a;
  auto o = out.values();
  auto s = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= s[i];
  return out;
}

Tensor2D operator*(double s, const Tensor2D& m) {
  Tensor2D out = m;
  for (double& v : out.values()) v *= s;
  return out;
}

void add_inplace(Tensor2D& dst, const Tensor2D& src) {
  if (!dst.same_shape(src)) shape_mismatch("add_inplace", dst, src);
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

double max_abs_diff(const Tensor2D& a, const Tensor2D& b) {
  if (!a.same_shape(b)) shape_mismatch("max_abs_diff", a, b);
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(a.data()[i] - b.data()[i]));
  return worst;
}

double frobenius_norm(const Tensor2D& m) {
  double acc = 0.0;
  for (double v : m.values()) acc += v * v;
  return std::sqrt(acc);
}

Tensor2D row_softmax(const Tensor2D& logits, double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw std::invalid_argument("row_softmax: scale must be positive and finite");
  }
  require_finite(logits, "row_softmax");
  Tensor2D out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(scale * (in[c] - mx));
      sum += o[c];
    }
    const double inv = 1.0 / sum;
    for (double& v : o) v *= inv;
  }
  return out;
}

double row_stochastic_error(const Tensor2D& m) {
  double worst = 0.0;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    double sum = 0.0;
    for (double v : m.row(r)) {
      if (!(v >= 0.0) || !std::isfinite(v)) return std::numeric_limits<double>::infinity();
      sum += v;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return worst;
}

bool is_row_stochastic(const Tensor2D& m, double tol) {
  return m.rows() > 0 && row_stochastic_error(m) <= tol;
}

SpectralNormResult spectral_norm(const Tensor2D& m, int max_iters, double tol,
                                 std::uint64_t seed) {
  SpectralNormResult result;
  if (frobenius_norm(m) == 0.0) {
    result.degenerate = true;
    result.converged = true;
    return result;
  }
  Rng rng(seed);
  const std::size_t n = m.cols();
  Tensor2D v(n, 1);
  for (double& x : v.values()) x = rng.normal();

  auto normalize = [](Tensor2D& x) {
    const double norm = frobenius_norm(x);
    for (double& e : x.values()) e /= norm;
    return norm;
  };
  normalize(v);

  double sigma = 0.0;
  for (int it = 1; it <= max_iters; ++it) {
    Tensor2D mv = matmul(m, v);
    const double next_sigma = frobenius_norm(mv);
    result.iterations = it;
    if (next_sigma == 0.0) {
      // Start vector fell in the null space; restart from a fresh direction.
      for (double& x : v.values()) x = rng.normal();
      normalize(v);
      continue;
    }
    v = matmul_tn(m, mv);
    normalize(v);
    const bool settled = std::abs(next_sigma - sigma) <= tol * next_sigma;
    sigma = next_sigma;
    if (settled) {
      result.converged = true;
      break;
    }
  }
  result.value = sigma;
  return result;
}

std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& loss_fn,
    std::span<const double> theta, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: step must be positive");
  std::vector<double> point(theta.begin(), theta.end());
  std::vector<double> grad(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = point[i];
    point[i] = saved + h;
    const double plus = loss_fn(point);
    point[i] = saved - h;
    const double minus = loss_fn(point);
    point[i] = saved;
    grad[i] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

double Rng::uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

double Rng::normal(double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(engine_);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::index: empty range");
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
}

Tensor2D Rng::gaussian(std::size_t rows, std::size_t cols, double stddev) {
  Tensor2D out(rows, cols);
  for (double& v : out.values()) v = normal(0.0, stddev);
  return out;
}

Rng Rng::fork(std::uint64_t tag) const { return Rng(mix64(seed_ ^ mix64(tag))); }

}  // namespace reuse

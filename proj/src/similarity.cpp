#include "reuse/similarity.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace reuse {

namespace {

constexpr double kCaptureStochasticTol = 1e-10;
constexpr double kInputStochasticTol = 1e-8;

double tv_similarity_unchecked(const Tensor2D& a, const Tensor2D& b) {
  const std::size_t n = a.rows(), m = a.cols();
  const double* pa = a.data();
  const double* pb = b.data();
  double tv_total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double l1 = 0.0;
    for (std::size_t q = 0; q < m; ++q) l1 += std::abs(pa[p * m + q] - pb[p * m + q]);
    tv_total += 0.5 * l1;
  }
  return 1.0 - tv_total / static_cast<double>(n);
}

}  // namespace

AttentionCapture::AttentionCapture(int layers, int heads, int seq_len)
    : layers_(layers), heads_(heads), seq_len_(seq_len) {
  if (layers < 1 || heads < 1 || seq_len < 1) {
    throw std::invalid_argument("AttentionCapture: L, H and n must be positive");
  }
  layer_ids_.resize(layers);
  std::iota(layer_ids_.begin(), layer_ids_.end(), 0);
}

void AttentionCapture::add_example(std::vector<Tensor2D> matrices) {
  if (static_cast<int>(matrices.size()) != layers_ * heads_) {
    throw std::invalid_argument("AttentionCapture: expected " + std::to_string(layers_ * heads_) +
                                " matrices per example, got " + std::to_string(matrices.size()));
  }
  for (std::size_t i = 0; i < matrices.size(); ++i) {
    const Tensor2D& m = matrices[i];
    if (static_cast<int>(m.rows()) != seq_len_ || static_cast<int>(m.cols()) != seq_len_) {
      throw ShapeError("AttentionCapture: matrix " + m.shape_string() +
                       " in a capture of sequence length " + std::to_string(seq_len_) +
                       " (mixed lengths are not supported)");
    }
    if (row_stochastic_error(m) > kCaptureStochasticTol) {
      throw std::invalid_argument("AttentionCapture: matrix for layer " +
                                  std::to_string(i / heads_) + " head " +
                                  std::to_string(i % heads_) + " is not row-stochastic");
    }
  }
  examples_.push_back(std::move(matrices));
}

const Tensor2D& AttentionCapture::at(int example, int layer, int head) const {
  if (example < 0 || example >= examples() || layer < 0 || layer >= layers_ || head < 0 ||
      head >= heads_) {
    throw std::out_of_range("AttentionCapture: index out of range");
  }
  return examples_[example][layer * heads_ + head];
}

void AttentionCapture::set_layer_ids(std::vector<int> ids) {
  if (static_cast<int>(ids.size()) != layers_) {
    throw std::invalid_argument("AttentionCapture: layer id count mismatch");
  }
  layer_ids_ = std::move(ids);
}

double tv_similarity(const Tensor2D& a, const Tensor2D& b) {
  if (!a.same_shape(b) || a.empty()) {
    throw ShapeError("tv_similarity: shapes " + a.shape_string() + " and " + b.shape_string());
  }
  if (row_stochastic_error(a) > kInputStochasticTol ||
      row_stochastic_error(b) > kInputStochasticTol) {
    throw std::invalid_argument("tv_similarity: inputs must be row-stochastic");
  }
  return tv_similarity_unchecked(a, b);
}

SimilarityAccumulator::SimilarityAccumulator(int layers, int heads)
    : layers_(layers),
      heads_(heads),
      sums_(static_cast<std::size_t>(layers) * heads * layers * heads, 0.0) {}

std::size_t SimilarityAccumulator::index(int l, int h, int lp, int hp) const {
  return ((static_cast<std::size_t>(l) * heads_ + h) * layers_ + lp) * heads_ + hp;
}

void SimilarityAccumulator::add_example(const std::vector<Tensor2D>& matrices) {
  if (static_cast<int>(matrices.size()) != layers_ * heads_) {
    throw std::invalid_argument("SimilarityAccumulator: wrong matrix count");
  }
  for (int l = 0; l < layers_; ++l)
    for (int h = 0; h < heads_; ++h)
      for (int lp = 0; lp < layers_; ++lp)
        for (int hp = 0; hp < heads_; ++hp) {
          sums_[index(l, h, lp, hp)] +=
              tv_similarity_unchecked(matrices[l * heads_ + h], matrices[lp * heads_ + hp]);
        }
  ++examples_;
}

void SimilarityAccumulator::add_capture(const AttentionCapture& capture, int first, int count) {
  if (capture.layers() != layers_ || capture.heads() != heads_) {
    throw std::invalid_argument("SimilarityAccumulator: capture has a different (L, H)");
  }
  const int end = count < 0 ? capture.examples() : first + count;
  for (int t = first; t < end; ++t) add_example(capture.example(t));
}

double SimilarityAccumulator::mean(int l, int h, int lp, int hp) const {
  if (examples_ == 0) throw std::invalid_argument("SimilarityAccumulator: no examples");
  return sums_[index(l, h, lp, hp)] / static_cast<double>(examples_);
}

BestHead SimilarityAccumulator::best_head(int l, int h, int lp) const {
  if (l < 0 || l >= layers_ || lp < 0 || lp >= layers_ || h < 0 || h >= heads_) {
    throw std::out_of_range("best_head_similarity: index out of range");
  }
  BestHead best{mean(l, h, lp, 0), 0};
  for (int hp = 1; hp < heads_; ++hp) {
    const double m = mean(l, h, lp, hp);
    if (m > best.similarity) best = {m, hp};
  }
  return best;
}

Tensor2D SimilarityAccumulator::all_pairs() const {
  Tensor2D out(layers_, layers_);
  for (int l = 0; l < layers_; ++l)
    for (int lp = 0; lp < layers_; ++lp) {
      double best = best_head(l, 0, lp).similarity;
      for (int h = 1; h < heads_; ++h) best = std::max(best, best_head(l, h, lp).similarity);
      out(l, lp) = best;
    }
  return out;
}

std::vector<std::vector<double>> SimilarityAccumulator::adjacent_profiles() const {
  std::vector<std::vector<double>> profiles;
  for (int l = 1; l < layers_; ++l) {
    std::vector<double> values;
    for (int h = 0; h < heads_; ++h) values.push_back(best_head(l, h, l - 1).similarity);
    std::sort(values.begin(), values.end());
    profiles.push_back(std::move(values));
  }
  return profiles;
}

namespace {

SimilarityAccumulator accumulate(const AttentionCapture& capture) {
  if (capture.examples() == 0) throw std::invalid_argument("similarity: empty capture");
  SimilarityAccumulator acc(capture.layers(), capture.heads());
  acc.add_capture(capture);
  return acc;
}

}  // namespace

BestHead best_head_similarity(const AttentionCapture& capture, int l, int h, int lp) {
  if (capture.examples() == 0) throw std::invalid_argument("similarity: empty capture");
  if (l < 0 || l >= capture.layers() || lp < 0 || lp >= capture.layers() || h < 0 ||
      h >= capture.heads()) {
    throw std::out_of_range("best_head_similarity: index out of range");
  }
  // Only the (l, h) -> (l', *) sums are needed here.
  std::vector<double> sums(capture.heads(), 0.0);
  for (int t = 0; t < capture.examples(); ++t)
    for (int hp = 0; hp < capture.heads(); ++hp)
      sums[hp] += tv_similarity_unchecked(capture.at(t, l, h), capture.at(t, lp, hp));
  BestHead best{sums[0] / capture.examples(), 0};
  for (int hp = 1; hp < capture.heads(); ++hp) {
    const double m = sums[hp] / capture.examples();
    if (m > best.similarity) best = {m, hp};
  }
  return best;
}

Tensor2D all_pairs_best(const AttentionCapture& capture) { return accumulate(capture).all_pairs(); }

std::vector<std::vector<double>> adjacent_rank_profile(const AttentionCapture& capture) {
  if (capture.layers() < 2) throw std::invalid_argument("adjacent_rank_profile: needs L >= 2");
  return accumulate(capture).adjacent_profiles();
}

std::vector<ConvergencePoint> convergence_curve(const AttentionCapture& capture,
                                                const std::vector<int>& sample_sizes) {
  for (int s : sample_sizes) {
    if (s < 1 || s > capture.examples()) {
      throw std::invalid_argument("convergence_curve: sample size " + std::to_string(s) +
                                  " outside [1, " + std::to_string(capture.examples()) + "]");
    }
  }
  std::vector<int> sorted = sample_sizes;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  SimilarityAccumulator acc(capture.layers(), capture.heads());
  std::vector<ConvergencePoint> snapshots;
  for (int size : sorted) {
    acc.add_capture(capture, acc.examples(), size - acc.examples());
    snapshots.push_back({size, acc.all_pairs()});
  }
  std::vector<ConvergencePoint> out;
  for (int s : sample_sizes) {
    const auto it = std::find_if(snapshots.begin(), snapshots.end(),
                                 [s](const ConvergencePoint& p) { return p.examples == s; });
    out.push_back(*it);
  }
  return out;
}

SimilarityReport analyze(const AttentionCapture& capture, std::string model, std::string dataset) {
  const SimilarityAccumulator acc = accumulate(capture);
  SimilarityReport report;
  report.all_pairs = acc.all_pairs();
  report.adjacent_profiles = acc.adjacent_profiles();
  report.examples = acc.examples();
  report.layer_ids = capture.layer_ids();
  report.model = std::move(model);
  report.dataset = std::move(dataset);
  return report;
}

double mean_adjacent_similarity(const Tensor2D& all_pairs) {
  if (all_pairs.rows() < 2) return 1.0;
  double total = 0.0;
  for (std::size_t l = 1; l < all_pairs.rows(); ++l) total += all_pairs(l, l - 1);
  return total / static_cast<double>(all_pairs.rows() - 1);
}

}  // namespace reuse

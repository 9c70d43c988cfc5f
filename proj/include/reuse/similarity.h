#ifndef REUSE_SIMILARITY_H_
#define REUSE_SIMILARITY_H_

#include <string>
#include <vector>

#include "reuse/numerics.h"

namespace reuse {

// Attention score matrices A[t][l][h] for T examples of one sequence length.
class AttentionCapture {
 public:
  AttentionCapture(int layers, int heads, int seq_len);

  int layers() const { return layers_; }
  int heads() const { return heads_; }
  int seq_len() const { return seq_len_; }
  int examples() const { return static_cast<int>(examples_.size()); }

  // matrices are ordered (l, h) row-major: index l * H + h. Each must be
  // n x n and row-stochastic within 1e-10.
  void add_example(std::vector<Tensor2D> matrices);
  const Tensor2D& at(int example, int layer, int head) const;
  const std::vector<Tensor2D>& example(int t) const { return examples_.at(t); }

  // Model layer index of each captured layer (skip layers are not captured).
  const std::vector<int>& layer_ids() const { return layer_ids_; }
  void set_layer_ids(std::vector<int> ids);

 private:
  int layers_;
  int heads_;
  int seq_len_;
  std::vector<int> layer_ids_;
  std::vector<std::vector<Tensor2D>> examples_;
};

// 1 - (1/n) Σ_p ½‖a[p,:] - b[p,:]‖₁ for row-stochastic a, b of equal shape.
double tv_similarity(const Tensor2D& a, const Tensor2D& b);

struct BestHead {
  double similarity = 0.0;
  int head = 0;
};

// Running per-(l, h, l', h') sums of S(A_{l,h}, A_{l',h'}) over examples, so
// that captures never need to be held in memory in full.
class SimilarityAccumulator {
 public:
  SimilarityAccumulator(int layers, int heads);

  void add_example(const std::vector<Tensor2D>& matrices);
  void add_capture(const AttentionCapture& capture, int first = 0, int count = -1);
  int examples() const { return examples_; }

  double mean(int l, int h, int lp, int hp) const;
  // c_{(l,h),l'}: the example-mean is taken first, then the max over target
  // heads h'; ties go to the lowest head index.
  BestHead best_head(int l, int h, int lp) const;
  // Entry (l, l') = max_h c_{(l,h),l'}; rows are source layers.
  Tensor2D all_pairs() const;
  // For l = 2..L, the H values c_{(l,h),l-1} sorted ascending (rank 1 first).
  std::vector<std::vector<double>> adjacent_profiles() const;

 private:
  std::size_t index(int l, int h, int lp, int hp) const;

  int layers_;
  int heads_;
  int examples_ = 0;
  std::vector<double> sums_;
};

BestHead best_head_similarity(const AttentionCapture& capture, int l, int h, int lp);
Tensor2D all_pairs_best(const AttentionCapture& capture);
std::vector<std::vector<double>> adjacent_rank_profile(const AttentionCapture& capture);

struct ConvergencePoint {
  int examples = 0;
  Tensor2D all_pairs;
};
// all_pairs on nested prefixes of the examples, one point per requested size
// (returned in the order given).
std::vector<ConvergencePoint> convergence_curve(const AttentionCapture& capture,
                                                const std::vector<int>& sample_sizes);

struct SimilarityReport {
  Tensor2D all_pairs;
  std::vector<std::vector<double>> adjacent_profiles;
  int examples = 0;
  std::vector<int> layer_ids;
  std::string model;
  std::string dataset;
};

SimilarityReport analyze(const AttentionCapture& capture, std::string model, std::string dataset);

// Mean of all_pairs(l, l-1) over l >= 2: how close each layer is to its predecessor.
double mean_adjacent_similarity(const Tensor2D& all_pairs);

}  // namespace reuse

#endif  // REUSE_SIMILARITY_H_

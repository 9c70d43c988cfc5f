#ifndef REUSE_TRAIN_H_
#define REUSE_TRAIN_H_

#include <cstdint>
#include <vector>

#include "reuse/model.h"

namespace reuse {

inline constexpr int kIgnoreTarget = -1;

// One training sequence. targets[i] == kIgnoreTarget means position i carries no loss.
struct Example {
  std::vector<int> tokens;
  std::vector<int> targets;
};

struct CrossEntropy {
  double loss_sum = 0.0;
  int counted = 0;
  int correct = 0;  // argmax predictions equal to the target
  Tensor2D dlogits;  // d(loss_sum)/d(logits)
};

CrossEntropy cross_entropy(const Tensor2D& logits, const std::vector<int>& targets);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 1.0;  // global gradient-norm clip; <= 0 disables
};

struct AdamState {
  ModelParams m;
  ModelParams v;
  std::int64_t step = 0;

  static AdamState zeros_like(const ModelParams& params);
};

struct StepResult {
  double loss = 0.0;  // mean over counted target positions
  int counted = 0;
  int correct = 0;
  double grad_norm = 0.0;
};

// Mean cross-entropy gradient over a batch (sequences processed in order).
StepResult batch_gradient(const std::vector<Example>& batch, const ModelParams& params,
                          const ModelConfig& config, ModelParams& grads);

// One Adam update. Throws NumericError on a non-finite loss or gradient.
StepResult train_step(const std::vector<Example>& batch, ModelParams& params, AdamState& state,
                      const ModelConfig& config, const AdamConfig& adam, double learning_rate);

}  // namespace reuse

#endif  // REUSE_TRAIN_H_

#include "reuse/train.h"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace reuse {

CrossEntropy cross_entropy(const Tensor2D& logits, const std::vector<int>& targets) {
  if (targets.size() != logits.rows()) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for logits " +
                     logits.shape_string());
  }
  CrossEntropy ce;
  ce.dlogits = Tensor2D(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const int target = targets[r];
    if (target == kIgnoreTarget) continue;
    if (target < 0 || static_cast<std::size_t>(target) >= logits.cols()) {
      throw std::invalid_argument("cross_entropy: target " + std::to_string(target) +
                                  " outside vocabulary");
    }
    auto row = logits.row(r);
    const auto best = std::max_element(row.begin(), row.end());
    const double mx = *best;
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - mx);
    const double log_z = mx + std::log(sum);
    ce.loss_sum += log_z - row[target];
    ce.counted += 1;
    if (best - row.begin() == target) ce.correct += 1;
    auto g = ce.dlogits.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) g[c] = std::exp(row[c] - log_z);
    g[target] -= 1.0;
  }
  return ce;
}

AdamState AdamState::zeros_like(const ModelParams& params) {
  return {ModelParams::zeros_like(params), ModelParams::zeros_like(params), 0};
}

StepResult batch_gradient(const std::vector<Example>& batch, const ModelParams& params,
                          const ModelConfig& config, ModelParams& grads) {
  StepResult result;
  std::vector<ForwardResult> forwards;
  std::vector<CrossEntropy> losses;
  forwards.reserve(batch.size());
  for (const Example& ex : batch) {
    forwards.push_back(transformer_forward(ex.tokens, params, config));
    losses.push_back(cross_entropy(forwards.back().logits, ex.targets));
    result.counted += losses.back().counted;
    result.correct += losses.back().correct;
    result.loss += losses.back().loss_sum;
  }
  if (result.counted == 0) return result;
  const double inv = 1.0 / result.counted;
  result.loss *= inv;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Tensor2D dlogits = inv * losses[i].dlogits;
    transformer_backward(forwards[i], dlogits, params, config, grads);
    forwards[i] = ForwardResult{};
  }
  return result;
}

StepResult train_step(const std::vector<Example>& batch, ModelParams& params, AdamState& state,
                      const ModelConfig& config, const AdamConfig& adam, double learning_rate) {
  ModelParams grads = ModelParams::zeros_like(params);
  StepResult result = batch_gradient(batch, params, config, grads);
  state.step += 1;
  if (!std::isfinite(result.loss)) {
    std::ostringstream msg;
    msg << "train_step: non-finite loss " << result.loss << " at step " << state.step;
    throw NumericError(msg.str());
  }

  double sq = 0.0;
  grads.for_each([&](const std::string&, const Tensor2D& g) {
    for (double v : g.values()) sq += v * v;
  });
  result.grad_norm = std::sqrt(sq);
  if (!std::isfinite(result.grad_norm)) {
    throw NumericError("train_step: non-finite gradient at step " + std::to_string(state.step));
  }
  const double clip = (adam.clip_norm > 0.0 && result.grad_norm > adam.clip_norm)
                          ? adam.clip_norm / result.grad_norm
                          : 1.0;

  const double bias1 = 1.0 - std::pow(adam.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(adam.beta2, static_cast<double>(state.step));

  std::vector<Tensor2D*> g_list, m_list, v_list;
  grads.for_each([&](const std::string&, Tensor2D& t) { g_list.push_back(&t); });
  state.m.for_each([&](const std::string&, Tensor2D& t) { m_list.push_back(&t); });
  state.v.for_each([&](const std::string&, Tensor2D& t) { v_list.push_back(&t); });
  std::size_t idx = 0;
  params.for_each([&](const std::string&, Tensor2D& p) {
    double* pd = p.data();
    const double* gd = g_list[idx]->data();
    double* md = m_list[idx]->data();
    double* vd = v_list[idx]->data();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = gd[i] * clip;
      md[i] = adam.beta1 * md[i] + (1.0 - adam.beta1) * g;
      vd[i] = adam.beta2 * vd[i] + (1.0 - adam.beta2) * g * g;
      const double mhat = md[i] / bias1;
      const double vhat = vd[i] / bias2;
      pd[i] -= learning_rate * mhat / (std::sqrt(vhat) + adam.epsilon);
    }
    ++idx;
  });
  return result;
}

}  // namespace reuse

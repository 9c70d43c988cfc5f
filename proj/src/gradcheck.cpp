#include "reuse/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "reuse/train.h"

namespace reuse {

ModelConfig tiny_gradcheck_config(const ReuseSchedule& schedule) {
  ModelConfig config;
  config.layers = 3;
  config.heads = 2;
  config.d_model = 8;
  config.d_ff = 16;
  config.vocab = 11;
  config.max_len = 8;
  config.activation = Activation::kGelu;
  config.schedule = schedule;
  // Large enough that attention is far from uniform and gradients are O(1e-2) or more.
  config.init_std = 0.5;
  return config;
}

GradCheckReport run_gradcheck(const ModelConfig& config, std::uint64_t seed,
                              const GradCheckOptions& options) {
  Rng rng(seed);
  ModelParams params = ModelParams::init(config, rng);
  Example ex;
  for (int i = 0; i < options.seq_len; ++i) {
    ex.tokens.push_back(static_cast<int>(rng.index(config.vocab)));
    ex.targets.push_back(static_cast<int>(rng.index(config.vocab)));
  }

  ModelParams grads = ModelParams::zeros_like(params);
  const ForwardResult fwd = transformer_forward(ex.tokens, params, config);
  const CrossEntropy ce = cross_entropy(fwd.logits, ex.targets);
  transformer_backward(fwd, ce.dlogits, params, config, grads);
  std::vector<double> analytic = grads.flatten();
  if (options.corrupt_gradient && !analytic.empty()) {
    analytic[analytic.size() / 2] += 0.1 + std::abs(analytic[analytic.size() / 2]);
  }

  const std::vector<double> theta = params.flatten();
  ModelParams probe = params;
  const auto loss = [&](std::span<const double> point) {
    probe.assign_flat(point);
    return cross_entropy(transformer_forward(ex.tokens, probe, config).logits, ex.targets)
        .loss_sum;
  };
  const std::vector<double> numeric = finite_diff_grad(loss, theta, options.step);

  std::vector<std::string> names;
  params.for_each([&](const std::string& name, const Tensor2D& t) {
    names.insert(names.end(), t.size(), name);
  });

  GradCheckReport report;
  report.parameters_checked = theta.size();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), options.floor});
    const double rel = std::abs(analytic[i] - numeric[i]) / denom;
    if (rel > report.max_relative_error || !std::isfinite(rel)) {
      report.max_relative_error = rel;
      report.worst_parameter = names[i];
    }
  }
  return report;
}

}  // namespace reuse

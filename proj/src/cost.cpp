#include "reuse/cost.h"

#include <sstream>
#include <stdexcept>

namespace reuse {

LayerCost attention_layer_cost(Count d, Count n, Count heads, Count reuse_heads) {
  if (d < 1 || n < 1 || heads < 1) throw std::invalid_argument("d, n and H must be positive");
  if (d % heads != 0) {
    throw std::invalid_argument("d=" + std::to_string(d) + " is not divisible by H=" +
                                std::to_string(heads));
  }
  if (reuse_heads < 0 || reuse_heads > heads) {
    throw std::invalid_argument("K=" + std::to_string(reuse_heads) + " outside [0, H=" +
                                std::to_string(heads) + "]");
  }
  const Count d_head = d / heads;
  const Count factor = 2 * heads - reuse_heads;
  return {factor * d_head * n * (2 * d + n), factor * 2 * d * d_head};
}

CostReport model_cost(const ModelConfig& config, Count n, const CostOptions& options,
                      std::string name) {
  config.validate();
  if (n < 1 || n > config.max_len) {
    throw std::invalid_argument("n=" + std::to_string(n) + " outside [1, max_len=" +
                                std::to_string(config.max_len) + "]");
  }
  if (options.flops_per_mac < 1) throw std::invalid_argument("flops_per_mac must be >= 1");
  const Count c = options.flops_per_mac;
  const Count d = config.d_model;
  const Count h = config.heads;
  const Count dh = config.d_head();
  const Count ln = options.count_layer_norm ? 2 * d : 0;

  CostReport r;
  r.name = std::move(name);
  r.n = n;
  auto add = [&](std::string entry, Count params, Count flops) {
    r.breakdown.push_back({std::move(entry), params, c * flops});
  };
  add("embed.token", Count{config.vocab} * d, 0);
  add("embed.position", Count{config.max_len} * d, 0);
  const std::vector<LayerPlan> plan = config.plan();
  for (int l = 0; l < config.layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l);
    const LayerPlan& p = plan[l];
    if (!p.skip) {
      const Count exact = p.exact_heads;
      if (ln > 0) add(prefix + ".ln_attn", ln, 0);
      // W_Q, W_K for exact heads; W_V for all heads; W_O.
      add(prefix + ".attn.proj", 2 * exact * d * dh + 2 * d * d,
          2 * exact * n * d * dh + 2 * n * d * d);
      add(prefix + ".attn.scores", 0, exact * n * n * dh);
      add(prefix + ".attn.apply", 0, h * n * n * dh);
    }
    if (ln > 0) add(prefix + ".ln_ff", ln, 0);
    add(prefix + ".ff", 2 * d * config.d_ff, 2 * n * d * config.d_ff);
  }
  if (ln > 0) add("ln_final", ln, 0);
  add("head", options.tie_embeddings ? 0 : d * config.vocab,
      options.head_positions * d * config.vocab);

  for (const CostEntry& e : r.breakdown) {
    r.params_total += e.params;
    r.flops_total += e.flops;
  }
  return r;
}

void set_baseline(CostReport& report, const CostReport& baseline) {
  if (baseline.params_total <= 0 || baseline.flops_total <= 0) {
    throw std::invalid_argument("baseline report has zero cost");
  }
  report.baseline_name = baseline.name;
  report.params_ratio = static_cast<double>(report.params_total) / baseline.params_total;
  report.flops_ratio = static_cast<double>(report.flops_total) / baseline.flops_total;
}

std::vector<CostReport> cost_sweep(const ModelConfig& config, Count n,
                                   const std::vector<int>& k_values, const CostOptions& options) {
  const ReuseSchedule& s = config.schedule;
  if (s.variant() != ReuseVariant::kPartialLayer && s.variant() != ReuseVariant::kFullLayer) {
    throw std::invalid_argument("cost sweeps need a partial or full reuse schedule, got " +
                                s.describe());
  }
  ModelConfig base = config;
  base.schedule = ReuseSchedule::baseline();
  const CostReport baseline = model_cost(base, n, options, "baseline");
  std::vector<CostReport> rows;
  for (int k : k_values) {
    ModelConfig c = config;
    c.schedule = s.variant() == ReuseVariant::kPartialLayer
                     ? ReuseSchedule::partial_layer(k)
                     : ReuseSchedule::full_layer(s.declared_layers(), k);
    CostReport r = model_cost(c, n, options, c.schedule.describe());
    set_baseline(r, baseline);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string cost_sweep_csv(const std::vector<CostReport>& rows, const std::vector<int>& k_values) {
  if (rows.size() != k_values.size()) throw std::invalid_argument("one K per row expected");
  std::ostringstream out;
  out.precision(10);
  out << "K,params,flops,params_ratio,flops_ratio\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << k_values[i] << ',' << rows[i].params_total << ',' << rows[i].flops_total << ','
        << rows[i].params_ratio << ',' << rows[i].flops_ratio << '\n';
  }
  return out.str();
}

ModelConfig bert_base_config(const ReuseSchedule& schedule) {
  ModelConfig c;
  c.layers = 12;
  c.heads = 12;
  c.d_model = 768;
  c.d_ff = 3072;
  c.vocab = 30522;
  c.max_len = 512;
  c.schedule = schedule;
  return c;
}

ModelConfig bert_large_config(const ReuseSchedule& schedule) {
  ModelConfig c = bert_base_config(schedule);
  c.layers = 24;
  c.heads = 16;
  c.d_model = 1024;
  c.d_ff = 4096;
  return c;
}

}  // namespace reuse

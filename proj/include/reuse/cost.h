#ifndef REUSE_COST_H_
#define REUSE_COST_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "reuse/model.h"

namespace reuse {

using Count = std::int64_t;

struct LayerCost {
  Count flops = 0;   // one FLOP per multiply-add
  Count params = 0;
};

// One attention sublayer with K of H heads reusing scores:
//   flops  = (1 - K/2H) (4 d² n + 2 d n²)
//   params = (1 - K/2H) 4 d²
// Both are integers because d is a multiple of H.
LayerCost attention_layer_cost(Count d, Count n, Count heads, Count reuse_heads);

struct CostOptions {
  int flops_per_mac = 1;         // applied to every FLOP entry alike
  bool tie_embeddings = false;   // output head shares the token embedding
  bool count_layer_norm = true;
  // Positions whose output-head logits are counted as FLOPs (0 = head excluded).
  Count head_positions = 0;
};

struct CostEntry {
  std::string name;  // "embed.token", "layer3.attn.proj", "layer3.attn.scores", ...
  Count params = 0;
  Count flops = 0;
};

struct CostReport {
  std::string name;
  Count n = 0;
  Count params_total = 0;
  Count flops_total = 0;
  std::vector<CostEntry> breakdown;
  std::optional<std::string> baseline_name;
  double params_ratio = 1.0;
  double flops_ratio = 1.0;
};

CostReport model_cost(const ModelConfig& config, Count n, const CostOptions& options = {},
                      std::string name = "model");

// Fills the ratio fields of `report` against `baseline`.
void set_baseline(CostReport& report, const CostReport& baseline);

// Reports for the config's schedule at each K, with ratios against the same
// architecture with no reuse. The schedule must be kPartialLayer or kFullLayer.
std::vector<CostReport> cost_sweep(const ModelConfig& config, Count n,
                                   const std::vector<int>& k_values,
                                   const CostOptions& options = {});

std::string cost_sweep_csv(const std::vector<CostReport>& rows, const std::vector<int>& k_values);

// Encoder shapes used for the ratio tables; max_len = 512, vocab = 30522.
ModelConfig bert_base_config(const ReuseSchedule& schedule = {});
ModelConfig bert_large_config(const ReuseSchedule& schedule = {});

}  // namespace reuse

#endif  // REUSE_COST_H_

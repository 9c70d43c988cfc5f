#include "reuse/schedule.h"

#include <algorithm>
#include <stdexcept>

namespace reuse {

namespace {

constexpr std::pair<ReuseVariant, std::string_view> kNames[] = {
    {ReuseVariant::kBaseline, "baseline"},   {ReuseVariant::kPartialLayer, "partial"},
    {ReuseVariant::kFullLayer, "full"},      {ReuseVariant::kAlternate, "alternate"},
    {ReuseVariant::kAllEnd, "allend"},       {ReuseVariant::kSkip, "skip"},
};

[[noreturn]] void reject(const std::string& what) {
  throw std::invalid_argument("reuse schedule: " + what);
}

}  // namespace

std::string_view variant_name(ReuseVariant v) {
  for (const auto& [variant, name] : kNames)
    if (variant == v) return name;
  return "unknown";
}

ReuseVariant parse_variant(std::string_view name) {
  for (const auto& [variant, n] : kNames)
    if (n == name) return variant;
  reject("unknown variant '" + std::string(name) +
         "' (expected baseline|partial|full|alternate|allend|skip)");
}

ReuseSchedule ReuseSchedule::partial_layer(int reuse_heads) {
  if (reuse_heads < 0) reject("K must be non-negative");
  return {ReuseVariant::kPartialLayer, -1, reuse_heads};
}

ReuseSchedule ReuseSchedule::full_layer(int reuse_layers, int reuse_heads) {
  if (reuse_layers < 0) reject("P must be non-negative");
  return {ReuseVariant::kFullLayer, reuse_layers, reuse_heads < 0 ? -1 : reuse_heads};
}

ReuseSchedule ReuseSchedule::alternate(int reuse_layers) {
  if (reuse_layers < 0) reject("P must be non-negative");
  return {ReuseVariant::kAlternate, reuse_layers, -1};
}

ReuseSchedule ReuseSchedule::all_end(int reuse_layers) {
  if (reuse_layers < 0) reject("P must be non-negative");
  return {ReuseVariant::kAllEnd, reuse_layers, -1};
}

ReuseSchedule ReuseSchedule::skip(int reuse_layers) {
  if (reuse_layers < 0) reject("P must be non-negative");
  return {ReuseVariant::kSkip, reuse_layers, -1};
}

int ReuseSchedule::reuse_layers(int layers) const {
  if (variant_ == ReuseVariant::kPartialLayer) return std::max(layers - 2, 0);
  return p_;
}

int ReuseSchedule::reuse_heads(int heads) const {
  if (variant_ == ReuseVariant::kBaseline) return 0;
  return k_ < 0 ? heads : k_;
}

void ReuseSchedule::validate(int layers, int heads) const {
  if (layers < 1 || heads < 1) reject("L and H must be positive");
  const int p = reuse_layers(layers);
  const int k = reuse_heads(heads);
  if (k > heads) reject("K=" + std::to_string(k) + " exceeds H=" + std::to_string(heads));
  if (p > layers - 1) {
    reject("P=" + std::to_string(p) + " must be below L=" + std::to_string(layers));
  }
  switch (variant_) {
    case ReuseVariant::kAlternate:
      if (2 * p > layers) reject("alternate reuse needs 2P <= L");
      break;
    case ReuseVariant::kAllEnd:
      if (p > 0 && p > layers - 2) reject("allend reuse needs P <= L-2");
      break;
    default:
      break;
  }
}

std::vector<LayerPlan> ReuseSchedule::plan(int layers, int heads) const {
  validate(layers, heads);
  const int p = reuse_layers(layers);
  const int k = reuse_heads(heads);
  std::vector<LayerPlan> out(layers, LayerPlan{heads, false});
  // 1-based layer index l maps to out[l - 1]; layer 1 is never touched.
  switch (variant_) {
    case ReuseVariant::kBaseline:
      break;
    case ReuseVariant::kPartialLayer:
    case ReuseVariant::kFullLayer:
      for (int l = 2; l <= p + 1; ++l) out[l - 1].exact_heads = heads - k;
      break;
    case ReuseVariant::kAlternate:
      for (int i = 1; i <= p; ++i) out[2 * i - 1].exact_heads = 0;
      break;
    case ReuseVariant::kAllEnd:
      for (int l = layers - p; l <= layers - 1 && p > 0; ++l) out[l - 1].exact_heads = 0;
      break;
    case ReuseVariant::kSkip:
      for (int l = 2; l <= p + 1; ++l) out[l - 1] = LayerPlan{0, true};
      break;
  }
  return out;
}

std::string ReuseSchedule::describe() const {
  std::string s(variant_name(variant_));
  if (variant_ == ReuseVariant::kBaseline) return s;
  if (variant_ != ReuseVariant::kPartialLayer) s += " P=" + std::to_string(p_);
  s += k_ < 0 ? " K=H" : " K=" + std::to_string(k_);
  return s;
}

}  // namespace reuse

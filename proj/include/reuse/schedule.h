#ifndef REUSE_SCHEDULE_H_
#define REUSE_SCHEDULE_H_

#include <string>
#include <string_view>
#include <vector>

namespace reuse {

enum class ReuseVariant { kBaseline, kPartialLayer, kFullLayer, kAlternate, kAllEnd, kSkip };

std::string_view variant_name(ReuseVariant v);
ReuseVariant parse_variant(std::string_view name);

// What one layer does with attention.
struct LayerPlan {
  int exact_heads = 0;  // heads computing their own scores, always the leading ones
  bool skip = false;    // no attention sublayer at all

  int reused_heads(int heads) const { return skip ? 0 : heads - exact_heads; }
  bool operator==(const LayerPlan&) const = default;
};

// Which layers reuse attention scores and how many heads they reuse.
//
// Layer indices below are 1-based to match the usual description:
//   kBaseline     every layer exact
//   kPartialLayer layers 2..L-1 reuse K heads (P = L-2), first and last exact
//   kFullLayer    layers 2..P+1 reuse K heads, K = H by default
//   kAlternate    layers 2, 4, .., 2P reuse all heads
//   kAllEnd       layers L-P..L-1 reuse all heads, last layer exact
//   kSkip         layers 2..P+1 have no attention sublayer
class ReuseSchedule {
 public:
  ReuseSchedule() = default;

  static ReuseSchedule baseline() { return {}; }
  static ReuseSchedule partial_layer(int reuse_heads);
  // reuse_heads < 0 means "all heads of the layer".
  static ReuseSchedule full_layer(int reuse_layers, int reuse_heads = -1);
  static ReuseSchedule alternate(int reuse_layers);
  static ReuseSchedule all_end(int reuse_layers);
  static ReuseSchedule skip(int reuse_layers);

  ReuseVariant variant() const { return variant_; }
  // P and K as declared: -1 means derived (P of kPartialLayer) or "all heads" (K).
  int declared_layers() const { return p_; }
  int declared_heads() const { return k_; }
  // Reuse layer count; for kPartialLayer this resolves to L-2.
  int reuse_layers(int layers) const;
  // Reused heads per reuse layer; -1 resolves to H.
  int reuse_heads(int heads) const;

  // Throws std::invalid_argument when (variant, P, K) does not fit (L, H).
  void validate(int layers, int heads) const;
  std::vector<LayerPlan> plan(int layers, int heads) const;

  std::string describe() const;
  bool operator==(const ReuseSchedule&) const = default;

 private:
  ReuseSchedule(ReuseVariant v, int p, int k) : variant_(v), p_(p), k_(k) {}

  ReuseVariant variant_ = ReuseVariant::kBaseline;
  int p_ = 0;   // -1 for kPartialLayer (derived from L)
  int k_ = 0;   // -1 for "all heads"
};

}  // namespace reuse

#endif  // REUSE_SCHEDULE_H_

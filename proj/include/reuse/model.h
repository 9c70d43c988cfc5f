#ifndef REUSE_MODEL_H_
#define REUSE_MODEL_H_

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "reuse/numerics.h"
#include "reuse/schedule.h"

namespace reuse {

enum class Activation { kRelu, kGelu };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

struct ModelConfig {
  int layers = 2;
  int heads = 2;
  int d_model = 32;
  int d_ff = 128;
  int vocab = 16;
  int max_len = 32;
  Activation activation = Activation::kGelu;
  ReuseSchedule schedule;
  double init_std = 0.02;
  // When set, reused heads read their scores as constants: no gradient flows
  // back into the layer that computed them.
  bool detach_reused_scores = false;

  int d_head() const { return d_model / heads; }
  void validate() const;
  std::vector<LayerPlan> plan() const { return schedule.plan(layers, heads); }
};

struct LayerNormParams {
  Tensor2D gain;  // 1 x d
  Tensor2D bias;  // 1 x d
};

// Exact heads own W_Q/W_K; every head owns W_V. Reuse heads are the
// trailing heads of the layer.
struct AttentionParams {
  std::vector<Tensor2D> w_q;  // exact heads, d x d_head
  std::vector<Tensor2D> w_k;  // exact heads, d x d_head
  std::vector<Tensor2D> w_v;  // all heads,   d x d_head
  Tensor2D w_o;               // d x d

  std::size_t parameter_count() const;
};

struct FeedForwardParams {
  Tensor2D w1;  // d x d_ff
  Tensor2D w2;  // d_ff x d
};

struct LayerParams {
  LayerPlan plan;
  LayerNormParams ln_attn;  // unused (empty) on skip layers
  AttentionParams attn;     // empty on skip layers
  LayerNormParams ln_ff;
  FeedForwardParams ff;
};

struct ModelParams {
  Tensor2D token_embedding;     // vocab x d
  Tensor2D position_embedding;  // max_len x d
  std::vector<LayerParams> layers;
  LayerNormParams ln_final;
  Tensor2D w_out;  // d x vocab

  static ModelParams init(const ModelConfig& config, Rng& rng);
  static ModelParams zeros_like(const ModelParams& other);

  // Visits every tensor in a fixed order with a stable dotted name.
  template <typename F>
  void for_each(F&& f);
  template <typename F>
  void for_each(F&& f) const;

  std::size_t parameter_count() const;
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);
};

// A score matrix together with the (layer, head) that computed it.
// Layers and heads are 0-based here.
struct ScoreRef {
  std::shared_ptr<const Tensor2D> scores;
  int origin_layer = 0;
  int origin_head = 0;
};

// The H most recently computed score matrices handed from one layer to the next.
struct ReuseBuffer {
  std::vector<ScoreRef> entries;
};

Tensor2D attention_scores(const Tensor2D& z, const Tensor2D& w_q, const Tensor2D& w_k,
                          int d_head);

// concat_h(A_h · z W_V,h) · W_O for H score matrices.
Tensor2D attention_apply(const std::vector<const Tensor2D*>& scores, const Tensor2D& z,
                         const std::vector<Tensor2D>& w_v, const Tensor2D& w_o);

// φ(y W₁) W₂, no residual.
Tensor2D feedforward(const Tensor2D& y, const FeedForwardParams& ff, Activation activation);

struct LayerNormCache {
  Tensor2D normalized;   // x̂
  std::vector<double> inv_std;
};
Tensor2D layer_norm(const Tensor2D& x, const LayerNormParams& p, LayerNormCache* cache = nullptr);

// Intermediate values of one attention sublayer, kept for the backward pass.
struct AttentionCache {
  Tensor2D input;  // residual stream entering the sublayer
  LayerNormCache norm;
  Tensor2D z;  // normalized input
  std::vector<Tensor2D> q, k;
  std::vector<Tensor2D> v;
  Tensor2D concat;  // n x d, head outputs side by side
};

struct AttentionBlockOutput {
  Tensor2D y;                   // x + Attn(LN(x))
  ReuseBuffer buffer;           // R_l handed to the next layer
  std::vector<ScoreRef> heads;  // all H score matrices used by this layer
  AttentionCache cache;
};

// One pre-norm attention sublayer with residual. layer_index is 0-based;
// layer 0 must be fully exact and ignores previous. Exact heads 0..E-1 compute
// scores; head E+j reuses previous.entries[j] (shared, so bitwise identical).
AttentionBlockOutput reuse_multihead_forward(int layer_index, const Tensor2D& x,
                                             const ReuseBuffer& previous,
                                             const LayerParams& params, const ModelConfig& config);

struct LayerCapture {
  bool skip = false;
  std::vector<ScoreRef> heads;  // empty on skip layers
};

struct LayerTrace {
  bool skip = false;
  AttentionCache attn;
  Tensor2D hidden;  // residual stream entering the feed-forward sublayer
  LayerNormCache ff_norm;
  Tensor2D ff_in;
  Tensor2D ff_pre;
  Tensor2D ff_act;
};

struct ForwardResult {
  Tensor2D logits;  // n x vocab
  std::vector<LayerCapture> capture;
  // Backward-pass state.
  std::vector<int> tokens;
  std::vector<LayerTrace> trace;
  Tensor2D final_hidden;
  LayerNormCache final_norm;
  Tensor2D final_normed;
};

ForwardResult transformer_forward(const std::vector<int>& tokens, const ModelParams& params,
                                  const ModelConfig& config);

// Accumulates dLoss/dParams into grads given dLoss/dLogits.
void transformer_backward(const ForwardResult& forward, const Tensor2D& dlogits,
                          const ModelParams& params, const ModelConfig& config,
                          ModelParams& grads);

// ---------------------------------------------------------------------------

template <typename F>
void ModelParams::for_each(F&& f) {
  std::as_const(*this).for_each([&](const std::string& name, const Tensor2D& t) {
    f(name, const_cast<Tensor2D&>(t));
  });
}

template <typename F>
void ModelParams::for_each(F&& f) const {
  f(std::string("embed.token"), token_embedding);
  f(std::string("embed.position"), position_embedding);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerParams& lp = layers[l];
    const std::string prefix = "layer" + std::to_string(l) + ".";
    if (!lp.plan.skip) {
      f(prefix + "ln_attn.gain", lp.ln_attn.gain);
      f(prefix + "ln_attn.bias", lp.ln_attn.bias);
      for (std::size_t h = 0; h < lp.attn.w_q.size(); ++h) {
        f(prefix + "attn.w_q." + std::to_string(h), lp.attn.w_q[h]);
        f(prefix + "attn.w_k." + std::to_string(h), lp.attn.w_k[h]);
      }
      for (std::size_t h = 0; h < lp.attn.w_v.size(); ++h)
        f(prefix + "attn.w_v." + std::to_string(h), lp.attn.w_v[h]);
      f(prefix + "attn.w_o", lp.attn.w_o);
    }
    f(prefix + "ln_ff.gain", lp.ln_ff.gain);
    f(prefix + "ln_ff.bias", lp.ln_ff.bias);
    f(prefix + "ff.w1", lp.ff.w1);
    f(prefix + "ff.w2", lp.ff.w2);
  }
  f(std::string("ln_final.gain"), ln_final.gain);
  f(std::string("ln_final.bias"), ln_final.bias);
  f(std::string("head.w_out"), w_out);
}

}  // namespace reuse

#endif  // REUSE_MODEL_H_

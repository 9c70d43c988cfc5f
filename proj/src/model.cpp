#include "reuse/model.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace reuse {

namespace {

constexpr double kLayerNormEps = 1e-5;

[[noreturn]] void config_error(const std::string& what) {
  throw std::invalid_argument("model config: " + what);
}

LayerNormParams make_layer_norm(int d) {
  return {Tensor2D::filled(1, d, 1.0), Tensor2D(1, d)};
}

double activate(double x, Activation a) {
  if (a == Activation::kRelu) return x > 0.0 ? x : 0.0;
  return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
}

double activate_grad(double x, Activation a) {
  if (a == Activation::kRelu) return x > 0.0 ? 1.0 : 0.0;
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Tensor2D column_block(const Tensor2D& m, std::size_t first, std::size_t width) {
  Tensor2D out(m.rows(), width);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < width; ++c) out(r, c) = m(r, first + c);
  return out;
}

void write_column_block(Tensor2D& dst, const Tensor2D& block, std::size_t first) {
  for (std::size_t r = 0; r < block.rows(); ++r)
    for (std::size_t c = 0; c < block.cols(); ++c) dst(r, first + c) = block(r, c);
}

// Gradient of x ↦ LN(x) given dy; accumulates gain/bias gradients.
Tensor2D layer_norm_backward(const Tensor2D& dy, const LayerNormCache& cache,
                             const LayerNormParams& p, LayerNormParams& grads) {
  const std::size_t n = dy.rows(), d = dy.cols();
  Tensor2D dx(n, d);
  std::vector<double> dxhat(d);
  for (std::size_t r = 0; r < n; ++r) {
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double g = dy(r, c);
      const double xhat = cache.normalized(r, c);
      grads.gain(0, c) += g * xhat;
      grads.bias(0, c) += g;
      dxhat[c] = g * p.gain(0, c);
      mean_dxhat += dxhat[c];
      mean_dxhat_xhat += dxhat[c] * xhat;
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    for (std::size_t c = 0; c < d; ++c) {
      dx(r, c) = cache.inv_std[r] *
                 (dxhat[c] - mean_dxhat - cache.normalized(r, c) * mean_dxhat_xhat);
    }
  }
  return dx;
}

void check_tokens(const std::vector<int>& tokens, const ModelConfig& config) {
  if (tokens.empty()) throw std::invalid_argument("transformer_forward: empty sequence");
  if (static_cast<int>(tokens.size()) > config.max_len) {
    throw std::invalid_argument("transformer_forward: sequence of length " +
                                std::to_string(tokens.size()) + " exceeds max_len " +
                                std::to_string(config.max_len));
  }
  for (int t : tokens) {
    if (t < 0 || t >= config.vocab) {
      throw std::invalid_argument("transformer_forward: token " + std::to_string(t) +
                                  " outside vocabulary of size " + std::to_string(config.vocab));
    }
  }
}

}  // namespace

std::string_view activation_name(Activation a) { return a == Activation::kRelu ? "relu" : "gelu"; }

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "gelu") return Activation::kGelu;
  config_error("unknown activation '" + std::string(name) + "' (expected relu|gelu)");
}

void ModelConfig::validate() const {
  if (layers < 1 || heads < 1 || d_model < 1 || d_ff < 1 || vocab < 1 || max_len < 1) {
    config_error("layers, heads, d_model, d_ff, vocab and max_len must be positive");
  }
  if (d_model % heads != 0) {
    config_error("d_model=" + std::to_string(d_model) + " is not divisible by heads=" +
                 std::to_string(heads));
  }
  if (!(init_std > 0.0)) config_error("init_std must be positive");
  schedule.validate(layers, heads);
}

std::size_t AttentionParams::parameter_count() const {
  std::size_t count = w_o.size();
  for (const auto& w : w_q) count += w.size();
  for (const auto& w : w_k) count += w.size();
  for (const auto& w : w_v) count += w.size();
  return count;
}

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  const int d = config.d_model, dh = config.d_head();
  const double s = config.init_std;
  ModelParams p;
  p.token_embedding = rng.gaussian(config.vocab, d, s);
  p.position_embedding = rng.gaussian(config.max_len, d, s);
  for (const LayerPlan& plan : config.plan()) {
    LayerParams layer;
    layer.plan = plan;
    if (!plan.skip) {
      layer.ln_attn = make_layer_norm(d);
      for (int h = 0; h < plan.exact_heads; ++h) {
        layer.attn.w_q.push_back(rng.gaussian(d, dh, s));
        layer.attn.w_k.push_back(rng.gaussian(d, dh, s));
      }
      for (int h = 0; h < config.heads; ++h) layer.attn.w_v.push_back(rng.gaussian(d, dh, s));
      layer.attn.w_o = rng.gaussian(d, d, s);
    }
    layer.ln_ff = make_layer_norm(d);
    layer.ff.w1 = rng.gaussian(d, config.d_ff, s);
    layer.ff.w2 = rng.gaussian(config.d_ff, d, s);
    p.layers.push_back(std::move(layer));
  }
  p.ln_final = make_layer_norm(d);
  p.w_out = rng.gaussian(d, config.vocab, s);
  return p;
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
  ModelParams z = other;
  z.for_each([](const std::string&, Tensor2D& t) { t.set_zero(); });
  return z;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t count = 0;
  for_each([&](const std::string&, const Tensor2D& t) { count += t.size(); });
  return count;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for_each([&](const std::string&, const Tensor2D& t) {
    flat.insert(flat.end(), t.values().begin(), t.values().end());
  });
  return flat;
}

void ModelParams::assign_flat(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw ShapeError("assign_flat: expected " + std::to_string(parameter_count()) +
                     " values, got " + std::to_string(values.size()));
  }
  std::size_t offset = 0;
  for_each([&](const std::string&, Tensor2D& t) {
    std::copy_n(values.begin() + offset, t.size(), t.data());
    offset += t.size();
  });
}

Tensor2D attention_scores(const Tensor2D& z, const Tensor2D& w_q, const Tensor2D& w_k,
                          int d_head) {
  if (z.cols() != w_q.rows() || !w_q.same_shape(w_k) ||
      static_cast<int>(w_q.cols()) != d_head) {
    throw ShapeError("attention_scores: input " + z.shape_string() + ", W_Q " +
                     w_q.shape_string() + ", W_K " + w_k.shape_string() + ", d_head " +
                     std::to_string(d_head));
  }
  const Tensor2D q = matmul(z, w_q);
  const Tensor2D k = matmul(z, w_k);
  return row_softmax(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(d_head)));
}

Tensor2D attention_apply(const std::vector<const Tensor2D*>& scores, const Tensor2D& z,
                         const std::vector<Tensor2D>& w_v, const Tensor2D& w_o) {
  if (scores.size() != w_v.size() || scores.empty()) {
    throw ShapeError("attention_apply: " + std::to_string(scores.size()) +
                     " score matrices for " + std::to_string(w_v.size()) + " value projections");
  }
  const std::size_t n = z.rows(), d = z.cols(), dh = w_v.front().cols();
  if (dh * w_v.size() != w_o.rows() || w_o.rows() != w_o.cols() || w_o.rows() != d) {
    throw ShapeError("attention_apply: heads x d_head does not match W_O " + w_o.shape_string());
  }
  Tensor2D concat(n, d);
  for (std::size_t h = 0; h < scores.size(); ++h) {
    const Tensor2D& a = *scores[h];
    if (a.rows() != n || a.cols() != n) {
      throw ShapeError("attention_apply: scores " + a.shape_string() + " for sequence of " +
                       std::to_string(n));
    }
    write_column_block(concat, matmul(a, matmul(z, w_v[h])), h * dh);
  }
  return matmul(concat, w_o);
}

Tensor2D feedforward(const Tensor2D& y, const FeedForwardParams& ff, Activation activation) {
  if (y.cols() != ff.w1.rows() || ff.w1.cols() != ff.w2.rows()) {
    throw ShapeError("feedforward: input " + y.shape_string() + ", W1 " + ff.w1.shape_string() +
                     ", W2 " + ff.w2.shape_string());
  }
  Tensor2D pre = matmul(y, ff.w1);
  for (double& v : pre.values()) v = activate(v, activation);
  return matmul(pre, ff.w2);
}

Tensor2D layer_norm(const Tensor2D& x, const LayerNormParams& p, LayerNormCache* cache) {
  const std::size_t n = x.rows(), d = x.cols();
  if (p.gain.cols() != d) throw ShapeError("layer_norm: width mismatch " + x.shape_string());
  Tensor2D out(n, d);
  if (cache != nullptr) {
    cache->normalized = Tensor2D(n, d);
    cache->inv_std.assign(n, 0.0);
  }
  for (std::size_t r = 0; r < n; ++r) {
    auto row = x.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t c = 0; c < d; ++c) {
      const double xhat = (row[c] - mean) * inv_std;
      out(r, c) = xhat * p.gain(0, c) + p.bias(0, c);
      if (cache != nullptr) cache->normalized(r, c) = xhat;
    }
    if (cache != nullptr) cache->inv_std[r] = inv_std;
  }
  return out;
}

AttentionBlockOutput reuse_multihead_forward(int layer_index, const Tensor2D& x,
                                             const ReuseBuffer& previous,
                                             const LayerParams& params,
                                             const ModelConfig& config) {
  const int heads = config.heads;
  const int exact = params.plan.exact_heads;
  if (params.plan.skip) {
    throw std::invalid_argument("reuse_multihead_forward: layer " + std::to_string(layer_index) +
                                " has no attention sublayer");
  }
  if (layer_index == 0 && exact < heads) {
    throw std::invalid_argument("reuse_multihead_forward: the first layer must compute all " +
                                std::to_string(heads) + " heads exactly, plan has " +
                                std::to_string(exact));
  }
  if (exact < heads && static_cast<int>(previous.entries.size()) != heads) {
    throw std::invalid_argument("reuse_multihead_forward: layer " + std::to_string(layer_index) +
                                " reuses scores but the incoming buffer holds " +
                                std::to_string(previous.entries.size()) + " of " +
                                std::to_string(heads));
  }
  if (static_cast<int>(params.attn.w_q.size()) != exact ||
      static_cast<int>(params.attn.w_v.size()) != heads) {
    throw ShapeError("reuse_multihead_forward: parameters do not match the layer plan");
  }

  AttentionBlockOutput out;
  AttentionCache& cache = out.cache;
  cache.input = x;
  cache.z = layer_norm(x, params.ln_attn, &cache.norm);

  const int dh = config.d_head();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  out.heads.reserve(heads);
  for (int h = 0; h < exact; ++h) {
    cache.q.push_back(matmul(cache.z, params.attn.w_q[h]));
    cache.k.push_back(matmul(cache.z, params.attn.w_k[h]));
    auto scores = std::make_shared<const Tensor2D>(
        row_softmax(matmul_nt(cache.q.back(), cache.k.back()), scale));
    out.heads.push_back(ScoreRef{std::move(scores), layer_index, h});
  }
  for (int j = 0; exact + j < heads; ++j) out.heads.push_back(previous.entries[j]);
  out.buffer.entries = out.heads;

  const std::size_t n = x.rows();
  cache.concat = Tensor2D(n, config.d_model);
  for (int h = 0; h < heads; ++h) {
    cache.v.push_back(matmul(cache.z, params.attn.w_v[h]));
    write_column_block(cache.concat, matmul(*out.heads[h].scores, cache.v.back()), h * dh);
  }
  out.y = x + matmul(cache.concat, params.attn.w_o);
  return out;
}

ForwardResult transformer_forward(const std::vector<int>& tokens, const ModelParams& params,
                                  const ModelConfig& config) {
  check_tokens(tokens, config);
  if (static_cast<int>(params.layers.size()) != config.layers) {
    throw ShapeError("transformer_forward: parameters hold " +
                     std::to_string(params.layers.size()) + " layers, config expects " +
                     std::to_string(config.layers));
  }
  const std::size_t n = tokens.size();
  const std::size_t d = config.d_model;
  ForwardResult result;
  result.tokens = tokens;

  Tensor2D x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    auto tok = params.token_embedding.row(tokens[i]);
    auto pos = params.position_embedding.row(i);
    for (std::size_t c = 0; c < d; ++c) x(i, c) = tok[c] + pos[c];
  }

  ReuseBuffer buffer;
  for (int l = 0; l < config.layers; ++l) {
    const LayerParams& lp = params.layers[l];
    LayerTrace trace;
    LayerCapture capture;
    trace.skip = capture.skip = lp.plan.skip;
    if (lp.plan.skip) {
      trace.hidden = std::move(x);
    } else {
      AttentionBlockOutput block = reuse_multihead_forward(l, x, buffer, lp, config);
      trace.hidden = std::move(block.y);
      trace.attn = std::move(block.cache);
      capture.heads = std::move(block.heads);
      buffer = std::move(block.buffer);
    }
    trace.ff_in = layer_norm(trace.hidden, lp.ln_ff, &trace.ff_norm);
    trace.ff_pre = matmul(trace.ff_in, lp.ff.w1);
    trace.ff_act = trace.ff_pre;
    for (double& v : trace.ff_act.values()) v = activate(v, config.activation);
    x = trace.hidden + matmul(trace.ff_act, lp.ff.w2);
    result.trace.push_back(std::move(trace));
    result.capture.push_back(std::move(capture));
  }

  result.final_hidden = std::move(x);
  result.final_normed = layer_norm(result.final_hidden, params.ln_final, &result.final_norm);
  result.logits = matmul(result.final_normed, params.w_out);
  if (!result.logits.all_finite()) throw NumericError("transformer_forward: non-finite logits");
  return result;
}

void transformer_backward(const ForwardResult& forward, const Tensor2D& dlogits,
                          const ModelParams& params, const ModelConfig& config,
                          ModelParams& grads) {
  if (forward.trace.size() != static_cast<std::size_t>(config.layers)) {
    throw std::invalid_argument("transformer_backward: forward cache is missing");
  }
  if (!dlogits.same_shape(forward.logits)) {
    throw ShapeError("transformer_backward: dlogits " + dlogits.shape_string() +
                     " vs logits " + forward.logits.shape_string());
  }
  const int heads = config.heads;
  const std::size_t dh = config.d_head();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  matmul_tn_accumulate(forward.final_normed, dlogits, grads.w_out);
  Tensor2D dx = layer_norm_backward(matmul_nt(dlogits, params.w_out), forward.final_norm,
                                    params.ln_final, grads.ln_final);

  // dLoss/dA for every score matrix, indexed by the layer/head that computed it.
  std::vector<std::vector<Tensor2D>> score_grads(config.layers, std::vector<Tensor2D>(heads));

  for (int l = config.layers - 1; l >= 0; --l) {
    const LayerTrace& trace = forward.trace[l];
    const LayerParams& lp = params.layers[l];
    LayerParams& lg = grads.layers[l];

    // Feed-forward sublayer: x_out = hidden + φ(LN(hidden) W1) W2.
    matmul_tn_accumulate(trace.ff_act, dx, lg.ff.w2);
    Tensor2D dpre = matmul_nt(dx, lp.ff.w2);
    for (std::size_t i = 0; i < dpre.size(); ++i)
      dpre.data()[i] *= activate_grad(trace.ff_pre.data()[i], config.activation);
    matmul_tn_accumulate(trace.ff_in, dpre, lg.ff.w1);
    Tensor2D dhidden = dx;
    add_inplace(dhidden,
                layer_norm_backward(matmul_nt(dpre, lp.ff.w1), trace.ff_norm, lp.ln_ff, lg.ln_ff));

    if (trace.skip) {
      dx = std::move(dhidden);
      continue;
    }

    // Attention sublayer: hidden = input + concat_h(A_h V_h) W_O.
    const AttentionCache& cache = trace.attn;
    const LayerCapture& capture = forward.capture[l];
    matmul_tn_accumulate(cache.concat, dhidden, lg.attn.w_o);
    const Tensor2D dconcat = matmul_nt(dhidden, lp.attn.w_o);
    Tensor2D dz(cache.z.rows(), cache.z.cols());
    for (int h = 0; h < heads; ++h) {
      const ScoreRef& ref = capture.heads[h];
      const Tensor2D dout = column_block(dconcat, h * dh, dh);
      const Tensor2D dv = matmul_tn(*ref.scores, dout);
      matmul_tn_accumulate(cache.z, dv, lg.attn.w_v[h]);
      add_inplace(dz, matmul_nt(dv, lp.attn.w_v[h]));

      const bool reused = ref.origin_layer != l;
      if (reused && config.detach_reused_scores) continue;
      Tensor2D& acc = score_grads[ref.origin_layer][ref.origin_head];
      Tensor2D da = matmul_nt(dout, cache.v[h]);
      if (acc.empty()) {
        acc = std::move(da);
      } else {
        add_inplace(acc, da);
      }
    }

    // Exact heads: all consumers of their scores (this layer and later reuse
    // layers) have now contributed to score_grads.
    for (int h = 0; h < lp.plan.exact_heads; ++h) {
      const Tensor2D& da = score_grads[l][h];
      if (da.empty()) continue;
      const Tensor2D& a = *capture.heads[h].scores;
      Tensor2D dlogit(a.rows(), a.cols());
      for (std::size_t r = 0; r < a.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t c = 0; c < a.cols(); ++c) dot += a(r, c) * da(r, c);
        for (std::size_t c = 0; c < a.cols(); ++c)
          dlogit(r, c) = scale * a(r, c) * (da(r, c) - dot);
      }
      const Tensor2D dq = matmul(dlogit, cache.k[h]);
      const Tensor2D dk = matmul_tn(dlogit, cache.q[h]);
      matmul_tn_accumulate(cache.z, dq, lg.attn.w_q[h]);
      matmul_tn_accumulate(cache.z, dk, lg.attn.w_k[h]);
      add_inplace(dz, matmul_nt(dq, lp.attn.w_q[h]));
      add_inplace(dz, matmul_nt(dk, lp.attn.w_k[h]));
    }

    dx = std::move(dhidden);
    add_inplace(dx, layer_norm_backward(dz, cache.norm, lp.ln_attn, lg.ln_attn));
  }

  for (std::size_t i = 0; i < forward.tokens.size(); ++i) {
    auto g = dx.row(i);
    auto tok = grads.token_embedding.row(forward.tokens[i]);
    auto pos = grads.position_embedding.row(i);
    for (std::size_t c = 0; c < g.size(); ++c) {
      tok[c] += g[c];
      pos[c] += g[c];
    }
  }
}

}  // namespace reuse

#include "reuse/cost.h"

#include <cmath>

#include "gtest/gtest.h"

namespace reuse {
namespace {

// (1 - K/2H)(4d²n + 2dn²) and (1 - K/2H) 4d² in rational arithmetic.
LayerCost closed_form(Count d, Count n, Count h, Count k) {
  const Count num = 2 * h - k;
  const Count den = 2 * h;
  const Count flops = 4 * d * d * n + 2 * d * n * n;
  const Count params = 4 * d * d;
  EXPECT_EQ(flops * num % den, 0);
  EXPECT_EQ(params * num % den, 0);
  return {flops * num / den, params * num / den};
}

TEST(AttentionLayerCostTest, MatchesClosedFormForEveryK) {
  const Count triples[][3] = {{768, 512, 12}, {1024, 512, 16}, {64, 33, 4}};
  for (const auto& t : triples) {
    for (Count k = 0; k <= t[2]; ++k) {
      const LayerCost got = attention_layer_cost(t[0], t[1], t[2], k);
      const LayerCost want = closed_form(t[0], t[1], t[2], k);
      EXPECT_EQ(got.flops, want.flops) << t[0] << " " << k;
      EXPECT_EQ(got.params, want.params) << t[0] << " " << k;
    }
  }
}

TEST(AttentionLayerCostTest, EndpointsAndErrors) {
  const LayerCost base = attention_layer_cost(768, 512, 12, 0);
  EXPECT_EQ(base.flops, 4LL * 768 * 768 * 512 + 2LL * 768 * 512 * 512);
  EXPECT_EQ(base.params, 4LL * 768 * 768);
  const LayerCost all = attention_layer_cost(768, 512, 12, 12);
  EXPECT_EQ(2 * all.flops, base.flops);
  EXPECT_EQ(2 * all.params, base.params);
  EXPECT_EQ(4 * attention_layer_cost(768, 512, 12, 6).flops, 3 * base.flops);
  EXPECT_THROW(attention_layer_cost(768, 512, 12, 13), std::invalid_argument);
  EXPECT_THROW(attention_layer_cost(770, 512, 12, 1), std::invalid_argument);
}

CostReport ratio_report(const ModelConfig& reuse, const CostOptions& o, Count n = 512) {
  ModelConfig base = reuse;
  base.schedule = ReuseSchedule::baseline();
  CostReport r = model_cost(reuse, n, o);
  set_baseline(r, model_cost(base, n, o));
  return r;
}

TEST(ModelCostTest, EncoderRatios) {
  CostOptions o;
  o.tie_embeddings = true;
  const CostReport base = ratio_report(bert_base_config(ReuseSchedule::full_layer(6, 12)), o);
  EXPECT_NEAR(base.params_ratio, 0.94, 0.01);
  EXPECT_NEAR(base.flops_ratio, 0.90, 0.01);
  const CostReport large = ratio_report(bert_large_config(ReuseSchedule::full_layer(12, 16)), o);
  EXPECT_NEAR(large.params_ratio, 0.92, 0.01);
  EXPECT_NEAR(large.flops_ratio, 0.90, 0.01);
}

TEST(ModelCostTest, BaselineAgainstItselfIsOne) {
  const CostReport r = ratio_report(bert_base_config(), {});
  EXPECT_EQ(r.params_ratio, 1.0);
  EXPECT_EQ(r.flops_ratio, 1.0);
  const CostReport zero = ratio_report(bert_base_config(ReuseSchedule::full_layer(6, 0)), {});
  EXPECT_EQ(zero.params_total, model_cost(bert_base_config(), 512).params_total);
  EXPECT_EQ(zero.flops_total, model_cost(bert_base_config(), 512).flops_total);
}

TEST(ModelCostTest, TotalsAreSumsAndAttentionEntriesMatch) {
  const ModelConfig c = bert_base_config(ReuseSchedule::partial_layer(4));
  const CostReport r = model_cost(c, 128);
  Count params = 0, flops = 0;
  for (const CostEntry& e : r.breakdown) {
    params += e.params;
    flops += e.flops;
  }
  EXPECT_EQ(params, r.params_total);
  EXPECT_EQ(flops, r.flops_total);
  const auto plan = c.plan();
  for (int l = 0; l < c.layers; ++l) {
    Count ap = 0, af = 0;
    for (const CostEntry& e : r.breakdown) {
      if (e.name.rfind("layer" + std::to_string(l) + ".attn.", 0) == 0) {
        ap += e.params;
        af += e.flops;
      }
    }
    const LayerCost want = attention_layer_cost(768, 128, 12, plan[l].reused_heads(12));
    EXPECT_EQ(ap, want.params) << l;
    EXPECT_EQ(af, want.flops) << l;
  }
}

TEST(ModelCostTest, UntiedParamsMatchTheModel) {
  for (const ReuseSchedule& s : {ReuseSchedule::baseline(), ReuseSchedule::partial_layer(1),
                                 ReuseSchedule::skip(1), ReuseSchedule::alternate(2)}) {
    ModelConfig c;
    c.layers = 4;
    c.heads = 2;
    c.d_model = 8;
    c.d_ff = 12;
    c.vocab = 10;
    c.max_len = 6;
    c.schedule = s;
    Rng rng(1);
    EXPECT_EQ(static_cast<std::size_t>(model_cost(c, 6).params_total),
              ModelParams::init(c, rng).parameter_count())
        << s.describe();
  }
}

TEST(ModelCostTest, SkipLayersHaveNoAttention) {
  const ModelConfig c = bert_base_config(ReuseSchedule::skip(2));
  const CostReport r = model_cost(c, 64);
  for (const CostEntry& e : r.breakdown) {
    EXPECT_NE(e.name, "layer1.attn.proj");
    EXPECT_NE(e.name, "layer2.attn.scores");
  }
  EXPECT_LT(r.flops_total, model_cost(bert_base_config(), 64).flops_total);
}

TEST(ModelCostTest, RatiosIgnoreTheFlopConvention) {
  CostOptions one, two;
  two.flops_per_mac = 2;
  for (const ModelConfig& c : {bert_base_config(ReuseSchedule::full_layer(6, 12)),
                               bert_large_config(ReuseSchedule::partial_layer(5))}) {
    const CostReport a = ratio_report(c, one);
    const CostReport b = ratio_report(c, two);
    EXPECT_NEAR(a.flops_ratio, b.flops_ratio, 1e-12);
    EXPECT_NEAR(a.params_ratio, b.params_ratio, 1e-12);
    EXPECT_EQ(2 * a.flops_total, b.flops_total);
  }
}

TEST(CostSweepTest, HandComputedFactors) {
  const ModelConfig c = bert_base_config(ReuseSchedule::full_layer(10));
  std::vector<int> ks;
  for (int k = 0; k <= 12; ++k) ks.push_back(k);
  const auto rows = cost_sweep(c, 512, ks);
  ASSERT_EQ(rows.size(), 13u);
  const LayerCost full = attention_layer_cost(768, 512, 12, 0);
  for (int k = 0; k <= 12; ++k) {
    // Ten layers lose K/24 of their attention cost.
    EXPECT_EQ(rows[0].flops_total - rows[k].flops_total, 10 * full.flops * k / 24);
    EXPECT_EQ(rows[0].params_total - rows[k].params_total, 10 * full.params * k / 24);
    if (k > 0) EXPECT_LT(rows[k].flops_total, rows[k - 1].flops_total);
  }
  EXPECT_EQ(rows[0].flops_ratio, 1.0);
  const std::string csv = cost_sweep_csv(rows, ks);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 14);
  EXPECT_EQ(cost_sweep(c, 512, {0}).size(), 1u);
  EXPECT_THROW(cost_sweep(c, 512, {13}), std::invalid_argument);
  EXPECT_THROW(cost_sweep(bert_base_config(), 512, {1}), std::invalid_argument);
}

}  // namespace
}  // namespace reuse

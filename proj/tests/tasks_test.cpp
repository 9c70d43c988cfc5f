#include "reuse/tasks.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gtest/gtest.h"

namespace reuse {
namespace {

TaskSpec spec_for(TaskKind kind, int seq_len = 9, int vocab = 12) {
  TaskSpec s;
  s.kind = kind;
  s.seq_len = seq_len;
  s.vocab = vocab;
  return s;
}

TEST(TaskNamesTest, RoundTrip) {
  for (TaskKind k : {TaskKind::kCopy, TaskKind::kReverse, TaskKind::kSort, TaskKind::kMaskedToken})
    EXPECT_EQ(parse_task(task_name(k)), k);
  EXPECT_EQ(parse_corpus("random"), CorpusSource::kUniformRandom);
  EXPECT_THROW(parse_task("shuffle"), std::invalid_argument);
  EXPECT_THROW(parse_corpus("wiki"), std::invalid_argument);
}

TEST(TaskSpecTest, Validation) {
  EXPECT_NO_THROW(spec_for(TaskKind::kCopy).validate(9));
  EXPECT_THROW(spec_for(TaskKind::kCopy).validate(8), std::invalid_argument);
  EXPECT_THROW(spec_for(TaskKind::kCopy, 2).validate(8), std::invalid_argument);
  TaskSpec masked = spec_for(TaskKind::kMaskedToken, 9, 10);  // 7 content tokens
  EXPECT_THROW(masked.validate(16), std::invalid_argument);
  masked.corpus = CorpusSource::kUniformRandom;
  EXPECT_NO_THROW(masked.validate(16));
  masked.mask_rate = 1.0;
  EXPECT_THROW(masked.validate(16), std::invalid_argument);
}

TEST(SequenceTasksTest, LayoutAndTargets) {
  Rng rng(3);
  for (TaskKind kind : {TaskKind::kCopy, TaskKind::kReverse, TaskKind::kSort}) {
    const TaskSampler sampler(spec_for(kind));
    for (int trial = 0; trial < 50; ++trial) {
      const Example ex = sampler.sample(rng);
      ASSERT_EQ(ex.tokens.size(), 9u);
      const std::vector<int> content(ex.tokens.begin(), ex.tokens.begin() + 4);
      EXPECT_EQ(ex.tokens[4], kSeparatorToken);
      for (int i = 0; i < 4; ++i) {
        EXPECT_GE(content[i], kFirstContentToken);
        EXPECT_LT(content[i], 12);
        EXPECT_EQ(ex.targets[i], kIgnoreTarget);
        EXPECT_EQ(ex.tokens[5 + i], kBlankToken);
      }
      EXPECT_EQ(ex.targets[4], kIgnoreTarget);
      std::vector<int> answer(ex.targets.begin() + 5, ex.targets.end());
      std::vector<int> expect = content;
      if (kind == TaskKind::kReverse) std::reverse(expect.begin(), expect.end());
      if (kind == TaskKind::kSort) std::sort(expect.begin(), expect.end());
      EXPECT_EQ(answer, expect);
    }
  }
}

TEST(SequenceTasksTest, EvenLengthLeavesTrailingBlank) {
  Rng rng(4);
  const Example ex = TaskSampler(spec_for(TaskKind::kCopy, 8)).sample(rng);
  EXPECT_EQ(ex.tokens[3], kSeparatorToken);
  EXPECT_EQ(ex.tokens[7], kBlankToken);
  EXPECT_EQ(ex.targets[7], kIgnoreTarget);
}

TEST(SamplerTest, DeterministicPerSeed) {
  const TaskSampler sampler(spec_for(TaskKind::kMaskedToken, 16, 20));
  Rng a(11), b(11), c(12);
  const auto x = sampler.batch(a, 5);
  const auto y = sampler.batch(b, 5);
  const auto z = sampler.batch(c, 5);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(x[i].tokens, y[i].tokens);
    EXPECT_EQ(x[i].targets, y[i].targets);
  }
  bool differs = false;
  for (int i = 0; i < 5; ++i) differs = differs || x[i].tokens != z[i].tokens;
  EXPECT_TRUE(differs);
}

TEST(MaskTest, MasksOnlyTargetsAndAlwaysAtLeastOne) {
  TaskSpec s = spec_for(TaskKind::kMaskedToken, 16, 20);
  s.mask_rate = 0.01;
  const TaskSampler sampler(s);
  Rng rng(6);
  int masked_total = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const Sequence text{0, 1, 2, 3, 4, 5};
    const Example ex = sampler.mask(text, rng);
    int masked = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      if (ex.tokens[i] == kMaskToken) {
        ++masked;
        EXPECT_EQ(ex.targets[i], text[i] + kFirstContentToken);
      } else {
        EXPECT_EQ(ex.tokens[i], text[i] + kFirstContentToken);
        EXPECT_EQ(ex.targets[i], kIgnoreTarget);
      }
    }
    EXPECT_GE(masked, 1);
    masked_total += masked;
  }
  EXPECT_LT(masked_total, 260);
}

TEST(MaskTest, RateIsRespectedOnAverage) {
  TaskSpec s = spec_for(TaskKind::kMaskedToken, 32, 20);
  const TaskSampler sampler(s);
  Rng rng(8);
  int masked = 0, total = 0;
  for (const Example& ex : sampler.batch(rng, 400)) {
    for (int t : ex.tokens) masked += t == kMaskToken;
    total += static_cast<int>(ex.tokens.size());
  }
  EXPECT_NEAR(static_cast<double>(masked) / total, 0.15, 0.02);
}

TEST(CorpusTest, StructuredHasLowerEntropyThanRandom) {
  const Corpus structured = gen_structured_corpus(1234, 16, 64, 200);
  const Corpus random = gen_random_corpus(1234, 16, 64, 200);
  const double hs = conditional_bigram_entropy(structured, 16);
  const double hr = conditional_bigram_entropy(random, 16);
  EXPECT_NEAR(hr, 4.0, 0.15);
  EXPECT_LT(hs, hr - 1.0);
}

TEST(CorpusTest, DeterministicAndInRange) {
  const Corpus a = gen_structured_corpus(9, 12, 20, 10);
  EXPECT_EQ(a, gen_structured_corpus(9, 12, 20, 10));
  EXPECT_NE(a, gen_structured_corpus(10, 12, 20, 10));
  for (const Sequence& s : a) {
    ASSERT_EQ(s.size(), 20u);
    for (int t : s) {
      EXPECT_GE(t, 0);
      EXPECT_LT(t, 12);
    }
  }
  EXPECT_THROW(gen_structured_corpus(1, 7, 10, 1), std::invalid_argument);
}

TEST(CorpusTest, ChainFollowsPrimarySuccessorMostOfTheTime) {
  const MarkovChain chain(5, 10);
  Rng rng(1);
  // The most common successor of b should carry about 80% of the mass.
  std::vector<std::vector<int>> counts(10, std::vector<int>(10, 0));
  for (int i = 0; i < 200; ++i) {
    const Sequence s = chain.sample(rng, 50);
    for (std::size_t t = 2; t < s.size(); ++t) ++counts[s[t - 1]][s[t]];
  }
  for (const auto& row : counts) {
    const int total = std::accumulate(row.begin(), row.end(), 0);
    if (total < 200) continue;
    const int top = *std::max_element(row.begin(), row.end());
    EXPECT_GT(static_cast<double>(top) / total, 0.75);
  }
}

TEST(CorpusTest, EntropyOfConstantCorpusIsZero) {
  const Corpus c{{1, 1, 1, 1}, {1, 1}};
  EXPECT_DOUBLE_EQ(conditional_bigram_entropy(c, 4), 0.0);
}

}  // namespace
}  // namespace reuse

#ifndef REUSE_TASKS_H_
#define REUSE_TASKS_H_

#include <cstdint>
#include <string_view>
#include <vector>

#include "reuse/numerics.h"
#include "reuse/train.h"

namespace reuse {

using Sequence = std::vector<int>;
using Corpus = std::vector<Sequence>;

enum class TaskKind { kCopy, kReverse, kSort, kMaskedToken };
enum class CorpusSource { kStructured, kUniformRandom };

std::string_view task_name(TaskKind kind);
TaskKind parse_task(std::string_view name);
std::string_view corpus_name(CorpusSource source);
CorpusSource parse_corpus(std::string_view name);

// Reserved token ids shared by all tasks; content tokens start at kFirstContentToken.
inline constexpr int kBlankToken = 0;
inline constexpr int kSeparatorToken = 1;
inline constexpr int kMaskToken = 2;
inline constexpr int kFirstContentToken = 3;

struct TaskSpec {
  TaskKind kind = TaskKind::kCopy;
  int vocab = 16;    // model vocabulary, including the reserved ids
  int seq_len = 17;  // n
  double mask_rate = 0.15;
  CorpusSource corpus = CorpusSource::kStructured;
  std::uint64_t corpus_seed = 1234;  // identifies the Markov chain for kStructured

  int content_vocab() const { return vocab - kFirstContentToken; }
  void validate(int max_len) const;
};

// Order-2 Markov chain over [0, vocab) with a sparse seeded transition table:
// each context (a, b) has three successors with probabilities 0.8/0.15/0.05,
// the most likely one depending on b alone.
class MarkovChain {
 public:
  MarkovChain(std::uint64_t seed, int vocab);
  Sequence sample(Rng& rng, int length) const;
  int vocab() const { return vocab_; }

 private:
  int vocab_;
  std::vector<int> primary_;                  // [b]
  std::vector<int> secondary_, tertiary_;     // [a * vocab + b]
};

Corpus gen_structured_corpus(std::uint64_t seed, int vocab, int seq_len, int count);
Corpus gen_random_corpus(std::uint64_t seed, int vocab, int seq_len, int count);

// H(x_t | x_{t-1}) in bits, estimated from all adjacent pairs of the corpus.
double conditional_bigram_entropy(const Corpus& corpus, int vocab);

// Draws task examples; MaskedToken text comes from a fixed Markov chain.
class TaskSampler {
 public:
  explicit TaskSampler(const TaskSpec& spec);

  Example sample(Rng& rng) const;
  std::vector<Example> batch(Rng& rng, int count) const;
  // Turns raw content text (ids in [0, content_vocab)) into a masked example.
  Example mask(const Sequence& text, Rng& rng) const;

  const TaskSpec& spec() const { return spec_; }

 private:
  TaskSpec spec_;
  MarkovChain chain_;
};

}  // namespace reuse

#endif  // REUSE_TASKS_H_

#include "reuse/tasks.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace reuse {

namespace {

constexpr std::pair<TaskKind, std::string_view> kTaskNames[] = {
    {TaskKind::kCopy, "copy"},
    {TaskKind::kReverse, "reverse"},
    {TaskKind::kSort, "sort"},
    {TaskKind::kMaskedToken, "masked"},
};

}  // namespace

std::string_view task_name(TaskKind kind) {
  for (const auto& [k, name] : kTaskNames)
    if (k == kind) return name;
  return "unknown";
}

TaskKind parse_task(std::string_view name) {
  for (const auto& [k, n] : kTaskNames)
    if (n == name) return k;
  throw std::invalid_argument("unknown task '" + std::string(name) +
                              "' (expected copy|reverse|sort|masked)");
}

std::string_view corpus_name(CorpusSource source) {
  return source == CorpusSource::kStructured ? "structured" : "random";
}

CorpusSource parse_corpus(std::string_view name) {
  if (name == "structured") return CorpusSource::kStructured;
  if (name == "random") return CorpusSource::kUniformRandom;
  throw std::invalid_argument("unknown corpus '" + std::string(name) +
                              "' (expected structured|random)");
}

void TaskSpec::validate(int max_len) const {
  if (seq_len < 1) throw std::invalid_argument("task: seq_len must be positive");
  if (seq_len > max_len) {
    throw std::invalid_argument("task: seq_len " + std::to_string(seq_len) +
                                " exceeds the model's max_len " + std::to_string(max_len));
  }
  if (content_vocab() < 1) throw std::invalid_argument("task: vocab leaves no content tokens");
  if (kind == TaskKind::kMaskedToken) {
    if (!(mask_rate > 0.0 && mask_rate < 1.0)) {
      throw std::invalid_argument("task: mask_rate must lie in (0, 1)");
    }
    if (corpus == CorpusSource::kStructured && content_vocab() < 8) {
      throw std::invalid_argument("task: structured corpus needs at least 8 content tokens");
    }
  } else if (seq_len < 3) {
    throw std::invalid_argument("task: sequence tasks need seq_len >= 3");
  }
}

MarkovChain::MarkovChain(std::uint64_t seed, int vocab) : vocab_(vocab) {
  if (vocab < 1) throw std::invalid_argument("MarkovChain: vocab must be positive");
  Rng rng(seed);
  const std::size_t v = vocab;
  primary_.resize(v);
  for (auto& p : primary_) p = static_cast<int>(rng.index(v));
  secondary_.resize(v * v);
  tertiary_.resize(v * v);
  for (std::size_t i = 0; i < v * v; ++i) {
    secondary_[i] = static_cast<int>(rng.index(v));
    tertiary_[i] = static_cast<int>(rng.index(v));
  }
}

Sequence MarkovChain::sample(Rng& rng, int length) const {
  Sequence out;
  out.reserve(length);
  for (int i = 0; i < length; ++i) {
    if (i < 2) {
      out.push_back(static_cast<int>(rng.index(vocab_)));
      continue;
    }
    const std::size_t a = out[i - 2], b = out[i - 1];
    const double u = rng.uniform();
    if (u < 0.8) {
      out.push_back(primary_[b]);
    } else if (u < 0.95) {
      out.push_back(secondary_[a * vocab_ + b]);
    } else {
      out.push_back(tertiary_[a * vocab_ + b]);
    }
  }
  return out;
}

Corpus gen_structured_corpus(std::uint64_t seed, int vocab, int seq_len, int count) {
  if (vocab < 8) throw std::invalid_argument("gen_structured_corpus: vocab must be >= 8");
  const Rng root(seed);
  const MarkovChain chain(root.fork(0).next_u64(), vocab);
  Rng rng = root.fork(1);
  Corpus corpus;
  corpus.reserve(std::max(count, 0));
  for (int i = 0; i < count; ++i) corpus.push_back(chain.sample(rng, seq_len));
  return corpus;
}

Corpus gen_random_corpus(std::uint64_t seed, int vocab, int seq_len, int count) {
  if (vocab < 1) throw std::invalid_argument("gen_random_corpus: vocab must be positive");
  Rng rng(seed);
  Corpus corpus;
  corpus.reserve(std::max(count, 0));
  for (int i = 0; i < count; ++i) {
    Sequence s(seq_len);
    for (int& t : s) t = static_cast<int>(rng.index(vocab));
    corpus.push_back(std::move(s));
  }
  return corpus;
}

double conditional_bigram_entropy(const Corpus& corpus, int vocab) {
  std::vector<double> pair(static_cast<std::size_t>(vocab) * vocab, 0.0);
  std::vector<double> prev(vocab, 0.0);
  double total = 0.0;
  for (const Sequence& s : corpus)
    for (std::size_t i = 1; i < s.size(); ++i) {
      pair[static_cast<std::size_t>(s[i - 1]) * vocab + s[i]] += 1.0;
      prev[s[i - 1]] += 1.0;
      total += 1.0;
    }
  if (total == 0.0) return 0.0;
  // H(X_t | X_{t-1}) = H(X_{t-1}, X_t) - H(X_{t-1})
  double joint = 0.0, marginal = 0.0;
  for (double c : pair)
    if (c > 0.0) joint -= (c / total) * std::log2(c / total);
  for (double c : prev)
    if (c > 0.0) marginal -= (c / total) * std::log2(c / total);
  return joint - marginal;
}

TaskSampler::TaskSampler(const TaskSpec& spec)
    : spec_(spec), chain_(spec.corpus_seed, std::max(spec.content_vocab(), 1)) {}

Example TaskSampler::mask(const Sequence& text, Rng& rng) const {
  Example ex;
  ex.tokens.resize(text.size());
  ex.targets.assign(text.size(), kIgnoreTarget);
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const int token = text[i] + kFirstContentToken;
    if (rng.uniform() < spec_.mask_rate) {
      ex.tokens[i] = kMaskToken;
      ex.targets[i] = token;
      any = true;
    } else {
      ex.tokens[i] = token;
    }
  }
  if (!any && !text.empty()) {
    const std::size_t i = rng.index(text.size());
    ex.targets[i] = ex.tokens[i];
    ex.tokens[i] = kMaskToken;
  }
  return ex;
}

Example TaskSampler::sample(Rng& rng) const {
  const int n = spec_.seq_len;
  if (spec_.kind == TaskKind::kMaskedToken) {
    Sequence text;
    if (spec_.corpus == CorpusSource::kStructured) {
      text = chain_.sample(rng, n);
    } else {
      text.resize(n);
      for (int& t : text) t = static_cast<int>(rng.index(spec_.content_vocab()));
    }
    return mask(text, rng);
  }

  // [x_1 .. x_m, SEP, blank x m (, blank)] with targets on the answer half.
  const int m = (n - 1) / 2;
  Sequence content(m);
  for (int& t : content) t = kFirstContentToken + static_cast<int>(rng.index(spec_.content_vocab()));
  Sequence answer = content;
  if (spec_.kind == TaskKind::kReverse) std::reverse(answer.begin(), answer.end());
  if (spec_.kind == TaskKind::kSort) std::sort(answer.begin(), answer.end());

  Example ex;
  ex.tokens.assign(n, kBlankToken);
  ex.targets.assign(n, kIgnoreTarget);
  std::copy(content.begin(), content.end(), ex.tokens.begin());
  ex.tokens[m] = kSeparatorToken;
  for (int i = 0; i < m; ++i) ex.targets[m + 1 + i] = answer[i];
  return ex;
}

std::vector<Example> TaskSampler::batch(Rng& rng, int count) const {
  std::vector<Example> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(sample(rng));
  return out;
}

}  // namespace reuse

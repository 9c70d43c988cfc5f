#ifndef REUSE_HARNESS_H_
#define REUSE_HARNESS_H_

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "reuse/checkpoint.h"
#include "reuse/similarity.h"
#include "reuse/tasks.h"

namespace reuse {

struct TrainSettings {
  int steps = 2000;
  int batch_size = 16;
  double learning_rate = 3e-3;
  int warmup_steps = 100;  // linear warmup, then constant
  int log_every = 100;
  int capture_every = 0;   // 0 disables periodic attention captures
  int eval_examples = 256;
  int probe_examples = 256;
  double clip_norm = 1.0;
};

struct TrainRunConfig {
  ModelConfig model;
  TaskSpec task;
  TrainSettings train;
  std::uint64_t seed = 0;
};

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;  // argmax token accuracy over target positions
  int counted = 0;
};

struct MetricRecord {
  int step = 0;
  double train_loss = 0.0;
  double eval_loss = 0.0;
  double eval_accuracy = 0.0;
  double wall_seconds = 0.0;
  // Mean adjacent-layer best-head similarity on the probe set, when captured.
  std::optional<double> adjacent_similarity;
};

using MetricsSink = std::function<void(const MetricRecord&)>;

struct TrainingOutcome {
  Checkpoint checkpoint;
  std::vector<MetricRecord> log;
  EvalResult final_eval;
};

// Derived random streams of a run; every consumer forks from the run seed.
enum class Stream : std::uint64_t { kInit = 1, kData = 2, kEval = 3, kProbe = 4 };
Rng stream(std::uint64_t seed, Stream which);

ModelParams init_params(const ModelConfig& config, std::uint64_t seed);
std::vector<Example> make_examples(const TaskSpec& spec, Rng rng, int count);

EvalResult evaluate(const ModelParams& params, const ModelConfig& config,
                    const std::vector<Example>& examples);

// Captures every attention-bearing layer of the model on the probe examples.
AttentionCapture capture_attention(const ModelParams& params, const ModelConfig& config,
                                   const std::vector<Example>& probes);

TrainingOutcome run_training(const TrainRunConfig& config, const MetricsSink& sink = {});

struct SweepRow {
  int reuse_heads = 0;
  EvalResult eval;
  double final_train_loss = 0.0;
  std::size_t parameters = 0;
};

// Trains one model per K with the base run's seed and budget. The base schedule
// must be kPartialLayer or kFullLayer (K = 0 is accepted for any schedule).
std::vector<SweepRow> ablation_sweep(const TrainRunConfig& base, const std::vector<int>& k_values,
                                     const MetricsSink& sink = {});

struct CompareRandomOptions {
  std::uint64_t seed = 0;
  ModelConfig model;  // defaults set by default_compare_options
  TaskSpec task;
  TrainSettings train;
  // Also train the same architecture on uniformly random text.
  bool include_random_data_model = false;
};

CompareRandomOptions default_compare_options(std::uint64_t seed);

// Copy task on an L=3, H=4, d=32 model with a 1000-step budget.
TrainRunConfig copy_parity_run(std::uint64_t seed = 11);

struct CompareRandomReport {
  double trained_mean = 0.0;      // trained on structured text, structured probes
  double random_init_mean = 0.0;  // untrained, structured probes
  double random_init_mean_alt_probes = 0.0;  // untrained, second probe set
  double gap = 0.0;               // trained_mean - random_init_mean
  std::optional<double> random_data_mean;  // trained on random text, structured probes
  Tensor2D trained_all_pairs;
  Tensor2D random_init_all_pairs;
  EvalResult trained_eval;
};

CompareRandomReport trained_vs_random_similarity(const CompareRandomOptions& options,
                                                 const MetricsSink& sink = {});

}  // namespace reuse

#endif  // REUSE_HARNESS_H_

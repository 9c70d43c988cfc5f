#include "reuse/harness.h"

#include <chrono>
#include <stdexcept>

namespace reuse {

Rng stream(std::uint64_t seed, Stream which) {
  return Rng(seed).fork(static_cast<std::uint64_t>(which));
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  Rng rng = stream(seed, Stream::kInit);
  return ModelParams::init(config, rng);
}

std::vector<Example> make_examples(const TaskSpec& spec, Rng rng, int count) {
  return TaskSampler(spec).batch(rng, count);
}

EvalResult evaluate(const ModelParams& params, const ModelConfig& config,
                    const std::vector<Example>& examples) {
  double loss = 0.0;
  int counted = 0;
  int correct = 0;
  for (const Example& ex : examples) {
    const ForwardResult fwd = transformer_forward(ex.tokens, params, config);
    const CrossEntropy ce = cross_entropy(fwd.logits, ex.targets);
    loss += ce.loss_sum;
    counted += ce.counted;
    correct += ce.correct;
  }
  EvalResult r;
  r.counted = counted;
  if (counted > 0) {
    r.loss = loss / counted;
    r.accuracy = static_cast<double>(correct) / counted;
  }
  return r;
}

AttentionCapture capture_attention(const ModelParams& params, const ModelConfig& config,
                                   const std::vector<Example>& probes) {
  if (probes.empty()) throw std::invalid_argument("capture_attention needs at least one probe");
  std::vector<int> ids;
  for (int l = 0; l < config.layers; ++l) {
    if (!config.plan()[l].skip) ids.push_back(l);
  }
  const int n = static_cast<int>(probes.front().tokens.size());
  AttentionCapture capture(static_cast<int>(ids.size()), config.heads, n);
  capture.set_layer_ids(ids);
  for (const Example& ex : probes) {
    const ForwardResult fwd = transformer_forward(ex.tokens, params, config);
    std::vector<Tensor2D> mats;
    mats.reserve(ids.size() * config.heads);
    for (int l : ids) {
      for (const ScoreRef& ref : fwd.capture[l].heads) mats.push_back(*ref.scores);
    }
    capture.add_example(std::move(mats));
  }
  return capture;
}

TrainingOutcome run_training(const TrainRunConfig& run, const MetricsSink& sink) {
  run.model.validate();
  run.task.validate(run.model.max_len);
  if (run.task.vocab > run.model.vocab) {
    throw std::invalid_argument("task vocabulary " + std::to_string(run.task.vocab) +
                                " exceeds model vocabulary " + std::to_string(run.model.vocab));
  }
  const TrainSettings& ts = run.train;
  const TaskSampler sampler(run.task);
  Rng data = stream(run.seed, Stream::kData);
  Rng eval_rng = stream(run.seed, Stream::kEval);
  const std::vector<Example> eval_set = sampler.batch(eval_rng, ts.eval_examples);
  std::vector<Example> probes;
  if (ts.capture_every > 0) {
    Rng probe_rng = stream(run.seed, Stream::kProbe);
    probes = sampler.batch(probe_rng, ts.probe_examples);
  }

  TrainingOutcome out;
  Checkpoint& ck = out.checkpoint;
  ck.config = run.model;
  ck.seed = run.seed;
  ck.params = init_params(run.model, run.seed);
  ck.optimizer = AdamState::zeros_like(ck.params);

  AdamConfig adam;
  adam.clip_norm = ts.clip_norm;
  const auto start = std::chrono::steady_clock::now();
  double window_loss = 0.0;
  int window_steps = 0;

  auto record = [&](int step) {
    MetricRecord m;
    m.step = step;
    m.train_loss = window_steps > 0 ? window_loss / window_steps : 0.0;
    const EvalResult e = evaluate(ck.params, run.model, eval_set);
    m.eval_loss = e.loss;
    m.eval_accuracy = e.accuracy;
    if (ts.capture_every > 0 && step % ts.capture_every == 0) {
      const AttentionCapture cap = capture_attention(ck.params, run.model, probes);
      if (cap.layers() >= 2) m.adjacent_similarity = mean_adjacent_similarity(all_pairs_best(cap));
    }
    m.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.log.push_back(m);
    if (sink) sink(m);
    window_loss = 0.0;
    window_steps = 0;
  };

  for (int step = 1; step <= ts.steps; ++step) {
    const double warm = ts.warmup_steps > 0 ? std::min(1.0, double(step) / ts.warmup_steps) : 1.0;
    const std::vector<Example> batch = sampler.batch(data, ts.batch_size);
    const StepResult r = train_step(batch, ck.params, ck.optimizer, run.model, adam,
                                    ts.learning_rate * warm);
    ck.step = step;
    window_loss += r.loss;
    ++window_steps;
    if (step % ts.log_every == 0 || step == ts.steps) record(step);
  }
  if (ts.steps == 0) record(0);
  out.final_eval = evaluate(ck.params, run.model, eval_set);
  return out;
}

std::vector<SweepRow> ablation_sweep(const TrainRunConfig& base, const std::vector<int>& k_values,
                                     const MetricsSink& sink) {
  const ReuseSchedule& s = base.model.schedule;
  std::vector<SweepRow> rows;
  for (int k : k_values) {
    TrainRunConfig run = base;
    if (k == 0) {
      run.model.schedule = ReuseSchedule::baseline();
    } else if (s.variant() == ReuseVariant::kPartialLayer) {
      run.model.schedule = ReuseSchedule::partial_layer(k);
    } else if (s.variant() == ReuseVariant::kFullLayer) {
      run.model.schedule = ReuseSchedule::full_layer(s.declared_layers(), k);
    } else {
      throw std::invalid_argument("K sweeps need a partial or full reuse schedule, got " +
                                  s.describe());
    }
    run.model.validate();
    const TrainingOutcome o = run_training(run, sink);
    SweepRow row;
    row.reuse_heads = k;
    row.eval = o.final_eval;
    row.final_train_loss = o.log.empty() ? 0.0 : o.log.back().train_loss;
    row.parameters = o.checkpoint.params.parameter_count();
    rows.push_back(row);
  }
  return rows;
}

CompareRandomOptions default_compare_options(std::uint64_t seed) {
  CompareRandomOptions o;
  o.seed = seed;
  o.model.layers = 4;
  o.model.heads = 4;
  o.model.d_model = 64;
  o.model.d_ff = 256;
  o.model.vocab = 32;
  o.model.max_len = 32;
  o.model.activation = Activation::kGelu;
  o.model.init_std = 0.25;
  o.task.kind = TaskKind::kMaskedToken;
  o.task.vocab = 32;
  o.task.seq_len = 32;
  o.task.corpus = CorpusSource::kStructured;
  o.train.steps = 1000;
  o.train.batch_size = 16;
  o.train.learning_rate = 1e-3;
  o.train.warmup_steps = 100;
  o.train.log_every = 250;
  o.train.eval_examples = 128;
  o.train.probe_examples = 256;
  return o;
}

TrainRunConfig copy_parity_run(std::uint64_t seed) {
  TrainRunConfig run;
  run.model.layers = 3;
  run.model.heads = 4;
  run.model.d_model = 32;
  run.model.d_ff = 64;
  run.model.vocab = 16;
  run.model.max_len = 17;
  run.task.kind = TaskKind::kCopy;
  run.task.vocab = 16;
  run.task.seq_len = 17;
  run.train.steps = 1000;
  run.train.learning_rate = 3e-3;
  run.train.log_every = 250;
  run.seed = seed;
  return run;
}

CompareRandomReport trained_vs_random_similarity(const CompareRandomOptions& o,
                                                 const MetricsSink& sink) {
  TrainRunConfig run{o.model, o.task, o.train, o.seed};
  run.train.capture_every = 0;

  Rng probe_rng = stream(o.seed, Stream::kProbe);
  const std::vector<Example> probes = TaskSampler(o.task).batch(probe_rng, o.train.probe_examples);
  TaskSpec alt_task = o.task;
  alt_task.corpus = CorpusSource::kUniformRandom;
  Rng alt_rng = stream(o.seed, Stream::kProbe).fork(1);
  const std::vector<Example> alt_probes = TaskSampler(alt_task).batch(alt_rng, o.train.probe_examples);

  CompareRandomReport rep;
  const ModelParams untrained = init_params(o.model, o.seed);
  rep.random_init_all_pairs = all_pairs_best(capture_attention(untrained, o.model, probes));
  rep.random_init_mean = mean_adjacent_similarity(rep.random_init_all_pairs);
  rep.random_init_mean_alt_probes =
      mean_adjacent_similarity(all_pairs_best(capture_attention(untrained, o.model, alt_probes)));

  const TrainingOutcome trained = run_training(run, sink);
  rep.trained_eval = trained.final_eval;
  rep.trained_all_pairs = all_pairs_best(capture_attention(trained.checkpoint.params, o.model, probes));
  rep.trained_mean = mean_adjacent_similarity(rep.trained_all_pairs);
  rep.gap = rep.trained_mean - rep.random_init_mean;

  if (o.include_random_data_model) {
    TrainRunConfig random_run = run;
    random_run.task.corpus = CorpusSource::kUniformRandom;
    const TrainingOutcome r = run_training(random_run, sink);
    rep.random_data_mean = mean_adjacent_similarity(
        all_pairs_best(capture_attention(r.checkpoint.params, o.model, probes)));
  }
  return rep;
}

}  // namespace reuse

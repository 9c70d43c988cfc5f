#include "reuse/cli.h"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "reuse/checkpoint.h"
#include "reuse/config.h"
#include "reuse/cost.h"
#include "reuse/gradcheck.h"
#include "reuse/harness.h"
#include "reuse/report.h"
#include "reuse/theory.h"

namespace reuse {

namespace {

namespace fs = std::filesystem;

// Raised for bad flag combinations found after parsing; maps to kExitUsage.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Output directory with its manifest.json.
class RunDir {
 public:
  RunDir(std::string command, const std::vector<std::string>& args, const std::string& dir)
      : dir_(dir) {
    manifest_ = Json{{"command", std::move(command)},
                     {"args", args},
                     {"tool_version", kToolVersion},
                     {"started_at", utc_now()},
                     {"artifacts", Json::array()}};
    if (!dir_.empty()) fs::create_directories(dir_);
  }

  bool enabled() const { return !dir_.empty(); }
  Json& manifest() { return manifest_; }

  void write(const std::string& name, std::string_view bytes) {
    if (!enabled()) return;
    write_file(fs::path(dir_) / name, bytes);
    manifest_["artifacts"].push_back(name);
  }
  void write_json(const std::string& name, const Json& j) { write(name, j.dump(2) + "\n"); }
  fs::path path(const std::string& name) const { return fs::path(dir_) / name; }

  void finish() {
    if (!enabled()) return;
    manifest_["finished_at"] = utc_now();
    write_file(fs::path(dir_) / "manifest.json", manifest_.dump(2) + "\n");
  }

 private:
  std::string dir_;
  Json manifest_;
};

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  try {
    const std::size_t dots = text.find("..");
    if (dots != std::string::npos) {
      const int lo = std::stoi(text.substr(0, dots));
      const int hi = std::stoi(text.substr(dots + 2));
      if (hi < lo) throw UsageError("empty range " + text);
      for (int v = lo; v <= hi; ++v) out.push_back(v);
      return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  } catch (const std::logic_error&) {
    throw UsageError("cannot parse integer list \"" + text + "\" (use 0..12 or 0,2,4)");
  }
  if (out.empty()) throw UsageError("empty integer list");
  return out;
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  } catch (const std::logic_error&) {
    throw UsageError("cannot parse number list \"" + text + "\"");
  }
  if (out.empty()) throw UsageError("empty number list");
  return out;
}

ReuseSchedule schedule_from_flags(const std::string& name, int p, int k) {
  Json j{{"variant", name}};
  if (p >= 0) j["P"] = p;
  if (k >= 0) j["K"] = k;
  return schedule_from_json(j);
}

Json eval_json(const EvalResult& e) {
  return Json{{"loss", e.loss}, {"accuracy", e.accuracy}, {"counted", e.counted}};
}

Json metric_json(const MetricRecord& m) {
  Json j{{"step", m.step},
         {"train_loss", m.train_loss},
         {"eval_loss", m.eval_loss},
         {"eval_accuracy", m.eval_accuracy},
         {"wall_seconds", m.wall_seconds}};
  if (m.adjacent_similarity) j["adjacent_similarity"] = *m.adjacent_similarity;
  return j;
}

Json cost_report_json(const CostReport& r) {
  Json breakdown = Json::array();
  for (const CostEntry& e : r.breakdown) {
    breakdown.push_back(Json{{"name", e.name}, {"params", e.params}, {"flops", e.flops}});
  }
  Json j{{"name", r.name},
         {"n", r.n},
         {"params_total", r.params_total},
         {"flops_total", r.flops_total},
         {"breakdown", breakdown}};
  if (r.baseline_name) {
    j["baseline"] = *r.baseline_name;
    j["params_ratio"] = r.params_ratio;
    j["flops_ratio"] = r.flops_ratio;
  }
  return j;
}

Corpus read_corpus(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open corpus file " + path.string());
  Corpus corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::stringstream ss(line);
    Sequence seq;
    long long v;
    while (ss >> v) seq.push_back(static_cast<int>(v));
    if (!ss.eof()) {
      throw UsageError(path.string() + " line " + std::to_string(line_no) + ": not an integer");
    }
    if (!seq.empty()) corpus.push_back(std::move(seq));
  }
  if (corpus.empty()) throw UsageError("corpus file " + path.string() + " has no sequences");
  return corpus;
}

void check_threads(int threads) {
  if (threads < 1) throw UsageError("--threads must be >= 1");
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  std::string task;
  int steps = -1;
  int batch_size = -1;
  double lr = -1.0;
  int capture_every = -1;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
};

ConfigFile load_or_default(const std::string& path) {
  if (path.empty()) return ConfigFile{};
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  return load_config_file(path);
}

int cmd_train(const TrainArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  check_threads(a.threads);
  ConfigFile cfg = load_or_default(a.config);
  if (!a.task.empty()) {
    try {
      cfg.task.kind = parse_task(a.task);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (a.steps >= 0) cfg.train.steps = a.steps;
  if (a.batch_size > 0) cfg.train.batch_size = a.batch_size;
  if (a.lr >= 0.0) cfg.train.learning_rate = a.lr;
  if (a.capture_every >= 0) cfg.train.capture_every = a.capture_every;

  RunDir dir("train", args, a.out);
  dir.manifest()["config"] = config_file_to_json(cfg);
  dir.manifest()["seeds"] = Json{{"run", a.seed}};
  dir.manifest()["threads"] = a.threads;
  dir.write_json("config.json", config_file_to_json(cfg));

  std::ofstream metrics(dir.path("metrics.jsonl"), std::ios::trunc);
  const TrainingOutcome o =
      run_training(TrainRunConfig{cfg.model, cfg.task, cfg.train, a.seed}, [&](const MetricRecord& m) {
        metrics << metric_json(m).dump() << '\n';
        metrics.flush();
        out << "step " << m.step << " train_loss " << m.train_loss << " eval_acc "
            << m.eval_accuracy << '\n';
      });
  metrics.close();
  dir.manifest()["artifacts"].push_back("metrics.jsonl");
  dir.write("checkpoint.ratt", encode_checkpoint(o.checkpoint));
  const Json summary{{"steps", o.checkpoint.step},
                     {"parameters", o.checkpoint.params.parameter_count()},
                     {"final_eval", eval_json(o.final_eval)}};
  dir.write_json("summary.json", summary);
  dir.finish();
  out << summary.dump(2) << '\n';
  return kExitOk;
}

// ---- similarity ------------------------------------------------------------

struct SimilarityArgs {
  std::string checkpoint;
  std::string config;
  std::string capture_file;
  std::string corpus;
  int probes = 256;
  std::uint64_t seed = 0;
  std::string convergence;
  std::string out;
  std::string save_capture;
  int threads = 1;
};

int cmd_similarity(const SimilarityArgs& a, const std::vector<std::string>& args,
                   std::ostream& out) {
  check_threads(a.threads);
  if (a.checkpoint.empty() == a.capture_file.empty()) {
    throw UsageError("give exactly one of --checkpoint or --capture-file");
  }
  RunDir dir("similarity", args, a.out);
  dir.manifest()["seeds"] = Json{{"probes", a.seed}};

  std::string model_name;
  std::string dataset_name;
  AttentionCapture capture = [&] {
    if (!a.capture_file.empty()) {
      model_name = a.capture_file;
      dataset_name = "capture";
      return load_capture(a.capture_file);
    }
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    model_name = a.checkpoint;
    std::vector<Example> probes;
    if (!a.corpus.empty()) {
      dataset_name = a.corpus;
      for (Sequence& s : read_corpus(a.corpus)) {
        probes.push_back(Example{s, std::vector<int>(s.size(), kIgnoreTarget)});
      }
    } else {
      std::string config_path = a.config;
      const fs::path sibling = fs::path(a.checkpoint).parent_path() / "config.json";
      if (config_path.empty() && fs::exists(sibling)) config_path = sibling.string();
      if (config_path.empty()) {
        throw UsageError("need --config or --corpus to build probes for " + a.checkpoint);
      }
      const ConfigFile cfg = load_or_default(config_path);
      dataset_name = std::string(task_name(cfg.task.kind)) + "/" +
                     std::string(corpus_name(cfg.task.corpus));
      Rng rng = stream(a.seed, Stream::kProbe);
      probes = TaskSampler(cfg.task).batch(rng, a.probes);
    }
    return capture_attention(ck.params, ck.config, probes);
  }();
  if (!a.save_capture.empty()) {
    save_capture(a.save_capture, capture);
    dir.manifest()["capture_file"] = a.save_capture;
  }

  const SimilarityReport report = analyze(capture, model_name, dataset_name);
  const Json j = similarity_report_json(report);
  dir.write_json("similarity.json", j);
  dir.write("all_pairs.csv", all_pairs_csv(report.all_pairs, report.layer_ids));
  if (!report.adjacent_profiles.empty()) {
    dir.write("adjacent_profiles.csv",
              adjacent_profiles_csv(report.adjacent_profiles, report.layer_ids));
  }
  dir.write("heatmap.svg", heatmap_svg(report.all_pairs, report.layer_ids,
                                       "Best-head attention similarity"));
  if (!a.convergence.empty()) {
    const auto points = convergence_curve(capture, parse_int_list(a.convergence));
    dir.write("convergence.csv", convergence_csv(points, report.layer_ids));
  }
  dir.finish();
  out << j.dump(2) << '\n';
  return kExitOk;
}

// ---- theory ----------------------------------------------------------------

struct Lemma1Args {
  int d = 16;
  int n = 8;
  long samples = 100000;
  std::string distribution = "both";
  double tolerance = -1.0;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
};

int cmd_lemma1(const Lemma1Args& a, const std::vector<std::string>& args, std::ostream& out) {
  check_threads(a.threads);
  std::vector<WeightDistribution> dists;
  if (a.distribution == "both") {
    dists = {WeightDistribution::kGaussian, WeightDistribution::kRademacher};
  } else {
    try {
      dists = {parse_distribution(a.distribution)};
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  const double tol = a.tolerance > 0.0 ? a.tolerance : (a.samples >= 100000 ? 0.05 : 0.15);
  RunDir dir("theory lemma1", args, a.out);
  dir.manifest()["seeds"] = Json{{"lemma1", a.seed}};
  Json results = Json::array();
  bool pass = true;
  for (WeightDistribution dist : dists) {
    Lemma1Options o;
    o.d = a.d;
    o.n = a.n;
    o.samples = a.samples;
    o.distribution = dist;
    o.seed = a.seed;
    const Lemma1Result r = lemma1_mc(o);
    const bool ok = std::abs(r.ratio - 1.0) <= tol;
    pass = pass && ok;
    results.push_back(Json{{"distribution", std::string(distribution_name(dist))},
                           {"lhs", r.lhs},
                           {"rhs", r.rhs},
                           {"ratio", r.ratio},
                           {"pass", ok}});
  }
  const Json verdict{{"lemma", "lemma1"}, {"d", a.d},          {"n", a.n},
                     {"samples", a.samples}, {"seed", a.seed}, {"tolerance", tol},
                     {"results", results},   {"pass", pass}};
  dir.write_json("lemma1.json", verdict);
  dir.finish();
  out << verdict.dump(2) << '\n';
  return pass ? kExitOk : kExitCheckFailed;
}

struct Lemma2Args {
  int trials = 200;
  int n = 8;
  int d = 8;
  std::string epsilon = "0,0.05,0.1,0.25,0.5";
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
};

int cmd_lemma2(const Lemma2Args& a, const std::vector<std::string>& args, std::ostream& out) {
  check_threads(a.threads);
  const std::vector<double> targets = parse_double_list(a.epsilon);
  RunDir dir("theory lemma2", args, a.out);
  dir.manifest()["seeds"] = Json{{"lemma2", a.seed}};
  const std::vector<Lemma2SweepRow> rows = lemma2_sweep(a.n, a.d, a.seed, targets, a.trials);
  bool pass = true;
  Json table = Json::array();
  for (const Lemma2SweepRow& r : rows) {
    bool ok = r.held == r.trials;
    if (r.epsilon_target == 0.0) ok = ok && r.max_err < 1e-12;
    pass = pass && ok;
    table.push_back(Json{{"epsilon_target", r.epsilon_target},
                         {"trials", r.trials},
                         {"held", r.held},
                         {"max_err", r.max_err},
                         {"max_bound", r.max_bound},
                         {"max_err_over_bound", r.max_err_over_bound},
                         {"pass", ok}});
  }
  const Lemma2Result neg = lemma2_negative_control(a.n, a.d, a.seed, 0.25);
  const Json verdict{
      {"lemma", "lemma2"},
      {"n", a.n},
      {"d", a.d},
      {"seed", a.seed},
      {"slack", 1e-9},
      {"rows", table},
      {"negative_control",
       Json{{"w1_norm", 3.0}, {"epsilon", neg.epsilon}, {"err", neg.err}, {"bound", neg.bound},
            {"holds", neg.holds}, {"asserted", false}}},
      {"pass", pass}};
  dir.write_json("lemma2.json", verdict);
  dir.write("lemma2_sweep.csv", lemma2_sweep_csv(rows));
  dir.finish();
  out << verdict.dump(2) << '\n';
  return pass ? kExitOk : kExitCheckFailed;
}

// ---- cost ------------------------------------------------------------------

struct CostArgs {
  std::string preset;
  std::string config;
  std::string schedule;
  int reuse_layers = -1;
  int reuse_heads = -1;
  int n = -1;
  std::string baseline;
  bool baseline_given = false;
  std::string sweep_k;
  int flops_per_mac = 1;
  bool untied_head = false;
  long head_positions = 0;
  bool no_layer_norm = false;
  std::string out;
};

ModelConfig cost_model(const CostArgs& a, const std::string& config_path) {
  ModelConfig m;
  if (!config_path.empty()) {
    if (!fs::exists(config_path)) throw ConfigError("config file not found: " + config_path);
    m = load_config_file(config_path).model;
  } else if (a.preset == "base") {
    m = bert_base_config();
  } else if (a.preset == "large") {
    m = bert_large_config();
  } else {
    throw UsageError("give --preset base|large or --config FILE");
  }
  return m;
}

int cmd_cost(const CostArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  if (!a.preset.empty() && !a.config.empty()) throw UsageError("--preset and --config conflict");
  ModelConfig model = cost_model(a, a.config);
  if (!a.schedule.empty()) model.schedule = schedule_from_flags(a.schedule, a.reuse_layers, a.reuse_heads);
  else if (a.reuse_layers >= 0 || a.reuse_heads >= 0) throw UsageError("-P/-K need --schedule");
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  const Count n = a.n > 0 ? a.n : model.max_len;
  CostOptions opts;
  opts.flops_per_mac = a.flops_per_mac;
  opts.tie_embeddings = !a.untied_head;
  opts.head_positions = a.head_positions;
  opts.count_layer_norm = !a.no_layer_norm;

  RunDir dir("cost", args, a.out);
  if (!a.sweep_k.empty()) {
    const std::vector<int> ks = parse_int_list(a.sweep_k);
    const std::string csv = cost_sweep_csv(cost_sweep(model, n, ks, opts), ks);
    dir.write("cost_sweep.csv", csv);
    dir.finish();
    out << csv;
    return kExitOk;
  }
  CostReport report = model_cost(model, n, opts, model.schedule.describe());
  if (a.baseline_given) {
    ModelConfig base;
    if (a.baseline.empty()) {
      base = model;
      base.schedule = ReuseSchedule::baseline();
    } else {
      if (!fs::exists(a.baseline)) throw ConfigError("baseline config not found: " + a.baseline);
      base = load_config_file(a.baseline).model;
    }
    set_baseline(report, model_cost(base, n, opts, base.schedule.describe()));
  }
  const Json j = cost_report_json(report);
  dir.write_json("cost.json", j);
  dir.finish();
  out << j.dump(2) << '\n';
  return kExitOk;
}

// ---- gradcheck -------------------------------------------------------------

struct GradcheckArgs {
  std::string schedule = "all";
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  bool corrupt = false;
  std::string out;
};

int cmd_gradcheck(const GradcheckArgs& a, const std::vector<std::string>& args,
                  std::ostream& out) {
  const std::vector<std::pair<std::string, ReuseSchedule>> all = {
      {"baseline", ReuseSchedule::baseline()},   {"partial", ReuseSchedule::partial_layer(1)},
      {"full", ReuseSchedule::full_layer(1)},    {"alternate", ReuseSchedule::alternate(1)},
      {"allend", ReuseSchedule::all_end(1)},     {"skip", ReuseSchedule::skip(1)}};
  std::vector<std::pair<std::string, ReuseSchedule>> chosen;
  for (const auto& entry : all) {
    if (a.schedule == "all" || a.schedule == entry.first) chosen.push_back(entry);
  }
  if (chosen.empty()) {
    throw UsageError("unknown schedule \"" + a.schedule +
                     "\" (expected all|baseline|partial|full|alternate|allend|skip)");
  }
  RunDir dir("gradcheck", args, a.out);
  dir.manifest()["seeds"] = Json{{"gradcheck", a.seed}};
  GradCheckOptions opts;
  opts.corrupt_gradient = a.corrupt;
  Json results = Json::array();
  bool pass = true;
  for (const auto& [name, schedule] : chosen) {
    const GradCheckReport r = run_gradcheck(tiny_gradcheck_config(schedule), a.seed, opts);
    const bool ok = r.max_relative_error < a.tolerance;
    pass = pass && ok;
    results.push_back(Json{{"schedule", name},
                           {"max_relative_error", r.max_relative_error},
                           {"worst_parameter", r.worst_parameter},
                           {"parameters_checked", r.parameters_checked},
                           {"pass", ok}});
  }
  const Json verdict{{"tolerance", a.tolerance}, {"seed", a.seed}, {"results", results},
                     {"pass", pass}};
  dir.write_json("gradcheck.json", verdict);
  dir.finish();
  out << verdict.dump(2) << '\n';
  return pass ? kExitOk : kExitCheckFailed;
}

// ---- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string config;
  std::string k;
  int steps = -1;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
};

int cmd_sweep(const SweepArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  check_threads(a.threads);
  ConfigFile cfg = load_or_default(a.config);
  if (a.steps >= 0) cfg.train.steps = a.steps;
  const std::vector<int> ks = parse_int_list(a.k);
  RunDir dir("sweep", args, a.out);
  dir.manifest()["config"] = config_file_to_json(cfg);
  dir.manifest()["seeds"] = Json{{"run", a.seed}};

  std::ofstream metrics(dir.path("metrics.jsonl"), std::ios::trunc);
  std::size_t run_index = 0;
  const auto rows = ablation_sweep(TrainRunConfig{cfg.model, cfg.task, cfg.train, a.seed}, ks,
                                   [&](const MetricRecord& m) {
                                     Json j = metric_json(m);
                                     j["K"] = ks[std::min(run_index, ks.size() - 1)];
                                     metrics << j.dump() << '\n';
                                     if (m.step == cfg.train.steps) ++run_index;
                                   });
  metrics.close();
  dir.manifest()["artifacts"].push_back("metrics.jsonl");

  std::ostringstream csv;
  csv.precision(10);
  csv << "K,parameters,eval_loss,eval_accuracy,final_train_loss\n";
  for (const SweepRow& r : rows) {
    csv << r.reuse_heads << ',' << r.parameters << ',' << r.eval.loss << ',' << r.eval.accuracy
        << ',' << r.final_train_loss << '\n';
  }
  dir.write("sweep.csv", csv.str());
  dir.finish();
  out << csv.str();
  return kExitOk;
}

// ---- compare-random --------------------------------------------------------

struct CompareArgs {
  std::uint64_t seed = 0;
  int steps = -1;
  double init_std = -1.0;
  int probes = -1;
  bool random_data = false;
  bool check = false;
  std::string out;
  int threads = 1;
};

int cmd_compare(const CompareArgs& a, const std::vector<std::string>& args, std::ostream& out) {
  check_threads(a.threads);
  CompareRandomOptions o = default_compare_options(a.seed);
  if (a.steps >= 0) o.train.steps = a.steps;
  if (a.init_std > 0.0) o.model.init_std = a.init_std;
  if (a.probes > 0) o.train.probe_examples = a.probes;
  o.include_random_data_model = a.random_data;

  RunDir dir("compare-random", args, a.out);
  dir.manifest()["config"] = Json{{"model", model_config_to_json(o.model)},
                                  {"task", task_spec_to_json(o.task)},
                                  {"train", train_settings_to_json(o.train)}};
  dir.manifest()["seeds"] = Json{{"run", a.seed}};
  const CompareRandomReport r = trained_vs_random_similarity(o, [&](const MetricRecord& m) {
    out << "step " << m.step << " train_loss " << m.train_loss << " eval_acc " << m.eval_accuracy
        << '\n';
  });
  const double probe_shift = std::abs(r.random_init_mean - r.random_init_mean_alt_probes);
  const bool gap_ok = r.gap > 0.1;
  const bool probe_ok = probe_shift < 0.05;
  Json j{{"trained_mean_adjacent", r.trained_mean},
         {"random_init_mean_adjacent", r.random_init_mean},
         {"random_init_mean_adjacent_alt_probes", r.random_init_mean_alt_probes},
         {"gap", r.gap},
         {"probe_shift", probe_shift},
         {"trained_eval", eval_json(r.trained_eval)},
         {"trained_all_pairs", matrix_to_json(r.trained_all_pairs)},
         {"random_init_all_pairs", matrix_to_json(r.random_init_all_pairs)},
         {"checks", Json{{"gap_above_0.1", gap_ok}, {"probe_shift_below_0.05", probe_ok}}}};
  if (r.random_data_mean) j["random_data_mean_adjacent"] = *r.random_data_mean;
  dir.write_json("compare.json", j);
  dir.write("trained_heatmap.svg",
            heatmap_svg(r.trained_all_pairs, {}, "Trained model, structured probes"));
  dir.write("random_init_heatmap.svg",
            heatmap_svg(r.random_init_all_pairs, {}, "Random init, structured probes"));
  dir.finish();
  out << j.dump(2) << '\n';
  return (a.check && !(gap_ok && probe_ok)) ? kExitCheckFailed : kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reuse-attention transformer laboratory", "reuse_lab"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  TrainArgs train;
  CLI::App* c_train = app.add_subcommand("train", "Train a model on a synthetic task");
  c_train->add_option("--config", train.config, "JSON config file");
  c_train->add_option("--task", train.task, "Task override: copy|reverse|sort|masked");
  c_train->add_option("--steps", train.steps, "Training steps override");
  c_train->add_option("--batch-size", train.batch_size, "Batch size override");
  c_train->add_option("--lr", train.lr, "Learning rate override");
  c_train->add_option("--capture-every", train.capture_every,
                      "Steps between probe-set similarity captures (0 = off)");
  c_train->add_option("--seed", train.seed, "Run seed")->required();
  c_train->add_option("--out", train.out, "Output directory")->required();
  c_train->add_option("--threads", train.threads, "Worker threads")->capture_default_str();

  SimilarityArgs sim;
  CLI::App* c_sim = app.add_subcommand("similarity", "Attention-similarity analysis");
  c_sim->add_option("--checkpoint", sim.checkpoint, "Checkpoint to probe");
  c_sim->add_option("--config", sim.config, "Config whose task generates the probes");
  c_sim->add_option("--capture-file", sim.capture_file, "Analyze a capture dump instead");
  c_sim->add_option("--corpus", sim.corpus, "Probe sequences, one per line");
  c_sim->add_option("--probes", sim.probes, "Generated probe count")->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "Probe seed")->required();
  c_sim->add_option("--convergence", sim.convergence, "Sample sizes, e.g. 32,128,256");
  c_sim->add_option("--save-capture", sim.save_capture, "Write the probe capture here");
  c_sim->add_option("--out", sim.out, "Output directory");
  c_sim->add_option("--threads", sim.threads, "Worker threads")->capture_default_str();

  CLI::App* c_theory = app.add_subcommand("theory", "Numerical checks of the two lemmas");
  c_theory->require_subcommand(1);
  Lemma1Args l1;
  CLI::App* c_l1 = c_theory->add_subcommand("lemma1", "Random heads are dissimilar");
  c_l1->add_option("--d", l1.d, "Model width")->capture_default_str();
  c_l1->add_option("--n", l1.n, "Sequence length")->capture_default_str();
  c_l1->add_option("--samples", l1.samples, "Monte-Carlo samples")->capture_default_str();
  c_l1->add_option("--distribution", l1.distribution, "gaussian|rademacher|both")
      ->capture_default_str();
  c_l1->add_option("--tolerance", l1.tolerance, "|ratio - 1| tolerance (default by samples)");
  c_l1->add_option("--seed", l1.seed, "Seed")->required();
  c_l1->add_option("--out", l1.out, "Output directory");
  c_l1->add_option("--threads", l1.threads, "Worker threads")->capture_default_str();
  Lemma2Args l2;
  CLI::App* c_l2 = c_theory->add_subcommand("lemma2", "Reuse error bound on two linear layers");
  c_l2->add_option("--trials", l2.trials, "Instances per epsilon")->capture_default_str();
  c_l2->add_option("--n", l2.n, "Sequence length")->capture_default_str();
  c_l2->add_option("--d", l2.d, "Model width")->capture_default_str();
  c_l2->add_option("--epsilon", l2.epsilon, "Epsilon targets, comma separated")
      ->capture_default_str();
  c_l2->add_option("--seed", l2.seed, "Seed")->required();
  c_l2->add_option("--out", l2.out, "Output directory");
  c_l2->add_option("--threads", l2.threads, "Worker threads")->capture_default_str();

  CostArgs cost;
  CLI::App* c_cost = app.add_subcommand("cost", "Parameter and FLOP accounting");
  c_cost->add_option("--preset", cost.preset, "base|large encoder shapes");
  c_cost->add_option("--config", cost.config, "JSON config file");
  c_cost->add_option("--schedule", cost.schedule, "Schedule override");
  c_cost->add_option("-P,--reuse-layers", cost.reuse_layers, "Reuse layer count");
  c_cost->add_option("-K,--reuse-heads", cost.reuse_heads, "Reused heads per layer");
  c_cost->add_option("--n", cost.n, "Sequence length (default max_len)");
  c_cost->add_option("--baseline", cost.baseline,
                     "Report ratios against this config (no value: same model without reuse)")
      ->expected(0, 1);
  c_cost->add_option("--sweep-k", cost.sweep_k, "K values, e.g. 0..12");
  c_cost->add_option("--flops-per-mac", cost.flops_per_mac, "FLOPs per multiply-add")
      ->capture_default_str();
  c_cost->add_flag("--untied-head", cost.untied_head, "Count a separate output projection");
  c_cost->add_option("--head-positions", cost.head_positions,
                     "Positions whose output logits count as FLOPs");
  c_cost->add_flag("--no-layer-norm", cost.no_layer_norm, "Leave LayerNorm gains out");
  c_cost->add_option("--out", cost.out, "Output directory");

  GradcheckArgs gc;
  CLI::App* c_gc = app.add_subcommand("gradcheck", "Backprop vs finite differences");
  c_gc->add_option("--schedule", gc.schedule, "all|baseline|partial|full|alternate|allend|skip")
      ->capture_default_str();
  c_gc->add_option("--seed", gc.seed, "Seed")->required();
  c_gc->add_option("--tolerance", gc.tolerance, "Max relative error")->capture_default_str();
  c_gc->add_flag("--corrupt-gradient", gc.corrupt)->group("");
  c_gc->add_option("--out", gc.out, "Output directory");

  SweepArgs sweep;
  CLI::App* c_sweep = app.add_subcommand("sweep", "Train one model per reused-head count K");
  c_sweep->add_option("--config", sweep.config, "JSON config with a partial or full schedule");
  c_sweep->add_option("--k", sweep.k, "K values, e.g. 0,2,4")->required();
  c_sweep->add_option("--steps", sweep.steps, "Training steps override");
  c_sweep->add_option("--seed", sweep.seed, "Run seed")->required();
  c_sweep->add_option("--out", sweep.out, "Output directory")->required();
  c_sweep->add_option("--threads", sweep.threads, "Worker threads")->capture_default_str();

  CompareArgs cmp;
  CLI::App* c_cmp =
      app.add_subcommand("compare-random", "Adjacent-layer similarity, trained vs random init");
  c_cmp->add_option("--seed", cmp.seed, "Run seed")->required();
  c_cmp->add_option("--steps", cmp.steps, "Training steps override");
  c_cmp->add_option("--init-std", cmp.init_std, "Initialization std override");
  c_cmp->add_option("--probes", cmp.probes, "Probe count override");
  c_cmp->add_flag("--random-data", cmp.random_data, "Also train on uniformly random text");
  c_cmp->add_flag("--check", cmp.check, "Exit 1 unless gap > 0.1 and probe shift < 0.05");
  c_cmp->add_option("--out", cmp.out, "Output directory");
  c_cmp->add_option("--threads", cmp.threads, "Worker threads")->capture_default_str();

  std::vector<std::string> argv_store{"reuse_lab"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (std::string& s : argv_store) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*c_train) return cmd_train(train, args, out);
    if (*c_sim) return cmd_similarity(sim, args, out);
    if (*c_l1) return cmd_lemma1(l1, args, out);
    if (*c_l2) return cmd_lemma2(l2, args, out);
    if (*c_cost) {
      cost.baseline_given = c_cost->count("--baseline") > 0;
      return cmd_cost(cost, args, out);
    }
    if (*c_gc) return cmd_gradcheck(gc, args, out);
    if (*c_sweep) return cmd_sweep(sweep, args, out);
    if (*c_cmp) return cmd_compare(cmp, args, out);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace reuse

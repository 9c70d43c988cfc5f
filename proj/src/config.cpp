#include "reuse/config.h"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace reuse {

namespace {

// Rejects keys outside `allowed` and names the first offender.
void check_keys(const Json& j, const char* section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.contains(key)) {
      throw ConfigError("unknown key \"" + key + "\" in " + section, 0, key);
    }
  }
}

template <typename T>
T get(const Json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    throw ConfigError(std::string("key \"") + key + "\" has the wrong type", 0, key);
  }
}

template <typename T>
T require(const Json& j, const char* key, const char* section) {
  if (!j.contains(key)) {
    throw ConfigError(std::string("missing key \"") + key + "\" in " + section);
  }
  return get<T>(j, key, T{});
}

// Wraps std::invalid_argument from validators into a ConfigError.
template <typename F>
void validated(const char* section, F&& f) {
  try {
    f();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string(section) + ": " + e.what());
  }
}

int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + offset, '\n'));
}

}  // namespace

Json schedule_to_json(const ReuseSchedule& schedule) {
  Json j{{"variant", std::string(variant_name(schedule.variant()))}};
  if (schedule.declared_layers() >= 0 && schedule.variant() != ReuseVariant::kBaseline &&
      schedule.variant() != ReuseVariant::kPartialLayer) {
    j["P"] = schedule.declared_layers();
  }
  if (schedule.declared_heads() >= 0 && schedule.variant() != ReuseVariant::kBaseline) {
    j["K"] = schedule.declared_heads();
  }
  return j;
}

ReuseSchedule schedule_from_json(const Json& j) {
  check_keys(j, "schedule", {"variant", "P", "K"});
  const std::string name = require<std::string>(j, "variant", "schedule");
  ReuseVariant variant;
  validated("schedule", [&] { variant = parse_variant(name); });
  const int p = get<int>(j, "P", -1);
  const int k = get<int>(j, "K", -1);
  ReuseSchedule out;
  validated("schedule", [&] {
    switch (variant) {
      case ReuseVariant::kBaseline:
        if (p > 0 || k > 0) throw std::invalid_argument("baseline takes no P or K");
        out = ReuseSchedule::baseline();
        break;
      case ReuseVariant::kPartialLayer:
        if (k < 0) throw std::invalid_argument("partial reuse needs K");
        out = ReuseSchedule::partial_layer(k);
        break;
      case ReuseVariant::kFullLayer:
        if (p < 0) throw std::invalid_argument("full reuse needs P");
        out = ReuseSchedule::full_layer(p, k);
        break;
      case ReuseVariant::kAlternate:
      case ReuseVariant::kAllEnd:
      case ReuseVariant::kSkip:
        if (p < 0) throw std::invalid_argument(name + " needs P");
        if (k >= 0) throw std::invalid_argument(name + " always reuses all heads; drop K");
        out = variant == ReuseVariant::kAlternate ? ReuseSchedule::alternate(p)
              : variant == ReuseVariant::kAllEnd  ? ReuseSchedule::all_end(p)
                                                  : ReuseSchedule::skip(p);
        break;
    }
  });
  return out;
}

Json model_config_to_json(const ModelConfig& c) {
  return Json{{"layers", c.layers},
              {"heads", c.heads},
              {"d_model", c.d_model},
              {"d_ff", c.d_ff},
              {"vocab", c.vocab},
              {"max_len", c.max_len},
              {"activation", std::string(activation_name(c.activation))},
              {"norm", "pre"},
              {"init_std", c.init_std},
              {"detach_reused_scores", c.detach_reused_scores},
              {"schedule", schedule_to_json(c.schedule)}};
}

ModelConfig model_config_from_json(const Json& j) {
  check_keys(j, "model", {"layers", "heads", "d_model", "d_ff", "vocab", "max_len", "activation",
                          "norm", "init_std", "detach_reused_scores", "schedule"});
  ModelConfig c;
  c.layers = require<int>(j, "layers", "model");
  c.heads = require<int>(j, "heads", "model");
  c.d_model = require<int>(j, "d_model", "model");
  c.d_ff = require<int>(j, "d_ff", "model");
  c.vocab = require<int>(j, "vocab", "model");
  c.max_len = require<int>(j, "max_len", "model");
  validated("model", [&] {
    c.activation = parse_activation(get<std::string>(j, "activation", "gelu"));
  });
  if (get<std::string>(j, "norm", "pre") != "pre") {
    throw ConfigError("model: only pre-norm layers are implemented", 0, "norm");
  }
  c.init_std = get<double>(j, "init_std", c.init_std);
  c.detach_reused_scores = get<bool>(j, "detach_reused_scores", false);
  if (j.contains("schedule")) c.schedule = schedule_from_json(j.at("schedule"));
  validated("model", [&] { c.validate(); });
  return c;
}

Json task_spec_to_json(const TaskSpec& s) {
  return Json{{"kind", std::string(task_name(s.kind))},
              {"vocab", s.vocab},
              {"seq_len", s.seq_len},
              {"mask_rate", s.mask_rate},
              {"corpus", std::string(corpus_name(s.corpus))},
              {"corpus_seed", s.corpus_seed}};
}

TaskSpec task_spec_from_json(const Json& j) {
  check_keys(j, "task", {"kind", "vocab", "seq_len", "mask_rate", "corpus", "corpus_seed"});
  TaskSpec s;
  validated("task", [&] {
    s.kind = parse_task(get<std::string>(j, "kind", "copy"));
    s.corpus = parse_corpus(get<std::string>(j, "corpus", "structured"));
  });
  s.vocab = get<int>(j, "vocab", s.vocab);
  s.seq_len = get<int>(j, "seq_len", s.seq_len);
  s.mask_rate = get<double>(j, "mask_rate", s.mask_rate);
  s.corpus_seed = get<std::uint64_t>(j, "corpus_seed", s.corpus_seed);
  return s;
}

Json train_settings_to_json(const TrainSettings& t) {
  return Json{{"steps", t.steps},
              {"batch_size", t.batch_size},
              {"learning_rate", t.learning_rate},
              {"warmup_steps", t.warmup_steps},
              {"log_every", t.log_every},
              {"capture_every", t.capture_every},
              {"eval_examples", t.eval_examples},
              {"probe_examples", t.probe_examples},
              {"clip_norm", t.clip_norm}};
}

TrainSettings train_settings_from_json(const Json& j) {
  check_keys(j, "train", {"steps", "batch_size", "learning_rate", "warmup_steps", "log_every",
                          "capture_every", "eval_examples", "probe_examples", "clip_norm"});
  TrainSettings t;
  t.steps = get<int>(j, "steps", t.steps);
  t.batch_size = get<int>(j, "batch_size", t.batch_size);
  t.learning_rate = get<double>(j, "learning_rate", t.learning_rate);
  t.warmup_steps = get<int>(j, "warmup_steps", t.warmup_steps);
  t.log_every = get<int>(j, "log_every", t.log_every);
  t.capture_every = get<int>(j, "capture_every", t.capture_every);
  t.eval_examples = get<int>(j, "eval_examples", t.eval_examples);
  t.probe_examples = get<int>(j, "probe_examples", t.probe_examples);
  t.clip_norm = get<double>(j, "clip_norm", t.clip_norm);
  if (t.steps < 0 || t.batch_size < 1 || t.warmup_steps < 0 || t.log_every < 1 ||
      t.capture_every < 0 || t.eval_examples < 1 || t.probe_examples < 1 ||
      !(t.learning_rate >= 0.0)) {
    throw ConfigError("train: counts must be positive (steps, warmup, capture_every may be 0)");
  }
  return t;
}

ConfigFile parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what(),
                      line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1));
  }
  try {
    check_keys(j, "config", {"schema_version", "model", "task", "train"});
    const int version = require<int>(j, "schema_version", "config");
    if (version != kConfigSchemaVersion) {
      throw ConfigError("unsupported schema_version " + std::to_string(version) + " (expected " +
                            std::to_string(kConfigSchemaVersion) + ")",
                        0, "schema_version");
    }
    if (!j.contains("model")) throw ConfigError("missing key \"model\"");
    ConfigFile config;
    config.model = model_config_from_json(j.at("model"));
    if (j.contains("task")) config.task = task_spec_from_json(j.at("task"));
    if (j.contains("train")) config.train = train_settings_from_json(j.at("train"));
    return config;
  } catch (const ConfigError& e) {
    if (e.line() > 0 || e.key().empty()) throw;
    const std::size_t at = text.find("\"" + e.key() + "\"");
    if (at == std::string::npos) throw;
    throw ConfigError(e.what(), line_of_offset(text, at), e.key());
  }
}

ConfigFile load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

Json config_file_to_json(const ConfigFile& config) {
  return Json{{"schema_version", kConfigSchemaVersion},
              {"model", model_config_to_json(config.model)},
              {"task", task_spec_to_json(config.task)},
              {"train", train_settings_to_json(config.train)}};
}

}  // namespace reuse

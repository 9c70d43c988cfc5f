#include <filesystem>

#include "gtest/gtest.h"
#include "reuse/checkpoint.h"
#include "reuse/config.h"
#include "reuse/report.h"
#include "test_util.h"

namespace reuse {
namespace {

namespace fs = std::filesystem;

ModelConfig tiny(const ReuseSchedule& schedule) {
  ModelConfig c;
  c.layers = 3;
  c.heads = 2;
  c.d_model = 8;
  c.d_ff = 16;
  c.vocab = 11;
  c.max_len = 9;
  c.init_std = 0.3;
  c.schedule = schedule;
  return c;
}

Checkpoint sample_checkpoint(const ReuseSchedule& schedule, std::uint64_t seed) {
  Checkpoint c;
  c.config = tiny(schedule);
  Rng rng(seed);
  c.params = ModelParams::init(c.config, rng);
  c.optimizer = AdamState::zeros_like(c.params);
  c.optimizer.m.for_each([&](const std::string&, Tensor2D& t) {
    for (double& v : t.values()) v = rng.normal();
  });
  c.optimizer.step = 17;
  c.step = 17;
  c.seed = seed;
  return c;
}

fs::path temp_path(const std::string& name) {
  return fs::temp_directory_path() / ("reuse_persistence_" + name);
}

TEST(LittleEndianTest, KnownBytes) {
  std::string out;
  append_f64_le(out, 1.0);
  ASSERT_EQ(out.size(), 8u);
  EXPECT_EQ(static_cast<unsigned char>(out[7]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(out[6]), 0xf0);
  EXPECT_EQ(out.substr(0, 6), std::string(6, '\0'));
  EXPECT_EQ(read_f64_le(out, 0), 1.0);
  EXPECT_THROW(read_f64_le(out, 1), std::runtime_error);
}

TEST(CheckpointTest, SaveLoadSaveIsByteIdentical) {
  for (const ReuseSchedule& s : {ReuseSchedule::baseline(), ReuseSchedule::partial_layer(1),
                                 ReuseSchedule::full_layer(1, 2), ReuseSchedule::skip(1)}) {
    const Checkpoint c = sample_checkpoint(s, 5);
    const fs::path path = temp_path("ck.ratt");
    save_checkpoint(path, c);
    const std::string first = read_file(path);
    const Checkpoint loaded = load_checkpoint(path);
    save_checkpoint(path, loaded);
    EXPECT_EQ(read_file(path), first) << s.describe();
    EXPECT_EQ(loaded.config.schedule, s);
    EXPECT_EQ(loaded.params.flatten(), c.params.flatten());
    EXPECT_EQ(loaded.optimizer.m.flatten(), c.optimizer.m.flatten());
    EXPECT_EQ(loaded.optimizer.step, 17);
    EXPECT_EQ(loaded.seed, 5u);
    fs::remove(path);
  }
}

TEST(CheckpointTest, HeaderLayout) {
  const std::string bytes = encode_checkpoint(sample_checkpoint(ReuseSchedule::baseline(), 1));
  EXPECT_EQ(bytes.substr(0, 4), "RATT");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), kCheckpointVersion);
  EXPECT_EQ(bytes[5], '\0');
  const std::size_t len = static_cast<unsigned char>(bytes[6]) |
                          static_cast<unsigned char>(bytes[7]) << 8 |
                          static_cast<unsigned char>(bytes[8]) << 16;
  const Json header = Json::parse(bytes.substr(10, len));
  EXPECT_EQ(header.at("tensors").at(0).at("name"), "param.embed.token");
  EXPECT_EQ(header.at("config").at("layers"), 3);
}

TEST(CheckpointTest, RejectsCorruption) {
  const std::string good = encode_checkpoint(sample_checkpoint(ReuseSchedule::baseline(), 1));
  std::string bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), std::runtime_error);
  EXPECT_THROW(decode_checkpoint(good.substr(0, good.size() - 8)), std::runtime_error);
  std::string bad_version = good;
  bad_version[4] = 9;
  EXPECT_THROW(decode_checkpoint(bad_version), std::runtime_error);
  EXPECT_THROW(load_checkpoint(temp_path("does_not_exist")), std::runtime_error);
}

TEST(CaptureDumpTest, RoundTripIsBitwise) {
  Rng rng(31);
  AttentionCapture c(2, 3, 4);
  c.set_layer_ids({0, 2});
  for (int t = 0; t < 3; ++t) {
    std::vector<Tensor2D> mats;
    for (int k = 0; k < 6; ++k) mats.push_back(testing::random_stochastic(rng, 4));
    c.add_example(mats);
  }
  const fs::path path = temp_path("capture.bin");
  save_capture(path, c);
  const AttentionCapture back = load_capture(path);
  ASSERT_EQ(back.examples(), 3);
  EXPECT_EQ(back.layer_ids(), c.layer_ids());
  for (int t = 0; t < 3; ++t)
    for (int l = 0; l < 2; ++l)
      for (int h = 0; h < 3; ++h) EXPECT_EQ(back.at(t, l, h), c.at(t, l, h));
  EXPECT_EQ(encode_capture(back), read_file(path));
  fs::remove(path);

  std::string truncated = encode_capture(c);
  truncated.pop_back();
  EXPECT_THROW(decode_capture(truncated), std::runtime_error);
}

TEST(ConfigTest, ParsesAndRoundTrips) {
  const std::string text = R"({
  "schema_version": 1,
  "model": {"layers": 4, "heads": 2, "d_model": 16, "d_ff": 32, "vocab": 12, "max_len": 9,
            "activation": "relu", "schedule": {"variant": "partial", "K": 1}},
  "task": {"kind": "reverse", "vocab": 12, "seq_len": 9},
  "train": {"steps": 10, "learning_rate": 0.01}
})";
  const ConfigFile c = parse_config_text(text);
  EXPECT_EQ(c.model.layers, 4);
  EXPECT_EQ(c.model.activation, Activation::kRelu);
  EXPECT_EQ(c.model.schedule, ReuseSchedule::partial_layer(1));
  EXPECT_EQ(c.task.kind, TaskKind::kReverse);
  EXPECT_EQ(c.train.steps, 10);
  EXPECT_EQ(c.train.batch_size, TrainSettings{}.batch_size);
  const ConfigFile again = parse_config_text(config_file_to_json(c).dump());
  EXPECT_EQ(config_file_to_json(again), config_file_to_json(c));
}

TEST(ConfigTest, EverySchedulePersists) {
  for (const ReuseSchedule& s :
       {ReuseSchedule::baseline(), ReuseSchedule::partial_layer(2), ReuseSchedule::full_layer(2),
        ReuseSchedule::full_layer(1, 1), ReuseSchedule::alternate(2), ReuseSchedule::all_end(1),
        ReuseSchedule::skip(2)}) {
    EXPECT_EQ(schedule_from_json(schedule_to_json(s)), s) << s.describe();
  }
}

int error_line(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

TEST(ConfigTest, UnknownKeysReportTheirLine) {
  const std::string text =
      "{\n"
      "  \"schema_version\": 1,\n"
      "  \"model\": {\"layers\": 2, \"heads\": 2, \"d_model\": 8, \"d_ff\": 8,\n"
      "            \"vocab\": 8, \"max_len\": 8,\n"
      "            \"reuse_heads\": 2}\n"
      "}\n";
  EXPECT_EQ(error_line(text), 5);
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("reuse_heads"), std::string::npos);
    EXPECT_EQ(e.key(), "reuse_heads");
  }
}

TEST(ConfigTest, SyntaxErrorsReportTheirLine) {
  EXPECT_EQ(error_line("{\n  \"schema_version\": 1,\n  \"model\": {,}\n}"), 3);
}

TEST(ConfigTest, RejectsBadValues) {
  const auto wrap = [](const std::string& model) {
    return "{\"schema_version\": 1, \"model\": {\"layers\": 3, \"heads\": 2, \"d_model\": 8, "
           "\"d_ff\": 8, \"vocab\": 8, \"max_len\": 8" +
           model + "}}";
  };
  EXPECT_NO_THROW(parse_config_text(wrap("")));
  EXPECT_THROW(parse_config_text(wrap(", \"schedule\": {\"variant\": \"full\", \"P\": 1, \"K\": 3}")),
               ConfigError);
  EXPECT_THROW(parse_config_text(wrap(", \"schedule\": {\"variant\": \"alternate\", \"P\": 1, \"K\": 1}")),
               ConfigError);
  EXPECT_THROW(parse_config_text(wrap(", \"schedule\": {\"variant\": \"partial\"}")), ConfigError);
  EXPECT_THROW(parse_config_text(wrap(", \"activation\": \"tanh\"")), ConfigError);
  EXPECT_THROW(parse_config_text(wrap(", \"norm\": \"post\"")), ConfigError);
  EXPECT_THROW(parse_config_text(wrap(", \"layers\": \"three\"")), ConfigError);
  EXPECT_THROW(parse_config_text("{\"schema_version\": 2, \"model\": {}}"), ConfigError);
  EXPECT_THROW(parse_config_text("{\"model\": {}}"), ConfigError);
  EXPECT_THROW(parse_config_text("[1, 2]"), ConfigError);
}

TEST(ConfigTest, MissingFileIsAnError) {
  EXPECT_THROW(load_config_file(temp_path("missing.json")), ConfigError);
}

}  // namespace
}  // namespace reuse

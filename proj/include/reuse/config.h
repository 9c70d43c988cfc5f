#ifndef REUSE_CONFIG_H_
#define REUSE_CONFIG_H_

#include <filesystem>
#include <stdexcept>
#include <string>

#include "json.hpp"
#include "reuse/harness.h"
#include "reuse/model.h"
#include "reuse/tasks.h"

namespace reuse {

using Json = nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

// Configuration problem; line is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line = 0, std::string key = {})
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line),
        key_(std::move(key)) {}
  int line() const { return line_; }
  // Offending JSON key, used to locate the line in the source text.
  const std::string& key() const { return key_; }

 private:
  int line_;
  std::string key_;
};

Json schedule_to_json(const ReuseSchedule& schedule);
ReuseSchedule schedule_from_json(const Json& j);

Json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const Json& j);

Json task_spec_to_json(const TaskSpec& spec);
TaskSpec task_spec_from_json(const Json& j);

Json train_settings_to_json(const TrainSettings& settings);
TrainSettings train_settings_from_json(const Json& j);

// Top-level config file:
//   {"schema_version": 1, "model": {...}, "task": {...}, "train": {...}}
// "task" and "train" are optional. Unknown keys anywhere are errors.
struct ConfigFile {
  ModelConfig model;
  TaskSpec task;
  TrainSettings train;
};

ConfigFile parse_config_text(const std::string& text);
ConfigFile load_config_file(const std::filesystem::path& path);
Json config_file_to_json(const ConfigFile& config);

}  // namespace reuse

#endif  // REUSE_CONFIG_H_

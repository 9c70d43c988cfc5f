#ifndef REUSE_CHECKPOINT_H_
#define REUSE_CHECKPOINT_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "reuse/model.h"
#include "reuse/train.h"

namespace reuse {

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  AdamState optimizer;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
};

// Layout: "RATT" | u16 version | u32 header length | JSON header | float64 payload.
// The header carries the config and a tensor manifest (name, rows, cols, byte
// offset into the payload); payload values are little-endian IEEE-754 doubles.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Little-endian float64 helpers shared by the binary formats.
void append_f64_le(std::string& out, double value);
double read_f64_le(std::string_view bytes, std::size_t offset);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace reuse

#endif  // REUSE_CHECKPOINT_H_

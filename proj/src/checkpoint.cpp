#include "reuse/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "reuse/config.h"

namespace reuse {

namespace {

constexpr char kMagic[4] = {'R', 'A', 'T', 'T'};

template <typename T>
void append_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
  }
}

template <typename T>
T read_le(std::string_view bytes, std::size_t offset) {
  if (offset + sizeof(T) > bytes.size()) throw std::runtime_error("checkpoint truncated");
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i);
  }
  return value;
}

// Every tensor in the checkpoint, in write order, under a section prefix.
template <typename F>
void visit_all(const Checkpoint& c, F&& f) {
  c.params.for_each([&](const std::string& n, const Tensor2D& t) { f("param." + n, t); });
  c.optimizer.m.for_each([&](const std::string& n, const Tensor2D& t) { f("adam.m." + n, t); });
  c.optimizer.v.for_each([&](const std::string& n, const Tensor2D& t) { f("adam.v." + n, t); });
}

template <typename F>
void visit_all(Checkpoint& c, F&& f) {
  c.params.for_each([&](const std::string& n, Tensor2D& t) { f("param." + n, t); });
  c.optimizer.m.for_each([&](const std::string& n, Tensor2D& t) { f("adam.m." + n, t); });
  c.optimizer.v.for_each([&](const std::string& n, Tensor2D& t) { f("adam.v." + n, t); });
}

}  // namespace

void append_f64_le(std::string& out, double value) {
  append_le(out, std::bit_cast<std::uint64_t>(value));
}

double read_f64_le(std::string_view bytes, std::size_t offset) {
  return std::bit_cast<double>(read_le<std::uint64_t>(bytes, offset));
}

std::string encode_checkpoint(const Checkpoint& c) {
  std::string payload;
  Json manifest = Json::array();
  visit_all(c, [&](const std::string& name, const Tensor2D& t) {
    manifest.push_back(
        Json{{"name", name}, {"rows", t.rows()}, {"cols", t.cols()}, {"offset", payload.size()}});
    for (double v : t.values()) append_f64_le(payload, v);
  });
  const Json header{{"config", model_config_to_json(c.config)},
                    {"step", c.step},
                    {"adam_step", c.optimizer.step},
                    {"seed", c.seed},
                    {"tensors", manifest}};
  const std::string text = header.dump();

  std::string out(kMagic, sizeof(kMagic));
  append_le<std::uint16_t>(out, kCheckpointVersion);
  append_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out += payload;
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw std::runtime_error("not a checkpoint (bad magic)");
  }
  const auto version = read_le<std::uint16_t>(bytes, 4);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = read_le<std::uint32_t>(bytes, 6);
  if (10 + static_cast<std::size_t>(header_len) > bytes.size()) {
    throw std::runtime_error("checkpoint truncated");
  }
  Json header;
  try {
    header = Json::parse(bytes.substr(10, header_len));
  } catch (const Json::parse_error& e) {
    throw std::runtime_error(std::string("checkpoint header: ") + e.what());
  }
  const std::string_view payload = bytes.substr(10 + header_len);

  Checkpoint c;
  c.config = model_config_from_json(header.at("config"));
  c.step = header.at("step").get<std::int64_t>();
  c.seed = header.at("seed").get<std::uint64_t>();
  Rng unused(0);
  c.params = ModelParams::zeros_like(ModelParams::init(c.config, unused));
  c.optimizer = AdamState::zeros_like(c.params);
  c.optimizer.step = header.at("adam_step").get<std::int64_t>();

  std::map<std::string, Json> entries;
  for (const Json& e : header.at("tensors")) entries[e.at("name").get<std::string>()] = e;
  std::size_t seen = 0;
  visit_all(c, [&](const std::string& name, Tensor2D& t) {
    const auto it = entries.find(name);
    if (it == entries.end()) throw std::runtime_error("checkpoint lacks tensor " + name);
    const Json& e = it->second;
    if (e.at("rows").get<std::size_t>() != t.rows() || e.at("cols").get<std::size_t>() != t.cols()) {
      throw std::runtime_error("checkpoint tensor " + name + " has shape [" +
                               std::to_string(e.at("rows").get<std::size_t>()) + "x" +
                               std::to_string(e.at("cols").get<std::size_t>()) + "], config needs " +
                               t.shape_string());
    }
    const std::size_t offset = e.at("offset").get<std::size_t>();
    if (offset + 8 * t.size() > payload.size()) throw std::runtime_error("checkpoint truncated");
    double* out = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = read_f64_le(payload, offset + 8 * i);
    ++seen;
  });
  if (seen != entries.size()) throw std::runtime_error("checkpoint has unexpected tensors");
  return c;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path.string());
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  write_file(path, encode_checkpoint(c));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace reuse

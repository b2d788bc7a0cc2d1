#pragma once

// Single-file checkpoint archive:
//
//   "RSGANCKP"                 8-byte magic
//   u32 LE header length
//   header JSON                schema version, ModelConfig, attribute names,
//                              step, optimizer step counters, tensor index
//   raw little-endian float32  parameters, then Adam first/second moments
//   u32 LE CRC-32              over everything before it
//
// Tensor order and byte layout depend only on the state, so identical states
// produce identical files.

#include <zlib.h>

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rsgan/networks.hpp"
#include "rsgan/optimizer.hpp"

namespace rsgan {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointVersionError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class CheckpointCorruptError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

inline constexpr int kCheckpointSchemaVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'R', 'S', 'G', 'A', 'N', 'C', 'K', 'P'};

/// Everything needed to resume training or serve a model.
struct TrainingState {
  Model<float> model;
  std::array<AdamGroupState, kAllGroups.size()> optimizer;
  std::int64_t step = 0;
  std::vector<std::string> attribute_names;

  TrainingState() = default;
  explicit TrainingState(const ModelConfig& cfg, std::vector<std::string> names = {})
      : model(cfg), attribute_names(std::move(names)) {
    for (std::size_t g = 0; g < kAllGroups.size(); ++g)
      optimizer[g] = make_adam_state(model.group(kAllGroups[g]));
    if (attribute_names.empty())
      for (int i = 0; i < cfg.n_attr; ++i) attribute_names.push_back("attr_" + std::to_string(i));
    if (static_cast<int>(attribute_names.size()) != cfg.n_attr)
      throw ConfigError("attribute vocabulary has " + std::to_string(attribute_names.size()) +
                        " names but the model expects " + std::to_string(cfg.n_attr));
  }
};

namespace ckpt_detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

inline std::uint32_t crc(const std::uint8_t* data, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

struct Entry {
  std::string name;
  Shape shape;
  std::span<const float> data;
};

}  // namespace ckpt_detail

/// Serializes the state to bytes.
inline std::vector<std::uint8_t> encode_checkpoint(const TrainingState& st) {
  using namespace ckpt_detail;
  std::vector<Entry> entries;
  std::map<std::string, int> names;
  nlohmann::json group_steps = nlohmann::json::object();
  for (std::size_t g = 0; g < kAllGroups.size(); ++g) {
    const auto params = st.model.group(kAllGroups[g]);
    group_steps[group_name(kAllGroups[g])] = st.optimizer[g].step;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& name = params[i].node().name;
      if (names[name]++) throw CheckpointError("duplicate parameter name " + name);
      entries.push_back({"param/" + name, params[i].shape(), params[i].value().data});
    }
  }
  for (std::size_t g = 0; g < kAllGroups.size(); ++g) {
    const auto params = st.model.group(kAllGroups[g]);
    for (std::size_t i = 0; i < params.size(); ++i) {
      entries.push_back({"adam_m/" + params[i].node().name, params[i].shape(), st.optimizer[g].m[i]});
      entries.push_back({"adam_v/" + params[i].node().name, params[i].shape(), st.optimizer[g].v[i]});
    }
  }

  nlohmann::json index = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& e : entries) {
    index.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", offset}, {"count", e.data.size()}});
    offset += e.data.size();
  }
  nlohmann::json header{{"schema_version", kCheckpointSchemaVersion},
                        {"model_config", st.model.config()},
                        {"attribute_names", st.attribute_names},
                        {"step", st.step},
                        {"optimizer_steps", group_steps},
                        {"tensors", index}};
  const std::string h = header.dump();

  std::vector<std::uint8_t> out(kCheckpointMagic, kCheckpointMagic + 8);
  put_u32(out, static_cast<std::uint32_t>(h.size()));
  out.insert(out.end(), h.begin(), h.end());
  out.reserve(out.size() + offset * 4 + 4);
  for (const auto& e : entries) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(e.data.data());
    out.insert(out.end(), bytes, bytes + e.data.size() * 4);
  }
  put_u32(out, crc(out.data(), out.size()));
  return out;
}

inline TrainingState decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  using namespace ckpt_detail;
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw CheckpointCorruptError("not a checkpoint archive (bad magic)");
  const std::uint32_t stored = get_u32(bytes.data() + bytes.size() - 4);
  if (crc(bytes.data(), bytes.size() - 4) != stored) throw CheckpointCorruptError("checkpoint checksum mismatch");
  const std::uint32_t hlen = get_u32(bytes.data() + 8);
  if (12 + std::size_t(hlen) + 4 > bytes.size()) throw CheckpointCorruptError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointCorruptError(std::string("unreadable checkpoint header: ") + e.what());
  }
  const int version = header.value("schema_version", -1);
  if (version != kCheckpointSchemaVersion)
    throw CheckpointVersionError("checkpoint schema version " + std::to_string(version) +
                                 " is not supported (expected " + std::to_string(kCheckpointSchemaVersion) + ")");

  TrainingState st(header.at("model_config").get<ModelConfig>(),
                   header.at("attribute_names").get<std::vector<std::string>>());
  st.step = header.at("step").get<std::int64_t>();
  const auto& steps = header.at("optimizer_steps");
  for (std::size_t g = 0; g < kAllGroups.size(); ++g) st.optimizer[g].step = steps.at(group_name(kAllGroups[g]));

  std::map<std::string, std::span<float>> targets;
  std::map<std::string, Shape> shapes;
  for (std::size_t g = 0; g < kAllGroups.size(); ++g) {
    auto params = st.model.group(kAllGroups[g]);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& name = params[i].node().name;
      targets["param/" + name] = params[i].mutable_value().data;
      targets["adam_m/" + name] = st.optimizer[g].m[i];
      targets["adam_v/" + name] = st.optimizer[g].v[i];
      for (const char* k : {"param/", "adam_m/", "adam_v/"}) shapes[k + name] = params[i].shape();
    }
  }
  const std::size_t blob = 12 + hlen;
  const std::size_t blob_floats = (bytes.size() - 4 - blob) / 4;
  std::size_t seen = 0;
  for (const auto& e : header.at("tensors")) {
    const auto name = e.at("name").get<std::string>();
    auto it = targets.find(name);
    if (it == targets.end()) throw CheckpointCorruptError("unknown tensor " + name);
    if (e.at("shape").get<Shape>() != shapes[name]) throw CheckpointCorruptError("shape mismatch for " + name);
    const auto offset = e.at("offset").get<std::size_t>();
    const auto count = e.at("count").get<std::size_t>();
    if (count != it->second.size() || offset + count > blob_floats)
      throw CheckpointCorruptError("tensor " + name + " out of range");
    std::memcpy(it->second.data(), bytes.data() + blob + offset * 4, count * 4);
    ++seen;
  }
  if (seen != targets.size()) throw CheckpointCorruptError("checkpoint is missing tensors");
  return st;
}

inline void save_checkpoint(const TrainingState& st, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(st);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + tmp);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

inline TrainingState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
  return decode_checkpoint(bytes);
}

}  // namespace rsgan

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ngnn/model.hpp"

namespace ngnn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"arch", to_string(c.arch)},
                     {"in_dim", c.in_dim},
                     {"hidden_dim", c.hidden_dim},
                     {"out_dim", c.out_dim},
                     {"num_layers", c.num_layers},
                     {"heads", c.heads},
                     {"ngnn_position", to_string(c.ngnn_position)},
                     {"ngnn_spec", c.ngnn_spec},
                     {"dropout", c.dropout}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.arch = arch_from_string(j.at("arch").get<std::string>());
  // Zero dims mean "derive from the dataset"; experiment code fills them in.
  c.in_dim = j.value("in_dim", std::size_t(0));
  c.hidden_dim = j.value("hidden_dim", std::size_t(0));
  c.out_dim = j.value("out_dim", std::size_t(0));
  c.num_layers = j.value("num_layers", std::size_t(2));
  c.heads = j.value("heads", std::size_t(1));
  c.ngnn_position = position_from_string(j.value("ngnn_position", std::string("none")));
  c.ngnn_spec = j.value("ngnn_spec", std::string());
  c.dropout = j.value("dropout", 0.0);
}

inline constexpr char kCheckpointMagic[8] = {'N', 'G', 'N', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: magic, u32 version, u64 config length + canonical config JSON,
/// u64 tensor count, then per tensor u64 rows, u64 cols, float32 LE data in
/// registry order. Round-trips parameters bitwise.
inline void save_checkpoint(Model<float>& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  out.write(reinterpret_cast<const char*>(&kCheckpointVersion), sizeof(kCheckpointVersion));
  const std::string cfg = nlohmann::json(model.config()).dump();
  const std::uint64_t cfg_len = cfg.size();
  out.write(reinterpret_cast<const char*>(&cfg_len), sizeof(cfg_len));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  auto refs = model.params();
  const std::uint64_t count = refs.size();
  out.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& ref : refs) {
    const std::uint64_t r = ref.tensor->rows(), c = ref.tensor->cols();
    out.write(reinterpret_cast<const char*>(&r), sizeof(r));
    out.write(reinterpret_cast<const char*>(&c), sizeof(c));
    out.write(reinterpret_cast<const char*>(ref.tensor->data()),
              static_cast<std::streamsize>(ref.tensor->size() * sizeof(float)));
  }
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path.string());
}

/// Rebuilds the model from a checkpoint. Throws on bad magic, version, shape
/// drift or truncation; never returns a partially loaded model.
inline Model<float> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path.string());
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!in || version != kCheckpointVersion)
    throw std::runtime_error("load_checkpoint: unsupported version in " + path.string());
  std::uint64_t cfg_len = 0;
  in.read(reinterpret_cast<char*>(&cfg_len), sizeof(cfg_len));
  if (!in) throw std::runtime_error("load_checkpoint: truncated header in " + path.string());
  std::string cfg_str(cfg_len, '\0');
  in.read(cfg_str.data(), static_cast<std::streamsize>(cfg_len));
  if (!in) throw std::runtime_error("load_checkpoint: truncated config in " + path.string());
  ModelConfig cfg;
  try {
    cfg = nlohmann::json::parse(cfg_str).get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_checkpoint: corrupt config: " + std::string(e.what()));
  }

  Model<float> model = build_model<float>(cfg, RngStream(0));
  auto refs = model.params();
  std::uint64_t count = 0;
  in.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!in || count != refs.size())
    throw std::runtime_error("load_checkpoint: tensor count mismatch in " + path.string());
  for (auto& ref : refs) {
    std::uint64_t r = 0, c = 0;
    in.read(reinterpret_cast<char*>(&r), sizeof(r));
    in.read(reinterpret_cast<char*>(&c), sizeof(c));
    if (!in || r != ref.tensor->rows() || c != ref.tensor->cols())
      throw std::runtime_error("load_checkpoint: tensor shape mismatch for " + ref.name);
    in.read(reinterpret_cast<char*>(ref.tensor->data()),
            static_cast<std::streamsize>(ref.tensor->size() * sizeof(float)));
    if (!in) throw std::runtime_error("load_checkpoint: truncated data for " + ref.name);
  }
  return model;
}

}  // namespace ngnn

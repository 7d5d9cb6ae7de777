#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmn/model.hpp"

namespace dmn {

// Checkpoint container (version 1):
//
//   offset 0   8 bytes   magic "DMNCKPT1"
//   offset 8   4 bytes   header length N, unsigned little-endian
//   offset 12  N bytes   UTF-8 JSON header: format version, value dtype,
//                        model config, vocab token list, answer class ids,
//                        and the ordered parameter name/shape table
//   offset 12+N          raw parameter values in table order, little-endian
//
// Loading restores evaluation bit-exactly because values are stored raw.
static_assert(std::endian::native == std::endian::little,
              "checkpoint io assumes a little-endian host");

inline constexpr char kCheckpointMagic[9] = "DMNCKPT1";

template <class Real>
constexpr const char* dtype_name();
template <>
constexpr const char* dtype_name<float>() { return "f32"; }
template <>
constexpr const char* dtype_name<double>() { return "f64"; }

inline nlohmann::json config_to_json(const DmnConfig& cfg) {
  return {
      {"n_input", cfg.n_input},
      {"n_hidden", cfg.n_hidden},
      {"gate_hidden", cfg.gate_hidden},
      {"max_passes", cfg.max_passes},
      {"attention", to_string(cfg.attention)},
      {"answer_mode", to_string(cfg.answer_mode)},
      {"use_sentinel", cfg.use_sentinel},
      {"share_encoder", cfg.share_encoder},
      {"max_answer_len", cfg.max_answer_len},
  };
}

inline DmnConfig config_from_json(const nlohmann::json& j) {
  DmnConfig cfg;
  cfg.n_input = j.at("n_input").get<std::size_t>();
  cfg.n_hidden = j.at("n_hidden").get<std::size_t>();
  cfg.gate_hidden = j.at("gate_hidden").get<std::size_t>();
  cfg.max_passes = j.at("max_passes").get<std::size_t>();
  cfg.attention = attention_mode_from(j.at("attention").get<std::string>());
  cfg.answer_mode = answer_mode_from(j.at("answer_mode").get<std::string>());
  cfg.use_sentinel = j.at("use_sentinel").get<bool>();
  cfg.share_encoder = j.at("share_encoder").get<bool>();
  cfg.max_answer_len = j.at("max_answer_len").get<std::size_t>();
  return cfg;
}

template <class Real>
void save_checkpoint(const std::string& path, DmnModel<Real>& model) {
  auto params = model.parameters();
  nlohmann::json header = {
      {"format_version", 1},
      {"dtype", dtype_name<Real>()},
      {"config", config_to_json(model.cfg)},
      {"vocab", model.vocab.tokens()},
      {"answer_classes", model.answer_classes},
  };
  nlohmann::json table = nlohmann::json::array();
  for (auto* p : params) {
    table.push_back({{"name", p->name}, {"shape", p->value.shape}});
  }
  header["params"] = std::move(table);
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(kCheckpointMagic, 8);
  const std::uint32_t n = static_cast<std::uint32_t>(header_text.size());
  out.write(reinterpret_cast<const char*>(&n), 4);
  out.write(header_text.data(), std::streamsize(header_text.size()));
  for (auto* p : params) {
    out.write(reinterpret_cast<const char*>(p->value.data.data()),
              std::streamsize(p->value.numel() * sizeof(Real)));
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

template <class Real>
DmnModel<Real> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) {
    throw IoError("'" + path + "' is not a checkpoint file");
  }
  std::uint32_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), 4);
  if (!in) throw IoError("truncated checkpoint header in '" + path + "'");
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), header_len);
  if (!in) throw IoError("truncated checkpoint header in '" + path + "'");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad checkpoint header in '" + path + "': " + e.what());
  }
  if (header.at("format_version").get<int>() != 1) {
    throw IoError("unsupported checkpoint version in '" + path + "'");
  }
  const std::string dtype = header.at("dtype").get<std::string>();
  if (dtype != dtype_name<Real>()) {
    throw ConfigError("checkpoint '" + path + "' stores " + dtype +
                      " values but this build expects " + dtype_name<Real>());
  }

  DmnConfig cfg = config_from_json(header.at("config"));
  Vocab vocab =
      Vocab::from_tokens(header.at("vocab").get<std::vector<std::string>>());
  auto classes = header.at("answer_classes").get<std::vector<std::size_t>>();
  auto model = DmnModel<Real>::init(cfg, std::move(vocab), std::move(classes),
                                    /*seed=*/0);

  auto params = model.parameters();
  const auto& table = header.at("params");
  if (table.size() != params.size()) {
    throw IoError("checkpoint lists " + std::to_string(table.size()) +
                  " parameters, model has " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& entry = table[i];
    if (entry.at("name").get<std::string>() != params[i]->name) {
      throw IoError("checkpoint parameter order mismatch at '" +
                    entry.at("name").get<std::string>() + "'");
    }
    const auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    if (shape != params[i]->value.shape) {
      throw IoError("checkpoint shape mismatch for '" + params[i]->name + "'");
    }
    in.read(reinterpret_cast<char*>(params[i]->value.data.data()),
            std::streamsize(params[i]->value.numel() * sizeof(Real)));
    if (!in) throw IoError("truncated parameter data in '" + path + "'");
  }
  return model;
}

}  // namespace dmn

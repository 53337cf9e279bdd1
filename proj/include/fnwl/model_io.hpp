// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include <nlohmann/json.hpp>

#include "fnwl/binary_io.hpp"
#include "fnwl/model.hpp"
#include "fnwl/version.hpp"

namespace fnwl {

// Weight file, little-endian:
//   "FNWT" u8 version=1, u32 tensor count,
//   per tensor: u16 name length, UTF-8 name, u8 rank, u32 dims[rank],
//               f32 data (row-major),
//   u32 CRC32 of all preceding bytes.
// The model configuration lives in a JSON sidecar next to it (<path>.json).

inline constexpr std::string_view kWeightsMagic = "FNWT";
inline constexpr std::uint8_t kWeightsVersion = 1;

inline nlohmann::ordered_json to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["input_channels"] = c.input_channels;
  j["input_length"] = c.input_length;
  j["conv1_out"] = c.conv1_out;
  j["conv2_out"] = c.conv2_out;
  j["kernel"] = c.kernel;
  j["pool"] = c.pool;
  j["lstm_hidden"] = c.lstm_hidden;
  j["lstm_layers"] = c.lstm_layers;
  j["fc_hidden"] = c.fc_hidden;
  j["classes"] = c.classes;
  j["peephole"] = c.peephole;
  j["lstm_input_mode"] = to_string(c.lstm_input_mode);
  j["variant"] = to_string(c.variant);
  return j;
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.input_channels = j.at("input_channels").get<std::size_t>();
    c.input_length = j.at("input_length").get<std::size_t>();
    c.conv1_out = j.at("conv1_out").get<std::size_t>();
    c.conv2_out = j.at("conv2_out").get<std::size_t>();
    c.kernel = j.at("kernel").get<std::size_t>();
    c.pool = j.at("pool").get<std::size_t>();
    c.lstm_hidden = j.at("lstm_hidden").get<std::size_t>();
    c.lstm_layers = j.at("lstm_layers").get<std::size_t>();
    c.fc_hidden = j.at("fc_hidden").get<std::size_t>();
    c.classes = j.at("classes").get<std::size_t>();
    c.peephole = j.at("peephole").get<bool>();
    const auto mode = j.at("lstm_input_mode").get<std::string>();
    if (mode == "flat_single_step")
      c.lstm_input_mode = LstmInputMode::flat_single_step;
    else if (mode == "sequence_T_by_32")
      c.lstm_input_mode = LstmInputMode::sequence;
    else
      throw ConfigError("unknown lstm_input_mode '" + mode + "'");
    const auto variant = j.at("variant").get<std::string>();
    if (variant == "cnn_lstm")
      c.variant = ModelVariant::cnn_lstm;
    else if (variant == "cnn_only")
      c.variant = ModelVariant::cnn_only;
    else
      throw ConfigError("unknown variant '" + variant + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config JSON: ") + e.what());
  }
  c.validate();
  return c;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

inline void write_json_file(const nlohmann::ordered_json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what(), e.byte);
  }
}

/// Writes a sidecar holding {"tool", "version", "model_config", ...extra}.
inline void write_model_config(const ModelConfig& cfg, const std::filesystem::path& sidecar,
                               const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  nlohmann::ordered_json j;
  j["tool"] = kToolName;
  j["version"] = kVersion;
  j["model_config"] = to_json(cfg);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  write_json_file(j, sidecar);
}

inline std::vector<std::uint8_t> encode_weights(const ModelWeights& w) {
  binary::Writer out;
  out.bytes(kWeightsMagic);
  out.u8(kWeightsVersion);
  std::uint32_t count = 0;
  w.for_each([&](const std::string&, const Tensor&) { ++count; });
  out.u32(count);
  w.for_each([&](const std::string& name, const Tensor& t) {
    out.u16(static_cast<std::uint16_t>(name.size()));
    out.bytes(name);
    out.u8(static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) out.u32(static_cast<std::uint32_t>(d));
    for (double v : t.data()) out.f32(static_cast<float>(v));
  });
  out.finish_with_crc();
  return out.data();
}

/// Writes the weight file and its JSON sidecar. `extra` keys are merged into
/// the sidecar (training configuration, normalisation statistics, ...).
inline void save_weights(const ModelWeights& w, const ModelConfig& cfg, const std::filesystem::path& path,
                         const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  const auto data = encode_weights(w);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("failed writing " + path.string());
  write_model_config(cfg, sidecar_path(path), extra);
}

/// Decodes a weight file against the shapes `cfg` implies. Names, order and
/// shapes must match exactly.
inline ModelWeights decode_weights(std::span<const std::uint8_t> bytes, const ModelConfig& cfg) {
  binary::Reader in(bytes);
  if (in.bytes(4, "magic") != kWeightsMagic) throw FormatError("bad magic, expected FNWT", 0);
  if (const auto v = in.u8("version"); v != kWeightsVersion)
    throw FormatError("unsupported weight file version " + std::to_string(v), 4);

  ModelWeights w = zero_weights(cfg);
  std::vector<std::pair<std::string, Tensor*>> expected;
  w.for_each([&](const std::string& name, Tensor& t) { expected.emplace_back(name, &t); });

  const std::size_t count_at = in.offset();
  const std::uint32_t count = in.u32("tensor count");
  if (count != expected.size())
    throw FormatError("file has " + std::to_string(count) + " tensors, config implies " +
                      std::to_string(expected.size()),
                      count_at);
  for (const auto& [name, tensor] : expected) {
    const std::size_t at = in.offset();
    const std::uint16_t len = in.u16("name length");
    const std::string got = in.bytes(len, "tensor name");
    if (got != name) throw FormatError("expected tensor '" + name + "', found '" + got + "'", at);
    const std::size_t rank_at = in.offset();
    const std::uint8_t rank = in.u8("rank");
    Shape shape(rank);
    for (auto& d : shape) d = in.u32("dimension");
    if (shape != tensor->shape())
      throw FormatError("tensor '" + name + "' has shape " + to_string(shape) + ", config implies " +
                        to_string(tensor->shape()),
                        rank_at);
    in.need(tensor->size() * 4, "tensor data");
    for (double& v : tensor->data()) v = static_cast<double>(in.f32("tensor data"));
  }
  in.expect_crc_trailer();
  return w;
}

struct LoadedModel {
  ModelConfig config;
  ModelWeights weights;
  nlohmann::json metadata;
};

inline LoadedModel load_weights(const std::filesystem::path& path) {
  LoadedModel m;
  m.metadata = read_json_file(sidecar_path(path));
  if (!m.metadata.contains("model_config"))
    throw FormatError(sidecar_path(path).string() + " has no model_config", 0);
  try {
    m.config = model_config_from_json(m.metadata.at("model_config"));
  } catch (const ConfigError& e) {
    throw FormatError(e.what(), 0);
  }
  const auto bytes = binary::read_file(path);
  m.weights = decode_weights(bytes, m.config);
  return m;
}

}  // namespace fnwl

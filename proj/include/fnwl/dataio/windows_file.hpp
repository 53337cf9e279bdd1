// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <fstream>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fnwl/binary_io.hpp"
#include "fnwl/preprocessing/windows.hpp"
#include "fnwl/version.hpp"

namespace fnwl {

// Windows file, little-endian:
//   "FNWIN" u8 version=1, u32 N, u32 C, u32 L, f64 sample rate,
//   N records of { u8 label, C*L f32 channel-major },
//   u32 CRC32 of all preceding bytes.
// Stride and per-window subject ids go in the JSON sidecar <path>.json.

inline constexpr std::string_view kWindowsMagic = "FNWIN";
inline constexpr std::uint8_t kWindowsVersion = 1;
inline constexpr std::size_t kWindowsHeaderBytes = 5 + 1 + 4 + 4 + 4 + 8;

inline std::vector<std::uint8_t> encode_windows(const WindowDataset& d) {
  d.validate(256);
  binary::Writer out;
  out.bytes(kWindowsMagic);
  out.u8(kWindowsVersion);
  out.u32(static_cast<std::uint32_t>(d.size()));
  out.u32(static_cast<std::uint32_t>(d.channels));
  out.u32(static_cast<std::uint32_t>(d.length));
  out.f64(d.sample_rate_hz);
  for (std::size_t i = 0; i < d.size(); ++i) {
    out.u8(static_cast<std::uint8_t>(d.labels[i]));
    for (double v : d.window(i)) out.f32(static_cast<float>(v));
  }
  out.finish_with_crc();
  return out.data();
}

/// Inverse of encode_windows. Labels must be below `classes`; stride and
/// subject ids are left at their defaults.
inline WindowDataset decode_windows(std::span<const std::uint8_t> bytes, int classes = 4) {
  binary::Reader in(bytes);
  if (bytes.size() < kWindowsMagic.size() || in.bytes(kWindowsMagic.size(), "magic") != kWindowsMagic)
    throw FormatError("bad magic, expected FNWIN", 0);
  if (const auto v = in.u8("version"); v != kWindowsVersion)
    throw FormatError("unsupported windows file version " + std::to_string(v), 5);
  const std::uint64_t n = in.u32("window count");
  const std::uint64_t channels = in.u32("channel count");
  const std::uint64_t length = in.u32("window length");
  const std::size_t rate_at = in.offset();
  const double rate = in.f64("sample rate");
  if (channels == 0 || length == 0) throw FormatError("channel count and window length must be positive", 10);
  if (!(rate > 0.0) || !std::isfinite(rate)) throw FormatError("sample rate must be positive and finite", rate_at);
  if (channels * length > bytes.size()) throw FormatError("window size exceeds file size", 10);
  const std::uint64_t record = 1 + 4 * channels * length;
  const std::uint64_t expected = kWindowsHeaderBytes + n * record + 4;
  if (bytes.size() != expected)
    throw FormatError("file is " + std::to_string(bytes.size()) + " bytes, header implies " + std::to_string(expected),
                      bytes.size() < expected ? bytes.size() : expected);
  binary::verify_crc_trailer(bytes);

  WindowDataset d;
  d.channels = channels;
  d.length = length;
  d.sample_rate_hz = rate;
  d.values.reserve(n * channels * length);
  d.labels.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::size_t at = in.offset();
    const int label = in.u8("label");
    if (label >= classes) throw FormatError("label " + std::to_string(label) + " out of range", at);
    d.labels.push_back(label);
    for (std::uint64_t k = 0; k < channels * length; ++k) {
      const std::size_t vat = in.offset();
      const float v = in.f32("window data");
      if (!std::isfinite(v)) throw FormatError("non-finite sample", vat);
      d.values.push_back(static_cast<double>(v));
    }
  }
  d.subjects.assign(n, std::string{});
  in.expect_crc_trailer();
  return d;
}

/// Writes the binary file and its sidecar (stride, subject ids, `extra`).
inline void write_windows(const WindowDataset& d, const std::filesystem::path& path,
                          const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  const auto bytes = encode_windows(d);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());

  nlohmann::ordered_json side;
  side["tool"] = kToolName;
  side["version"] = kVersion;
  side["windows"] = d.size();
  side["stride"] = d.stride;
  side["subjects"] = d.subjects;
  for (auto it = extra.begin(); it != extra.end(); ++it) side[it.key()] = it.value();
  std::ofstream js(path.string() + ".json", std::ios::trunc);
  if (!js) throw IoError("cannot open " + path.string() + ".json for writing");
  js << side.dump(2) << '\n';
}

/// Reads a windows file; the sidecar is optional and only restores stride and
/// subject ids.
inline WindowDataset read_windows(const std::filesystem::path& path, int classes = 4) {
  WindowDataset d = decode_windows(binary::read_file(path), classes);
  const std::filesystem::path side = path.string() + ".json";
  if (std::filesystem::exists(side)) {
    std::ifstream in(side);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
      if (j.contains("stride")) d.stride = j.at("stride").get<std::size_t>();
      if (j.contains("subjects")) {
        auto subjects = j.at("subjects").get<std::vector<std::string>>();
        if (subjects.size() != d.size())
          throw FormatError(side.string() + " lists " + std::to_string(subjects.size()) + " subjects for " +
                                std::to_string(d.size()) + " windows",
                            0);
        d.subjects = std::move(subjects);
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(side.string() + ": " + e.what(), 0);
    }
  }
  return d;
}

}  // namespace fnwl

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "fnwl/error.hpp"
#include "fnwl/preprocessing/windows.hpp"

namespace fnwl {

// Raw recording CSV: header `subject,t,c1,...,c8,label` (any column order),
// one row per sample. t is in seconds and strictly increasing per subject;
// label is 0..3, or -1 for unlabeled rest.

inline constexpr std::size_t kRawChannels = 8;
inline constexpr double kSamplingTolerance = 1e-6;

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline double parse_real(std::string_view s, std::string_view column, std::size_t line) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty())
    throw ParseError("column " + std::string(column) + ": '" + std::string(s) + "' is not a number", line);
  if (!std::isfinite(v)) throw ParseError("column " + std::string(column) + " is not finite", line);
  return v;
}

inline int parse_label(std::string_view s, std::size_t line) {
  int v = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || s.empty())
    throw ParseError("column label: '" + std::string(s) + "' is not an integer", line);
  if (v < kUnlabeled || v > 3) throw ParseError("label " + std::to_string(v) + " outside {-1, 0, 1, 2, 3}", line);
  return v;
}

}  // namespace detail

/// Parses CSV text into one recording per subject, in order of first
/// appearance. `source` prefixes error messages.
inline std::vector<RawRecording> parse_raw_csv(std::istream& in, const std::string& source = "<csv>") {
  std::array<std::string, kRawChannels + 3> names;
  names[0] = "subject";
  names[1] = "t";
  for (std::size_t c = 0; c < kRawChannels; ++c) names[2 + c] = "c" + std::to_string(c + 1);
  names[kRawChannels + 2] = "label";

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(source + ": empty file, expected header", 1);
  ++line_no;
  const auto header = detail::split_csv(line);
  std::array<std::size_t, kRawChannels + 3> column{};
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::size_t found = header.size();
    for (std::size_t h = 0; h < header.size(); ++h)
      if (header[h] == names[k]) {
        if (found != header.size()) throw ParseError(source + ": duplicate column '" + names[k] + "'", 1);
        found = h;
      }
    if (found == header.size()) throw ParseError(source + ": missing column '" + names[k] + "'", 1);
    column[k] = found;
  }
  if (header.size() != names.size()) {
    for (auto h : header)
      if (std::find(names.begin(), names.end(), h) == names.end())
        throw ParseError(source + ": unknown column '" + std::string(h) + "'", 1);
  }

  struct Pending {
    RawRecording rec;
    std::vector<double> times;
    std::vector<std::size_t> lines;
  };
  std::vector<Pending> recs;
  std::map<std::string, std::size_t, std::less<>> index;

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != header.size())
      throw ParseError(source + ": expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    const std::string_view subject = fields[column[0]];
    if (subject.empty()) throw ParseError(source + ": empty subject", line_no);
    auto it = index.find(subject);
    if (it == index.end()) {
      it = index.emplace(std::string(subject), recs.size()).first;
      recs.emplace_back();
      recs.back().rec.subject = std::string(subject);
      recs.back().rec.channels.assign(kRawChannels, {});
    }
    Pending& p = recs[it->second];
    const double t = detail::parse_real(fields[column[1]], "t", line_no);
    if (!p.times.empty() && !(t > p.times.back()))
      throw ParseError(source + ": t does not increase for subject '" + p.rec.subject + "'", line_no);
    p.times.push_back(t);
    p.lines.push_back(line_no);
    for (std::size_t c = 0; c < kRawChannels; ++c)
      p.rec.channels[c].push_back(detail::parse_real(fields[column[2 + c]], names[2 + c], line_no));
    p.rec.labels.push_back(detail::parse_label(fields[column[kRawChannels + 2]], line_no));
  }

  std::vector<RawRecording> out;
  for (Pending& p : recs) {
    const std::size_t n = p.times.size();
    if (n < 2) throw SchemaError(source + ": subject '" + p.rec.subject + "' has a single sample; rate is undefined");
    const double dt = (p.times.back() - p.times.front()) / static_cast<double>(n - 1);
    for (std::size_t i = 1; i < n; ++i) {
      const double d = p.times[i] - p.times[i - 1];
      if (std::abs(d - dt) > kSamplingTolerance) {
        std::ostringstream msg;
        msg << source << ": line " << p.lines[i] << ": subject '" << p.rec.subject << "' interval " << d
            << " s deviates from mean " << dt << " s by more than " << kSamplingTolerance << " s";
        throw SchemaError(msg.str());
      }
    }
    p.rec.sample_rate_hz = 1.0 / dt;
    out.push_back(std::move(p.rec));
  }
  return out;
}

inline std::vector<RawRecording> read_raw_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return parse_raw_csv(in, path.string());
}

inline void write_raw_csv(std::ostream& out, const std::vector<RawRecording>& recs) {
  out << "subject,t";
  for (std::size_t c = 0; c < kRawChannels; ++c) out << ",c" << c + 1;
  out << ",label\n";
  std::array<char, 64> buf{};
  auto put = [&](double v) {
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.write(buf.data(), r.ptr - buf.data());
  };
  for (const auto& r : recs) {
    if (r.channels.size() != kRawChannels)
      throw DimensionError("raw CSV needs " + std::to_string(kRawChannels) + " channels, recording '" + r.subject +
                           "' has " + std::to_string(r.channels.size()));
    r.validate();
    for (std::size_t t = 0; t < r.length(); ++t) {
      out << r.subject << ',';
      put(static_cast<double>(t) / r.sample_rate_hz);
      for (const auto& ch : r.channels) {
        out << ',';
        put(ch[t]);
      }
      out << ',' << r.labels[t] << '\n';
    }
  }
}

}  // namespace fnwl

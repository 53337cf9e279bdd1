// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "fnwl/error.hpp"
#include "fnwl/preprocessing/filtfilt.hpp"
#include "fnwl/tensor.hpp"

namespace fnwl {

inline constexpr int kUnlabeled = -1;

struct RawRecording {
  std::string subject;
  double sample_rate_hz = 0.0;
  std::vector<std::vector<double>> channels;
  std::vector<int> labels;

  std::size_t length() const { return labels.size(); }

  void validate() const {
    if (!(sample_rate_hz > 0.0)) throw ConfigError("recording '" + subject + "' has a non-positive sample rate");
    for (std::size_t c = 0; c < channels.size(); ++c)
      if (channels[c].size() != labels.size())
        throw DimensionError("recording '" + subject + "' channel " + std::to_string(c + 1) + " has " +
                             std::to_string(channels[c].size()) + " samples, labels have " +
                             std::to_string(labels.size()));
  }
};

/// Labeled windows stored channel-major: window i, channel c, sample t lives at
/// values[(i * channels + c) * length + t].
struct WindowDataset {
  std::size_t channels = 0;
  std::size_t length = 0;
  std::size_t stride = 0;
  double sample_rate_hz = 0.0;
  std::vector<double> values;
  std::vector<int> labels;
  std::vector<std::string> subjects;  // one per window; empty string when unknown

  std::size_t size() const { return labels.size(); }
  std::size_t window_size() const { return channels * length; }

  std::span<const double> window(std::size_t i) const {
    return std::span<const double>(values).subspan(i * window_size(), window_size());
  }
  std::span<double> window(std::size_t i) { return std::span<double>(values).subspan(i * window_size(), window_size()); }

  void validate(int classes = 4) const {
    if (values.size() != size() * window_size())
      throw DimensionError("dataset holds " + std::to_string(values.size()) + " values, expected " +
                           std::to_string(size()) + " x " + std::to_string(channels) + " x " + std::to_string(length));
    if (subjects.size() != size())
      throw DimensionError("dataset has " + std::to_string(subjects.size()) + " subject ids for " +
                           std::to_string(size()) + " windows");
    for (std::size_t i = 0; i < size(); ++i)
      if (labels[i] < 0 || labels[i] >= classes)
        throw LabelError("window " + std::to_string(i) + " has label " + std::to_string(labels[i]));
    for (double v : values)
      if (!std::isfinite(v)) throw NumericError("dataset contains a non-finite value");
  }

  /// Windows `idx` stacked into a [idx.size(), channels, length] tensor.
  Tensor batch(std::span<const std::size_t> idx) const {
    Tensor out({idx.size(), channels, length});
    auto dst = out.data().begin();
    for (std::size_t i : idx) {
      const auto w = window(i);
      dst = std::copy(w.begin(), w.end(), dst);
    }
    return out;
  }

  std::vector<int> batch_labels(std::span<const std::size_t> idx) const {
    std::vector<int> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(labels[i]);
    return out;
  }

  WindowDataset subset(std::span<const std::size_t> idx) const {
    WindowDataset out = empty_like();
    for (std::size_t i : idx) out.push_back(window(i), labels[i], subjects[i]);
    return out;
  }

  WindowDataset empty_like() const {
    WindowDataset out;
    out.channels = channels;
    out.length = length;
    out.stride = stride;
    out.sample_rate_hz = sample_rate_hz;
    return out;
  }

  void push_back(std::span<const double> w, int label, std::string subject = {}) {
    if (w.size() != window_size())
      throw DimensionError("window has " + std::to_string(w.size()) + " values, expected " +
                           std::to_string(window_size()));
    values.insert(values.end(), w.begin(), w.end());
    labels.push_back(label);
    subjects.push_back(std::move(subject));
  }

  void append(const WindowDataset& other) {
    if (other.channels != channels || other.length != length)
      throw DimensionError("cannot append windows of " + std::to_string(other.channels) + "x" +
                           std::to_string(other.length) + " to " + std::to_string(channels) + "x" +
                           std::to_string(length));
    values.insert(values.end(), other.values.begin(), other.values.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    subjects.insert(subjects.end(), other.subjects.begin(), other.subjects.end());
  }
};

struct SegmentOptions {
  std::size_t window_length = 150;
  std::size_t stride = 3;
  bool pure_only = true;
};

/// floor((T - L) / stride) + 1 for T >= L, else 0.
inline std::size_t window_count(std::size_t samples, std::size_t window_length, std::size_t stride) {
  if (window_length == 0 || stride == 0) throw ConfigError("window length and stride must be at least 1");
  return samples < window_length ? 0 : (samples - window_length) / stride + 1;
}

/// Majority label of a span; ties go to the label of the final sample when it
/// is tied, else to the tied label seen last.
inline int majority_label(std::span<const int> labels, int classes = 4) {
  std::vector<std::size_t> count(static_cast<std::size_t>(classes), 0);
  std::vector<std::size_t> last(static_cast<std::size_t>(classes), 0);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    const auto y = static_cast<std::size_t>(labels[t]);
    ++count[y];
    last[y] = t;
  }
  const std::size_t top = *std::max_element(count.begin(), count.end());
  int best = -1;
  for (int c = 0; c < classes; ++c) {
    const auto k = static_cast<std::size_t>(c);
    if (count[k] == top && (best < 0 || last[k] > last[static_cast<std::size_t>(best)])) best = c;
  }
  return best;
}

/// Window i covers samples [i * stride, i * stride + L). Windows touching an
/// unlabeled sample are dropped; with `pure_only`, so are windows spanning a
/// label change.
inline WindowDataset segment_windows(const RawRecording& r, const SegmentOptions& opt, int classes = 4) {
  r.validate();
  const std::size_t n = window_count(r.length(), opt.window_length, opt.stride);
  WindowDataset out;
  out.channels = r.channels.size();
  out.length = opt.window_length;
  out.stride = opt.stride;
  out.sample_rate_hz = r.sample_rate_hz;
  std::vector<double> buf(out.window_size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t start = i * opt.stride;
    const std::span<const int> span(r.labels.data() + start, opt.window_length);
    if (std::any_of(span.begin(), span.end(), [](int y) { return y == kUnlabeled; })) continue;
    for (int y : span)
      if (y < 0 || y >= classes) throw LabelError("recording '" + r.subject + "' has label " + std::to_string(y));
    if (opt.pure_only && std::any_of(span.begin(), span.end(), [&](int y) { return y != span.front(); })) continue;
    for (std::size_t c = 0; c < out.channels; ++c)
      std::copy_n(r.channels[c].begin() + static_cast<long>(start), opt.window_length,
                  buf.begin() + static_cast<long>(c * opt.window_length));
    out.push_back(buf, majority_label(span, classes), r.subject);
  }
  return out;
}

/// Zero-phase filters every channel of a recording.
inline RawRecording filter_recording(RawRecording r, const SosFilter& f) {
  for (auto& ch : r.channels) ch = filtfilt(f, ch);
  return r;
}

struct ChannelStats {
  std::vector<double> mean;
  std::vector<double> stddev;  // population; exactly 0 for constant channels
};

inline ChannelStats compute_channel_stats(const WindowDataset& d) {
  if (d.size() == 0) throw LengthError("channel statistics need at least one window");
  ChannelStats s{std::vector<double>(d.channels, 0.0), std::vector<double>(d.channels, 0.0)};
  const double count = static_cast<double>(d.size() * d.length);
  for (std::size_t c = 0; c < d.channels; ++c) {
    double sum = 0.0, lo = d.window(0)[c * d.length], hi = lo;
    for (std::size_t i = 0; i < d.size(); ++i)
      for (double v : d.window(i).subspan(c * d.length, d.length)) {
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    const double mean = sum / count;
    double sq = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
      for (double v : d.window(i).subspan(c * d.length, d.length)) sq += (v - mean) * (v - mean);
    s.mean[c] = mean;
    s.stddev[c] = lo == hi ? 0.0 : std::sqrt(sq / count);
  }
  return s;
}

struct StandardizeResult {
  WindowDataset dataset;
  std::vector<std::size_t> unscaled_channels;  // zero-variance channels passed through
};

inline StandardizeResult standardize_channels(WindowDataset d, const ChannelStats& stats) {
  if (stats.mean.size() != d.channels || stats.stddev.size() != d.channels)
    throw DimensionError("channel statistics cover " + std::to_string(stats.mean.size()) +
                         " channels, dataset has " + std::to_string(d.channels));
  StandardizeResult out;
  for (std::size_t c = 0; c < d.channels; ++c) {
    if (!(stats.stddev[c] > 0.0)) {
      out.unscaled_channels.push_back(c);
      continue;
    }
    for (std::size_t i = 0; i < d.size(); ++i)
      for (double& v : d.window(i).subspan(c * d.length, d.length)) v = (v - stats.mean[c]) / stats.stddev[c];
  }
  out.dataset = std::move(d);
  return out;
}

}  // namespace fnwl

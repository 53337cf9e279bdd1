// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "fnwl/error.hpp"
#include "fnwl/preprocessing/filtfilt.hpp"
#include "fnwl/preprocessing/windows.hpp"
#include "fnwl/random.hpp"

namespace fnwl {

struct SynthConfig {
  int classes = 4;
  std::size_t windows_per_class = 150;
  std::size_t length = 150;
  std::size_t channels = 8;
  double sample_rate_hz = 5.2;
  std::uint64_t seed = 42;
  /// Signal-to-noise ratio in dB. +inf: no noise. -inf: noise only.
  double snr_db = 10.0;
  double base_hz = 0.3;
  bool bandpass = true;
  int filter_order = 3;
  double low_hz = 0.001;
  double high_hz = 0.2;

  double class_hz(int c) const { return (c + 1) * base_hz; }
};

/// Class-c windows hold a unit sinusoid at (c + 1) * base_hz with a random
/// phase per channel, plus white Gaussian noise at the requested SNR, then the
/// bandpass applied per channel. Labels cycle 0, 1, ..., K-1.
///
/// Draw order per window, per channel: one uniform phase, then `length`
/// normals when the noise level is non-zero.
inline WindowDataset synth_generate(const SynthConfig& cfg) {
  if (cfg.classes < 1) throw ParameterError("synthetic data needs at least one class");
  if (cfg.windows_per_class == 0 || cfg.length == 0 || cfg.channels == 0)
    throw ParameterError("windows per class, length and channels must be positive");
  if (!(cfg.sample_rate_hz > 0.0)) throw ParameterError("sample rate must be positive");
  if (std::isnan(cfg.snr_db)) throw ParameterError("SNR is NaN");
  const double nyquist = cfg.sample_rate_hz / 2.0;
  for (int c = 0; c < cfg.classes; ++c)
    if (cfg.class_hz(c) >= nyquist)
      throw ParameterError("class " + std::to_string(c) + " frequency " + std::to_string(cfg.class_hz(c)) +
                           " Hz is at or above Nyquist " + std::to_string(nyquist) + " Hz");

  const double amplitude = cfg.snr_db == -std::numeric_limits<double>::infinity() ? 0.0 : 1.0;
  double sigma = 1.0;
  if (amplitude > 0.0) sigma = std::isinf(cfg.snr_db) ? 0.0 : std::sqrt(0.5 / std::pow(10.0, cfg.snr_db / 10.0));

  SosFilter filter;
  if (cfg.bandpass) filter = design_butterworth_bandpass(cfg.filter_order, cfg.low_hz, cfg.high_hz, cfg.sample_rate_hz);

  WindowDataset d;
  d.channels = cfg.channels;
  d.length = cfg.length;
  d.stride = cfg.length;
  d.sample_rate_hz = cfg.sample_rate_hz;
  Rng rng(cfg.seed);
  const std::size_t total = cfg.windows_per_class * static_cast<std::size_t>(cfg.classes);
  std::vector<double> window(d.window_size());
  std::vector<double> channel(cfg.length);
  for (std::size_t i = 0; i < total; ++i) {
    const int label = static_cast<int>(i % static_cast<std::size_t>(cfg.classes));
    const double w = 2.0 * std::numbers::pi * cfg.class_hz(label) / cfg.sample_rate_hz;
    for (std::size_t c = 0; c < cfg.channels; ++c) {
      const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      for (std::size_t t = 0; t < cfg.length; ++t) {
        channel[t] = amplitude * std::sin(w * static_cast<double>(t) + phase);
        if (sigma > 0.0) channel[t] += sigma * rng.normal();
      }
      if (cfg.bandpass) channel = filtfilt(filter, channel);
      std::copy(channel.begin(), channel.end(), window.begin() + static_cast<long>(c * cfg.length));
    }
    d.push_back(window, label, "synth");
  }
  return d;
}

}  // namespace fnwl

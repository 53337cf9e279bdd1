// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <span>
#include <string>
#include <vector>

#include "fnwl/error.hpp"
#include "fnwl/preprocessing/butterworth.hpp"

namespace fnwl {

using SectionState = std::array<double, 2>;

/// Steady-state transposed direct-form II state of each section for a unit
/// step input, so that filtering a constant from state `zi * x0` has no
/// start-up transient.
inline std::vector<SectionState> sos_initial_state(const SosFilter& f) {
  std::vector<SectionState> zi;
  zi.reserve(f.sections.size());
  double scale = 1.0;
  for (const Biquad& s : f.sections) {
    // [[1 + a1, -1], [a2, 1]] * state = [b1 - a1 b0, b2 - a2 b0]
    const double r0 = s.b1 - s.a1 * s.b0;
    const double r1 = s.b2 - s.a2 * s.b0;
    const double det = 1.0 + s.a1 + s.a2;
    if (det == 0.0) throw DesignError("section has a pole at z = 1; no steady state exists");
    zi.push_back({scale * (r0 + r1) / det, scale * ((1.0 + s.a1) * r1 - s.a2 * r0) / det});
    scale *= (s.b0 + s.b1 + s.b2) / det;
  }
  return zi;
}

/// Runs the cascade over `x` in place, starting from and updating `state`.
inline void sosfilt_inplace(const SosFilter& f, std::span<double> x, std::vector<SectionState>& state) {
  if (state.size() != f.sections.size())
    throw DimensionError("filter state has " + std::to_string(state.size()) + " sections, filter has " +
                         std::to_string(f.sections.size()));
  for (double& sample : x) {
    double v = sample;
    for (std::size_t k = 0; k < f.sections.size(); ++k) {
      const Biquad& s = f.sections[k];
      SectionState& z = state[k];
      const double y = s.b0 * v + z[0];
      z[0] = s.b1 * v - s.a1 * y + z[1];
      z[1] = s.b2 * v - s.a2 * y;
      v = y;
    }
    sample = v;
  }
}

inline std::vector<double> sosfilt(const SosFilter& f, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  std::vector<SectionState> state(f.sections.size(), SectionState{0.0, 0.0});
  sosfilt_inplace(f, y, state);
  return y;
}

/// Edge padding length used by filtfilt: three times the number of poles.
inline std::size_t filtfilt_padding(const SosFilter& f) { return 3 * f.pole_count(); }

/// Zero-phase filtering: odd-reflection padding, forward pass from steady
/// state, backward pass from steady state, padding stripped.
inline std::vector<double> filtfilt(const SosFilter& f, std::span<const double> x) {
  const std::size_t pad = filtfilt_padding(f);
  if (x.size() <= pad)
    throw LengthError("filtfilt needs more than " + std::to_string(pad) + " samples, got " +
                      std::to_string(x.size()));
  const std::size_t n = x.size();
  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const auto zi = sos_initial_state(f);
  auto scaled = [&](double x0) {
    auto s = zi;
    for (auto& z : s) z = {z[0] * x0, z[1] * x0};
    return s;
  };
  auto state = scaled(ext.front());
  sosfilt_inplace(f, ext, state);
  std::reverse(ext.begin(), ext.end());
  state = scaled(ext.front());
  sosfilt_inplace(f, ext, state);
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<long>(pad), ext.end() - static_cast<long>(pad)};
}

}  // namespace fnwl

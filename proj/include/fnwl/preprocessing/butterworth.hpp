// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "fnwl/error.hpp"

namespace fnwl {

/// One biquad: b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  std::array<double, 6> coefficients() const { return {b0, b1, b2, 1.0, a1, a2}; }
  bool operator==(const Biquad&) const = default;
};

struct SosFilter {
  std::vector<Biquad> sections;
  int order = 0;
  double low_hz = 0.0;
  double high_hz = 0.0;
  double sample_rate_hz = 0.0;

  std::size_t pole_count() const { return 2 * sections.size(); }
};

namespace detail {

using cplx = std::complex<double>;

struct Zpk {
  std::vector<cplx> zeros;
  std::vector<cplx> poles;
  double gain = 1.0;
};

inline Zpk butter_prototype(int order) {
  Zpk out;
  for (int m = -order + 1; m < order; m += 2)
    out.poles.push_back(-std::exp(cplx(0.0, std::numbers::pi * m / (2.0 * order))));
  return out;
}

inline Zpk lowpass_to_bandpass(const Zpk& lp, double center, double bandwidth) {
  const auto degree = lp.poles.size() - lp.zeros.size();
  Zpk out;
  auto map_pair = [&](const std::vector<cplx>& roots, std::vector<cplx>& dst) {
    std::vector<cplx> plus, minus;
    for (const cplx& r : roots) {
      const cplx scaled = r * bandwidth / 2.0;
      const cplx root = std::sqrt(scaled * scaled - center * center);
      plus.push_back(scaled + root);
      minus.push_back(scaled - root);
    }
    dst.insert(dst.end(), plus.begin(), plus.end());
    dst.insert(dst.end(), minus.begin(), minus.end());
  };
  map_pair(lp.zeros, out.zeros);
  map_pair(lp.poles, out.poles);
  out.zeros.insert(out.zeros.end(), degree, cplx(0.0, 0.0));
  out.gain = lp.gain * std::pow(bandwidth, static_cast<double>(degree));
  return out;
}

/// Bilinear transform with the analog frequency axis prewarped for fs = 2.
inline Zpk bilinear(const Zpk& analog) {
  constexpr double fs2 = 4.0;
  const auto degree = analog.poles.size() - analog.zeros.size();
  Zpk out;
  cplx num(1.0, 0.0), den(1.0, 0.0);
  for (const cplx& z : analog.zeros) {
    out.zeros.push_back((fs2 + z) / (fs2 - z));
    num *= fs2 - z;
  }
  for (const cplx& p : analog.poles) {
    out.poles.push_back((fs2 + p) / (fs2 - p));
    den *= fs2 - p;
  }
  out.zeros.insert(out.zeros.end(), degree, cplx(-1.0, 0.0));
  out.gain = analog.gain * (num / den).real();
  return out;
}

inline bool is_real(const cplx& c) { return c.imag() == 0.0; }

/// One representative (positive imaginary part) per conjugate pair, then the
/// real roots, each group sorted.
inline std::vector<cplx> conjugate_representatives(std::vector<cplx> z) {
  if (z.empty()) return z;
  const double tol = 100.0 * std::numeric_limits<double>::epsilon();
  std::stable_sort(z.begin(), z.end(), [](const cplx& a, const cplx& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return std::abs(a.imag()) < std::abs(b.imag());
  });
  std::vector<cplx> reals, pos, neg;
  for (const cplx& c : z) {
    if (std::abs(c.imag()) <= tol * std::abs(c))
      reals.emplace_back(c.real(), 0.0);
    else if (c.imag() > 0)
      pos.push_back(c);
    else
      neg.push_back(c);
  }
  if (pos.size() != neg.size()) throw DesignError("root set has a complex value without a conjugate");
  // Runs sharing a real part are ordered by |imag|.
  std::size_t start = 0;
  while (start < pos.size()) {
    std::size_t stop = start + 1;
    while (stop < pos.size() && pos[stop].real() - pos[stop - 1].real() <= tol * std::abs(pos[stop - 1])) ++stop;
    auto by_imag = [](const cplx& a, const cplx& b) { return std::abs(a.imag()) < std::abs(b.imag()); };
    std::stable_sort(pos.begin() + static_cast<long>(start), pos.begin() + static_cast<long>(stop), by_imag);
    std::stable_sort(neg.begin() + static_cast<long>(start), neg.begin() + static_cast<long>(stop), by_imag);
    start = stop;
  }
  std::vector<cplx> out;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    if (std::abs(pos[i] - std::conj(neg[i])) > tol * std::abs(neg[i]))
      throw DesignError("root set has a complex value without a conjugate");
    out.push_back((pos[i] + std::conj(neg[i])) / 2.0);
  }
  out.insert(out.end(), reals.begin(), reals.end());
  return out;
}

enum class RootKind { real, complex, any };

inline std::size_t nearest_index(const std::vector<cplx>& from, const cplx& to, RootKind kind) {
  std::vector<std::size_t> order(from.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(from[a] - to) < std::abs(from[b] - to); });
  for (std::size_t i : order) {
    if (kind == RootKind::any || (kind == RootKind::real) == is_real(from[i])) return i;
  }
  throw DesignError("no root of the requested kind left to pair");
}

inline cplx take(std::vector<cplx>& v, std::size_t i) {
  const cplx c = v[i];
  v.erase(v.begin() + static_cast<long>(i));
  return c;
}

/// Monic polynomial with the given roots; conjugate pairs are expanded.
inline std::array<double, 3> quadratic(const std::vector<cplx>& roots) {
  std::vector<cplx> c = {cplx(1.0)};
  for (const cplx& r : roots) {
    std::vector<cplx> next(c.size() + 1, cplx(0.0));
    for (std::size_t i = 0; i < c.size(); ++i) {
      next[i] += c[i];
      next[i + 1] -= c[i] * r;
    }
    c = std::move(next);
  }
  std::array<double, 3> out{0.0, 0.0, 0.0};
  const std::size_t offset = 3 - c.size();
  for (std::size_t i = 0; i < c.size(); ++i) out[offset + i] = c[i].real();
  return out;
}

inline Biquad make_section(std::vector<cplx> zeros, std::vector<cplx> poles) {
  auto expand = [](std::vector<cplx>& roots) {
    if (roots.size() == 1 && !is_real(roots[0])) roots.push_back(std::conj(roots[0]));
  };
  expand(zeros);
  expand(poles);
  const auto b = quadratic(zeros);
  const auto a = quadratic(poles);
  // Shorter polynomials are right-aligned; a is monic with a[0] == 1 after alignment.
  return {b[0], b[1], b[2], a[1], a[2]};
}

inline std::vector<Biquad> zpk_to_sections(Zpk zpk) {
  auto& z = zpk.zeros;
  auto& p = zpk.poles;
  if (p.size() < z.size()) p.resize(z.size(), cplx(0.0));
  if (z.size() < p.size()) z.resize(p.size(), cplx(0.0));
  const std::size_t n_sections = (p.size() + 1) / 2;
  if (p.size() % 2 == 1) {
    p.emplace_back(0.0);
    z.emplace_back(0.0);
  }
  z = conjugate_representatives(z);
  p = conjugate_representatives(p);

  auto worst = [](const std::vector<cplx>& roots, const std::vector<std::size_t>& candidates) {
    std::size_t best = candidates.front();
    for (std::size_t i : candidates)
      if (std::abs(1.0 - std::abs(roots[i])) < std::abs(1.0 - std::abs(roots[best]))) best = i;
    return best;
  };
  auto all_indices = [](const std::vector<cplx>& roots) {
    std::vector<std::size_t> idx(roots.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
  };
  auto count_real = [](const std::vector<cplx>& roots) {
    return static_cast<std::size_t>(std::count_if(roots.begin(), roots.end(), is_real));
  };

  std::vector<Biquad> sos(n_sections);
  for (std::size_t si = n_sections; si-- > 0;) {
    const cplx p1 = take(p, worst(p, all_indices(p)));
    if (is_real(p1) && count_real(p) == 0) {
      const cplx z1 = take(z, nearest_index(z, p1, RootKind::real));
      sos[si] = make_section({z1, cplx(0.0)}, {p1, cplx(0.0)});
    } else if (p.size() + 1 == z.size() && !is_real(p1) && count_real(p) == 1 && count_real(z) == 1) {
      const cplx z1 = take(z, nearest_index(z, p1, RootKind::complex));
      sos[si] = make_section({z1}, {p1});
    } else {
      cplx p2 = std::conj(p1);
      if (is_real(p1)) {
        std::vector<std::size_t> reals;
        for (std::size_t i = 0; i < p.size(); ++i)
          if (is_real(p[i])) reals.push_back(i);
        p2 = take(p, worst(p, reals));
      }
      if (z.empty()) {
        sos[si] = make_section({}, {p1, p2});
      } else {
        const cplx z1 = take(z, nearest_index(z, p1, RootKind::any));
        if (!is_real(z1)) {
          sos[si] = make_section({z1}, {p1, p2});
        } else if (!z.empty()) {
          const cplx z2 = take(z, nearest_index(z, p1, RootKind::real));
          sos[si] = make_section({z1, z2}, {p1, p2});
        } else {
          sos[si] = make_section({z1}, {p1, p2});
        }
      }
    }
  }
  sos[0].b0 *= zpk.gain;
  sos[0].b1 *= zpk.gain;
  sos[0].b2 *= zpk.gain;
  return sos;
}

}  // namespace detail

/// Digital Butterworth bandpass as cascaded second-order sections.
/// Analog prototype, lowpass-to-bandpass, prewarped bilinear transform, then
/// nearest-pole/zero pairing with the sections nearest the unit circle last.
inline SosFilter design_butterworth_bandpass(int order, double low_hz, double high_hz, double sample_rate_hz) {
  if (order < 1) throw DesignError("filter order must be at least 1, got " + std::to_string(order));
  if (!std::isfinite(low_hz) || !std::isfinite(high_hz) || !std::isfinite(sample_rate_hz) || sample_rate_hz <= 0.0)
    throw DesignError("filter frequencies must be finite and the sample rate positive");
  if (low_hz <= 0.0) throw DesignError("low cutoff must be positive, got " + std::to_string(low_hz));
  if (low_hz >= high_hz) throw DesignError("low cutoff must be below high cutoff");
  const double nyquist = sample_rate_hz / 2.0;
  if (high_hz >= nyquist)
    throw DesignError("high cutoff " + std::to_string(high_hz) + " Hz is at or above Nyquist " +
                      std::to_string(nyquist) + " Hz");

  const double w_low = 4.0 * std::tan(std::numbers::pi * (2.0 * low_hz / sample_rate_hz) / 2.0);
  const double w_high = 4.0 * std::tan(std::numbers::pi * (2.0 * high_hz / sample_rate_hz) / 2.0);
  const auto analog = detail::lowpass_to_bandpass(detail::butter_prototype(order), std::sqrt(w_low * w_high),
                                                  w_high - w_low);
  SosFilter f;
  f.sections = detail::zpk_to_sections(detail::bilinear(analog));
  f.order = order;
  f.low_hz = low_hz;
  f.high_hz = high_hz;
  f.sample_rate_hz = sample_rate_hz;
  return f;
}

inline std::complex<double> frequency_response(const SosFilter& f, double freq_hz) {
  const double w = 2.0 * std::numbers::pi * freq_hz / f.sample_rate_hz;
  const std::complex<double> zi = std::exp(std::complex<double>(0.0, -w));
  const std::complex<double> zi2 = zi * zi;
  std::complex<double> h(1.0, 0.0);
  for (const Biquad& s : f.sections) h *= (s.b0 + s.b1 * zi + s.b2 * zi2) / (1.0 + s.a1 * zi + s.a2 * zi2);
  return h;
}

inline double magnitude_response(const SosFilter& f, double freq_hz) { return std::abs(frequency_response(f, freq_hz)); }

/// Roots of z^2 + a1 z + a2 for every section.
inline std::vector<std::complex<double>> poles(const SosFilter& f) {
  std::vector<std::complex<double>> out;
  for (const Biquad& s : f.sections) {
    const std::complex<double> disc = std::sqrt(std::complex<double>(s.a1 * s.a1 - 4.0 * s.a2, 0.0));
    out.push_back((-s.a1 + disc) / 2.0);
    out.push_back((-s.a1 - disc) / 2.0);
  }
  return out;
}

inline bool is_stable(const SosFilter& f) {
  const auto ps = poles(f);
  return std::all_of(ps.begin(), ps.end(), [](const auto& p) { return std::abs(p) < 1.0; });
}

}  // namespace fnwl

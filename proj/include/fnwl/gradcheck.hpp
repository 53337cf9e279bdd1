// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "fnwl/tensor.hpp"

namespace fnwl {

/// A parameter perturbed in place by the checker together with its analytic
/// gradient.
struct CheckedParam {
  std::string name;
  Tensor* value;
  const Tensor* analytic;
};

struct ParamCheck {
  std::string name;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

struct GradcheckReport {
  std::vector<ParamCheck> params;
  double tolerance = 0.0;

  bool passed() const {
    return std::all_of(params.begin(), params.end(), [](const ParamCheck& p) { return p.passed; });
  }
  double max_rel_error() const {
    double m = 0.0;
    for (const auto& p : params) m = std::max(m, p.max_rel_error);
    return m;
  }
};

/// |a - n| / max(1e-8, |a| + |n|)
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

/// Compares analytic gradients with central differences
/// (f(x+h) - f(x-h)) / 2h of the scalar `loss`, perturbing one entry of one
/// parameter at a time and restoring it afterwards.
inline GradcheckReport finite_diff_gradcheck(const std::function<long double()>& loss,
                                             const std::vector<CheckedParam>& params, double h, double tol) {
  if (!(h > 0.0)) throw ConfigError("finite-difference step must be positive");
  auto eval = [&](const std::string& name, std::size_t idx) {
    const long double v = loss();
    if (!std::isfinite(v))
      throw NumericError("non-finite loss while perturbing " + name + "[" + std::to_string(idx) + "]");
    return v;
  };
  GradcheckReport report;
  report.tolerance = tol;
  for (const auto& p : params) {
    if (p.value->shape() != p.analytic->shape())
      throw DimensionError("gradient for " + p.name + " has shape " + to_string(p.analytic->shape()) +
                           ", parameter has " + to_string(p.value->shape()));
    ParamCheck c{p.name};
    for (std::size_t i = 0; i < p.value->size(); ++i) {
      double& x = (*p.value)[i];
      const double saved = x;
      const double plus = saved + h;
      const double minus = saved - h;
      x = plus;
      const long double up = eval(p.name, i);
      x = minus;
      const long double down = eval(p.name, i);
      x = saved;
      const double numeric = static_cast<double>((up - down) / (static_cast<long double>(plus) - minus));
      const double err = relative_error((*p.analytic)[i], numeric);
      c.max_abs_error = std::max(c.max_abs_error, std::abs((*p.analytic)[i] - numeric));
      if (err > c.max_rel_error) {
        c.max_rel_error = err;
        c.worst_index = i;
        c.worst_analytic = (*p.analytic)[i];
        c.worst_numeric = numeric;
      }
    }
    c.passed = c.max_rel_error <= tol;
    report.params.push_back(std::move(c));
  }
  return report;
}

}  // namespace fnwl

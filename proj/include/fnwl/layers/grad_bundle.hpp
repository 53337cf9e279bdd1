// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>

#include "fnwl/tensor.hpp"

namespace fnwl {

/// Result of a layer's backward pass: one gradient per learnable parameter
/// (same shape as the parameter), the gradient with respect to the layer
/// input, and for recurrent cells the gradients of the carried state
/// ("h_prev", "c_prev").
struct GradBundle {
  std::map<std::string, Tensor> params;
  Tensor input;
  std::map<std::string, Tensor> state;

  bool has(const std::string& name) const { return params.count(name) != 0; }
  const Tensor& param(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw DimensionError("gradient bundle has no entry '" + name + "'");
    return it->second;
  }
};

}  // namespace fnwl

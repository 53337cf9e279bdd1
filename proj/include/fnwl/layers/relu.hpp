// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fnwl/tensor.hpp"

namespace fnwl {

inline Tensor relu(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

/// Passes `dy` where the forward input was strictly positive; the
/// subgradient at exactly zero is 0.
inline Tensor relu_backward(const Tensor& x, const Tensor& dy) {
  Tensor::require_same_shape(x, dy, "relu_backward");
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (!(x[i] > 0.0)) dx[i] = 0.0;
  return dx;
}

}  // namespace fnwl

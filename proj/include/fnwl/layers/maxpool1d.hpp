// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "fnwl/tensor.hpp"

namespace fnwl {

struct PoolResult {
  Tensor output;
  /// Flat input offset of the winning element for every output element.
  std::vector<std::size_t> argmax;
  Shape input_shape;
};

/// Non-overlapping max pooling (stride = pool) over the last axis of a
/// [BS, C, L] tensor. Output length is floor(L / pool); a trailing partial
/// window is dropped. Ties go to the lowest index.
inline PoolResult maxpool1d(const Tensor& x, std::size_t pool) {
  require_rank(x, 3, "maxpool1d input");
  if (pool == 0) throw ConfigError("maxpool1d pool size must be >= 1");
  const std::size_t batch = x.dim(0), ch = x.dim(1), len = x.dim(2);
  const std::size_t out_len = len / pool;
  if (out_len == 0)
    throw LengthError("maxpool1d: input length " + std::to_string(len) + " is shorter than pool size " +
                      std::to_string(pool) + ", output would be empty");
  PoolResult r{Tensor({batch, ch, out_len}), std::vector<std::size_t>(batch * ch * out_len), x.shape()};
  const auto xd = x.data();
  for (std::size_t row = 0; row < batch * ch; ++row) {
    for (std::size_t i = 0; i < out_len; ++i) {
      std::size_t best = row * len + i * pool;
      for (std::size_t j = 1; j < pool; ++j) {
        const std::size_t idx = row * len + i * pool + j;
        if (xd[idx] > xd[best]) best = idx;
      }
      r.output[row * out_len + i] = xd[best];
      r.argmax[row * out_len + i] = best;
    }
  }
  return r;
}

/// Routes each upstream gradient to its recorded argmax position.
inline Tensor maxpool1d_backward(const PoolResult& fwd, const Tensor& dy) {
  if (dy.shape() != fwd.output.shape())
    throw DimensionError("maxpool1d upstream gradient " + to_string(dy.shape()) + " does not match output " +
                         to_string(fwd.output.shape()));
  Tensor dx(fwd.input_shape);
  for (std::size_t i = 0; i < dy.size(); ++i) dx[fwd.argmax[i]] += dy[i];
  return dx;
}

}  // namespace fnwl

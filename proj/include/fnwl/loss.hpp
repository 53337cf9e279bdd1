// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "fnwl/tensor.hpp"

namespace fnwl {

struct LossResult {
  double loss = 0.0;
  Tensor dlogits;
};

/// Mean softmax cross-entropy over the batch with its gradient
/// (softmax - onehot) / BS. Uses max subtraction for stability.
inline LossResult softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "logits");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch)
    throw DimensionError("label count " + std::to_string(labels.size()) + " does not match logits " +
                         to_string(logits.shape()));
  LossResult r{0.0, Tensor(logits.shape())};
  for (std::size_t b = 0; b < batch; ++b) {
    const int y = labels[b];
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
      throw LabelError("label " + std::to_string(y) + " at row " + std::to_string(b) + " outside 0.." +
                       std::to_string(classes - 1));
    const double* row = &logits.data()[b * classes];
    const double mx = *std::max_element(row, row + classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(row[k] - mx);
    r.loss += mx + std::log(sum) - row[y];
    for (std::size_t k = 0; k < classes; ++k) {
      const double pk = std::exp(row[k] - mx) / sum;
      r.dlogits[b * classes + k] = (pk - (static_cast<std::size_t>(y) == k ? 1.0 : 0.0)) / static_cast<double>(batch);
    }
  }
  r.loss /= static_cast<double>(batch);
  return r;
}

/// Row-wise softmax probabilities.
inline Tensor softmax(const Tensor& logits) {
  require_rank(logits, 2, "logits");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  Tensor p(logits.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const double* row = &logits.data()[b * classes];
    const double mx = *std::max_element(row, row + classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += std::exp(row[k] - mx);
    for (std::size_t k = 0; k < classes; ++k) p[b * classes + k] = std::exp(row[k] - mx) / sum;
  }
  return p;
}

}  // namespace fnwl

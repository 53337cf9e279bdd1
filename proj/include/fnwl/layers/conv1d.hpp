// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "fnwl/layers/grad_bundle.hpp"
#include "fnwl/tensor.hpp"

namespace fnwl {

/// Learnable 1-D convolution: weight [out_channels, in_channels, k],
/// bias [out_channels], symmetric zero padding.
struct ConvParams {
  Tensor weight;
  Tensor bias;
  std::size_t padding = 0;

  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t kernel_width() const { return weight.dim(2); }

  /// Zero-initialised parameters with same-length padding (k odd).
  static ConvParams same(std::size_t in_channels, std::size_t out_channels, std::size_t k) {
    if (k == 0 || k % 2 == 0) throw ConfigError("same-padding convolution needs an odd kernel, got k=" + std::to_string(k));
    return {Tensor::zeros({out_channels, in_channels, k}), Tensor::zeros({out_channels}), (k - 1) / 2};
  }
};

namespace detail {

inline void check_conv(const Tensor& x, const ConvParams& p) {
  require_rank(x, 3, "conv1d input");
  require_rank(p.weight, 3, "conv1d weight");
  if (p.bias.shape() != Shape{p.out_channels()})
    throw DimensionError("conv1d bias shape " + to_string(p.bias.shape()) + " does not match weight " +
                         to_string(p.weight.shape()));
  if (x.dim(1) != p.in_channels())
    throw DimensionError("conv1d input " + to_string(x.shape()) + " has " + std::to_string(x.dim(1)) +
                         " channels but weight " + to_string(p.weight.shape()) + " expects " +
                         std::to_string(p.in_channels()));
  if (x.dim(2) + 2 * p.padding < p.kernel_width())
    throw DimensionError("conv1d input " + to_string(x.shape()) + " is shorter than kernel " +
                         to_string(p.weight.shape()) + " after padding");
}

inline std::size_t conv_out_length(std::size_t length, const ConvParams& p) {
  return length + 2 * p.padding - p.kernel_width() + 1;
}

}  // namespace detail

/// y[b,o,i] = bias[o] + sum_c sum_j xpad[b,c,i+j] * w[o,c,j]; no activation.
inline Tensor conv1d_forward(const Tensor& x, const ConvParams& p) {
  detail::check_conv(x, p);
  const std::size_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::size_t cout = p.out_channels(), k = p.kernel_width();
  const std::size_t out_len = detail::conv_out_length(len, p);
  const auto pad = static_cast<std::ptrdiff_t>(p.padding);

  Tensor y({batch, cout, out_len});
  const auto xd = x.data();
  const auto wd = p.weight.data();
  auto yd = y.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      double* yrow = &yd[(b * cout + o) * out_len];
      for (std::size_t i = 0; i < out_len; ++i) yrow[i] = p.bias[o];
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xrow = &xd[(b * cin + c) * len];
        const double* wrow = &wd[(o * cin + c) * k];
        for (std::size_t j = 0; j < k; ++j) {
          const double w = wrow[j];
          // input index = i + j - pad must lie in [0, len)
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
          const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
          const std::ptrdiff_t hi =
              std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_len), static_cast<std::ptrdiff_t>(len) - shift);
          for (std::ptrdiff_t i = lo; i < hi; ++i) yrow[i] += w * xrow[i + shift];
        }
      }
    }
  }
  return y;
}

/// Gradients "W", "b" and the input gradient for upstream gradient `dy`.
inline GradBundle conv1d_backward(const Tensor& x, const ConvParams& p, const Tensor& dy) {
  detail::check_conv(x, p);
  const std::size_t batch = x.dim(0), cin = x.dim(1), len = x.dim(2);
  const std::size_t cout = p.out_channels(), k = p.kernel_width();
  const std::size_t out_len = detail::conv_out_length(len, p);
  if (dy.shape() != Shape{batch, cout, out_len})
    throw DimensionError("conv1d upstream gradient " + to_string(dy.shape()) + " does not match output shape " +
                         to_string(Shape{batch, cout, out_len}));
  const auto pad = static_cast<std::ptrdiff_t>(p.padding);

  Tensor dw(p.weight.shape()), db(p.bias.shape()), dx(x.shape());
  const auto xd = x.data();
  const auto wd = p.weight.data();
  const auto gd = dy.data();
  auto dwd = dw.data();
  auto dxd = dx.data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t o = 0; o < cout; ++o) {
      const double* grow = &gd[(b * cout + o) * out_len];
      for (std::size_t i = 0; i < out_len; ++i) db[o] += grow[i];
      for (std::size_t c = 0; c < cin; ++c) {
        const double* xrow = &xd[(b * cin + c) * len];
        double* dxrow = &dxd[(b * cin + c) * len];
        for (std::size_t j = 0; j < k; ++j) {
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(j) - pad;
          const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
          const std::ptrdiff_t hi =
              std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(out_len), static_cast<std::ptrdiff_t>(len) - shift);
          const double w = wd[(o * cin + c) * k + j];
          double acc = 0.0;
          for (std::ptrdiff_t i = lo; i < hi; ++i) {
            acc += grow[i] * xrow[i + shift];
            dxrow[i + shift] += grow[i] * w;
          }
          dwd[(o * cin + c) * k + j] += acc;
        }
      }
    }
  }
  GradBundle g;
  g.params.emplace("W", std::move(dw));
  g.params.emplace("b", std::move(db));
  g.input = std::move(dx);
  return g;
}

}  // namespace fnwl

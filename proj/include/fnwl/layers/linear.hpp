// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fnwl/layers/grad_bundle.hpp"
#include "fnwl/tensor.hpp"

namespace fnwl {

/// Dense layer y = x W^T + b with W [out, in].
struct LinearParams {
  Tensor weight;
  Tensor bias;

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  static LinearParams zeros(std::size_t in, std::size_t out) {
    return {Tensor::zeros({out, in}), Tensor::zeros({out})};
  }
};

namespace detail {

inline void check_linear(const Tensor& x, const LinearParams& p) {
  require_rank(x, 2, "linear input");
  require_rank(p.weight, 2, "linear weight");
  if (p.bias.shape() != Shape{p.out_features()})
    throw DimensionError("linear bias " + to_string(p.bias.shape()) + " does not match weight " +
                         to_string(p.weight.shape()));
  if (x.dim(1) != p.in_features())
    throw DimensionError("linear input " + to_string(x.shape()) + " does not match weight " +
                         to_string(p.weight.shape()));
}

/// Dot product with four interleaved partial sums; the order is fixed, so
/// results are reproducible.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

/// dot(a_r, b, n) for four rows a_0..a_3 at once, same summation order.
inline void dot4(const double* const a[4], const double* b, std::size_t n, double out[4]) {
  double s[4][4] = {};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    for (int r = 0; r < 4; ++r)
      for (int k = 0; k < 4; ++k) s[r][k] += a[r][i + k] * b[i + k];
  for (int r = 0; r < 4; ++r) {
    for (std::size_t j = i; j < n; ++j) s[r][0] += a[r][j] * b[j];
    out[r] = (s[r][0] + s[r][1]) + (s[r][2] + s[r][3]);
  }
}

/// out[b,o] += sum_i x[b,i] * w[o,i]
inline void add_matmul_nt(std::span<const double> x, std::span<const double> w, std::span<double> out,
                          std::size_t rows, std::size_t in, std::size_t outdim) {
  for (std::size_t o = 0; o < outdim; ++o) {
    const double* wr = &w[o * in];
    std::size_t b = 0;
    for (; b + 4 <= rows; b += 4) {
      const double* xr[4] = {&x[b * in], &x[(b + 1) * in], &x[(b + 2) * in], &x[(b + 3) * in]};
      double d[4];
      dot4(xr, wr, in, d);
      for (std::size_t r = 0; r < 4; ++r) out[(b + r) * outdim + o] += d[r];
    }
    for (; b < rows; ++b) out[b * outdim + o] += dot(&x[b * in], wr, in);
  }
}

/// dw[o,i] += sum_b g[b,o] * x[b,i]
inline void add_matmul_tn(std::span<const double> g, std::span<const double> x, std::span<double> dw,
                          std::size_t rows, std::size_t outdim, std::size_t in) {
  for (std::size_t o = 0; o < outdim; ++o) {
    double* dwr = &dw[o * in];
    for (std::size_t b = 0; b < rows; ++b) {
      const double go = g[b * outdim + o];
      if (go == 0.0) continue;
      const double* xr = &x[b * in];
      for (std::size_t i = 0; i < in; ++i) dwr[i] += go * xr[i];
    }
  }
}

/// dx[b,i] += sum_o g[b,o] * w[o,i]
inline void add_matmul_nn(std::span<const double> g, std::span<const double> w, std::span<double> dx,
                          std::size_t rows, std::size_t outdim, std::size_t in) {
  for (std::size_t o = 0; o < outdim; ++o) {
    const double* wr = &w[o * in];
    for (std::size_t b = 0; b < rows; ++b) {
      const double go = g[b * outdim + o];
      if (go == 0.0) continue;
      double* dxr = &dx[b * in];
      for (std::size_t i = 0; i < in; ++i) dxr[i] += go * wr[i];
    }
  }
}

}  // namespace detail

inline Tensor linear_forward(const Tensor& x, const LinearParams& p) {
  detail::check_linear(x, p);
  const std::size_t batch = x.dim(0), in = p.in_features(), out = p.out_features();
  Tensor y({batch, out});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out; ++o) y[b * out + o] = p.bias[o];
  detail::add_matmul_nt(x.data(), p.weight.data(), y.data(), batch, in, out);
  return y;
}

inline GradBundle linear_backward(const Tensor& x, const LinearParams& p, const Tensor& dy) {
  detail::check_linear(x, p);
  const std::size_t batch = x.dim(0), in = p.in_features(), out = p.out_features();
  if (dy.shape() != Shape{batch, out})
    throw DimensionError("linear upstream gradient " + to_string(dy.shape()) + " does not match output " +
                         to_string(Shape{batch, out}));
  Tensor dw(p.weight.shape()), db(p.bias.shape()), dx(x.shape());
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out; ++o) db[o] += dy[b * out + o];
  detail::add_matmul_tn(dy.data(), x.data(), dw.data(), batch, out, in);
  detail::add_matmul_nn(dy.data(), p.weight.data(), dx.data(), batch, out, in);
  GradBundle g;
  g.params.emplace("W", std::move(dw));
  g.params.emplace("b", std::move(db));
  g.input = std::move(dx);
  return g;
}

}  // namespace fnwl

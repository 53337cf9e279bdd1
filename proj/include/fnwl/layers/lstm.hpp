// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "fnwl/layers/grad_bundle.hpp"
#include "fnwl/layers/linear.hpp"
#include "fnwl/tensor.hpp"

namespace fnwl {

enum class Gate : std::size_t { input = 0, forget = 1, output = 2, cell = 3 };

inline constexpr std::array<const char*, 4> kGateSuffix = {"i", "f", "o", "c"};

/// Peephole LSTM parameters. Input maps U_g [hidden, input] and recurrent
/// maps V_g [hidden, hidden] are dense; peepholes Z_g [hidden] act on the
/// previous cell state elementwise and exist only for the input, forget and
/// output gates.
struct LstmParams {
  std::array<Tensor, 4> input_w;
  std::array<Tensor, 4> recurrent_w;
  std::array<Tensor, 3> peephole;
  std::array<Tensor, 4> bias;
  bool peephole_enabled = true;

  std::size_t input_size() const { return input_w[0].dim(1); }
  std::size_t hidden_size() const { return input_w[0].dim(0); }

  static LstmParams zeros(std::size_t input, std::size_t hidden, bool peephole = true) {
    LstmParams p;
    for (std::size_t g = 0; g < 4; ++g) {
      p.input_w[g] = Tensor::zeros({hidden, input});
      p.recurrent_w[g] = Tensor::zeros({hidden, hidden});
      p.bias[g] = Tensor::zeros({hidden});
    }
    if (peephole)
      for (auto& z : p.peephole) z = Tensor::zeros({hidden});
    p.peephole_enabled = peephole;
    return p;
  }

  Tensor& U(Gate g) { return input_w[static_cast<std::size_t>(g)]; }
  Tensor& V(Gate g) { return recurrent_w[static_cast<std::size_t>(g)]; }
  Tensor& b(Gate g) { return bias[static_cast<std::size_t>(g)]; }

  /// Visits every parameter as (name, tensor) in canonical order:
  /// U_i U_f U_o U_c V_i V_f V_o V_c [Z_i Z_f Z_o] b_i b_f b_o b_c.
  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    for (std::size_t g = 0; g < 4; ++g) f(std::string("U_") + kGateSuffix[g], self.input_w[g]);
    for (std::size_t g = 0; g < 4; ++g) f(std::string("V_") + kGateSuffix[g], self.recurrent_w[g]);
    if (self.peephole_enabled)
      for (std::size_t g = 0; g < 3; ++g) f(std::string("Z_") + kGateSuffix[g], self.peephole[g]);
    for (std::size_t g = 0; g < 4; ++g) f(std::string("b_") + kGateSuffix[g], self.bias[g]);
  }
  template <typename F>
  void for_each(F&& f) { visit(*this, f); }
  template <typename F>
  void for_each(F&& f) const { visit(*this, f); }

  void validate() const {
    const std::size_t h = hidden_size(), in = input_size();
    for (std::size_t g = 0; g < 4; ++g) {
      if (input_w[g].shape() != Shape{h, in})
        throw DimensionError("LSTM input weights U_" + std::string(kGateSuffix[g]) + " " +
                             to_string(input_w[g].shape()) + " differ from " + to_string(Shape{h, in}));
      if (recurrent_w[g].shape() != Shape{h, h})
        throw DimensionError("LSTM recurrent weights V_" + std::string(kGateSuffix[g]) + " " +
                             to_string(recurrent_w[g].shape()) + " differ from " + to_string(Shape{h, h}));
      if (bias[g].shape() != Shape{h})
        throw DimensionError("LSTM bias b_" + std::string(kGateSuffix[g]) + " " + to_string(bias[g].shape()) +
                             " differs from " + to_string(Shape{h}));
    }
    for (std::size_t g = 0; g < 3; ++g) {
      if (peephole_enabled && peephole[g].shape() != Shape{h})
        throw DimensionError("LSTM peephole Z_" + std::string(kGateSuffix[g]) + " " + to_string(peephole[g].shape()) +
                             " differs from " + to_string(Shape{h}));
      if (!peephole_enabled && !peephole[g].empty())
        throw DimensionError("LSTM peephole Z_" + std::string(kGateSuffix[g]) + " present while peepholes are disabled");
    }
  }
};

/// Everything the backward pass of one cell step needs.
struct LstmCellCache {
  const LstmParams* owner = nullptr;
  Tensor x, h_prev, c_prev;
  Tensor i, f, o, cand;  // gate activations and cell candidate
  Tensor c, tanh_c;
};

struct LstmCellOutput {
  Tensor h;
  Tensor c;
  LstmCellCache cache;
};

namespace detail {

inline double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

}  // namespace detail

/// One step:
///   i = s(U_i x + V_i h + Z_i . c_prev + b_i)   f, o alike
///   cand = tanh(U_c x + V_c h + b_c)
///   c = f . c_prev + i . cand,  h = o . tanh(c)
/// The output gate peeks at c_prev, not c.
inline LstmCellOutput lstm_cell_forward(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                                        const LstmParams& p) {
  p.validate();
  require_rank(x, 2, "LSTM cell input");
  const std::size_t batch = x.dim(0), in = p.input_size(), hid = p.hidden_size();
  if (x.dim(1) != in)
    throw DimensionError("LSTM cell input " + to_string(x.shape()) + " does not match U " +
                         to_string(p.input_w[0].shape()));
  if (h_prev.shape() != Shape{batch, hid} || c_prev.shape() != Shape{batch, hid})
    throw DimensionError("LSTM state shapes " + to_string(h_prev.shape()) + ", " + to_string(c_prev.shape()) +
                         " do not match " + to_string(Shape{batch, hid}));

  std::array<Tensor, 4> pre;
  for (std::size_t g = 0; g < 4; ++g) {
    pre[g] = Tensor({batch, hid});
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t u = 0; u < hid; ++u) {
        double v = p.bias[g][u];
        if (g < 3 && p.peephole_enabled) v += p.peephole[g][u] * c_prev[b * hid + u];
        pre[g][b * hid + u] = v;
      }
    detail::add_matmul_nt(x.data(), p.input_w[g].data(), pre[g].data(), batch, in, hid);
    detail::add_matmul_nt(h_prev.data(), p.recurrent_w[g].data(), pre[g].data(), batch, hid, hid);
  }

  LstmCellOutput out;
  auto& k = out.cache;
  k.owner = &p;
  k.x = x;
  k.h_prev = h_prev;
  k.c_prev = c_prev;
  k.i = std::move(pre[0]);
  k.f = std::move(pre[1]);
  k.o = std::move(pre[2]);
  k.cand = std::move(pre[3]);
  k.c = Tensor({batch, hid});
  k.tanh_c = Tensor({batch, hid});
  out.h = Tensor({batch, hid});
  for (std::size_t n = 0; n < batch * hid; ++n) {
    k.i[n] = detail::sigmoid(k.i[n]);
    k.f[n] = detail::sigmoid(k.f[n]);
    k.o[n] = detail::sigmoid(k.o[n]);
    k.cand[n] = std::tanh(k.cand[n]);
    k.c[n] = k.f[n] * c_prev[n] + k.i[n] * k.cand[n];
    k.tanh_c[n] = std::tanh(k.c[n]);
    out.h[n] = k.o[n] * k.tanh_c[n];
  }
  out.c = k.c;
  return out;
}

/// Reverse of lstm_cell_forward. `dh` and `dc` are the gradients reaching h_t
/// and c_t. Returns parameter gradients under the canonical names (Z_* only
/// when peepholes are enabled), the input gradient, and state gradients
/// "h_prev" and "c_prev".
inline GradBundle lstm_cell_backward(const LstmCellCache& k, const Tensor& dh, const Tensor& dc,
                                     const LstmParams& p) {
  if (k.owner != &p)
    throw ContractError("LSTM cache was produced with a different parameter set");
  const std::size_t hid = p.hidden_size(), in = p.input_size();
  if (k.x.rank() != 2 || k.x.dim(1) != in || k.c.shape() != Shape{k.x.dim(0), hid})
    throw ContractError("LSTM cache shapes " + to_string(k.x.shape()) + ", " + to_string(k.c.shape()) +
                        " are stale for parameters with input " + std::to_string(in) + " and hidden " +
                        std::to_string(hid));
  const std::size_t batch = k.x.dim(0);
  if (dh.shape() != Shape{batch, hid} || dc.shape() != Shape{batch, hid})
    throw DimensionError("LSTM upstream gradients " + to_string(dh.shape()) + ", " + to_string(dc.shape()) +
                         " do not match " + to_string(Shape{batch, hid}));

  // Pre-activation gradients for i, f, o, cand.
  std::array<Tensor, 4> da;
  for (auto& t : da) t = Tensor({batch, hid});
  Tensor dc_prev({batch, hid});
  for (std::size_t n = 0; n < batch * hid; ++n) {
    const double d_o = dh[n] * k.tanh_c[n];
    const double d_c = dc[n] + dh[n] * k.o[n] * (1.0 - k.tanh_c[n] * k.tanh_c[n]);
    const double d_i = d_c * k.cand[n];
    const double d_f = d_c * k.c_prev[n];
    const double d_cand = d_c * k.i[n];
    da[0][n] = d_i * k.i[n] * (1.0 - k.i[n]);
    da[1][n] = d_f * k.f[n] * (1.0 - k.f[n]);
    da[2][n] = d_o * k.o[n] * (1.0 - k.o[n]);
    da[3][n] = d_cand * (1.0 - k.cand[n] * k.cand[n]);
    dc_prev[n] = d_c * k.f[n];
  }

  GradBundle g;
  Tensor dx({batch, in}), dh_prev({batch, hid});
  for (std::size_t gate = 0; gate < 4; ++gate) {
    Tensor dU({hid, in}), dV({hid, hid}), db({hid});
    detail::add_matmul_tn(da[gate].data(), k.x.data(), dU.data(), batch, hid, in);
    detail::add_matmul_tn(da[gate].data(), k.h_prev.data(), dV.data(), batch, hid, hid);
    detail::add_matmul_nn(da[gate].data(), p.input_w[gate].data(), dx.data(), batch, hid, in);
    detail::add_matmul_nn(da[gate].data(), p.recurrent_w[gate].data(), dh_prev.data(), batch, hid, hid);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t u = 0; u < hid; ++u) db[u] += da[gate][b * hid + u];
    const std::string s = kGateSuffix[gate];
    g.params.emplace("U_" + s, std::move(dU));
    g.params.emplace("V_" + s, std::move(dV));
    g.params.emplace("b_" + s, std::move(db));
    if (gate < 3 && p.peephole_enabled) {
      Tensor dZ({hid});
      for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t u = 0; u < hid; ++u) {
          const std::size_t n = b * hid + u;
          dZ[u] += da[gate][n] * k.c_prev[n];
          dc_prev[n] += da[gate][n] * p.peephole[gate][u];
        }
      g.params.emplace("Z_" + s, std::move(dZ));
    }
  }
  g.input = std::move(dx);
  g.state.emplace("h_prev", std::move(dh_prev));
  g.state.emplace("c_prev", std::move(dc_prev));
  return g;
}

struct LstmLayerCache {
  std::vector<LstmCellCache> steps;
  Shape input_shape;
};

struct LstmLayerOutput {
  Tensor h;  // final hidden state [BS, H]
  LstmLayerCache cache;
};

/// Runs the cell over x_seq [BS, T, Din] from zero state and returns H_T.
inline LstmLayerOutput lstm_layer_forward(const Tensor& x_seq, const LstmParams& p) {
  require_rank(x_seq, 3, "LSTM layer input");
  const std::size_t batch = x_seq.dim(0), steps = x_seq.dim(1), in = x_seq.dim(2);
  if (steps == 0) throw LengthError("LSTM layer needs at least one time step");
  const std::size_t hid = p.hidden_size();
  Tensor h = Tensor::zeros({batch, hid}), c = Tensor::zeros({batch, hid});
  LstmLayerOutput out;
  out.cache.input_shape = x_seq.shape();
  out.cache.steps.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor xt({batch, in});
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t d = 0; d < in; ++d) xt[b * in + d] = x_seq[(b * steps + t) * in + d];
    auto step = lstm_cell_forward(xt, h, c, p);
    h = std::move(step.h);
    c = std::move(step.c);
    out.cache.steps.push_back(std::move(step.cache));
  }
  out.h = std::move(h);
  return out;
}

/// Backpropagation through time from the gradient of H_T only.
inline GradBundle lstm_layer_backward(const LstmLayerCache& cache, const Tensor& dh_last, const LstmParams& p) {
  if (cache.steps.empty()) throw ContractError("LSTM layer cache is empty");
  const std::size_t batch = cache.input_shape[0], steps = cache.input_shape[1], in = cache.input_shape[2];
  const std::size_t hid = p.hidden_size();
  GradBundle total;
  p.for_each([&](const std::string& name, const Tensor& t) { total.params.emplace(name, Tensor(t.shape())); });
  total.input = Tensor(cache.input_shape);
  Tensor dh = dh_last, dc = Tensor::zeros({batch, hid});
  for (std::size_t t = steps; t-- > 0;) {
    GradBundle g = lstm_cell_backward(cache.steps[t], dh, dc, p);
    for (auto& [name, grad] : g.params) total.params.at(name) += grad;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t d = 0; d < in; ++d) total.input[(b * steps + t) * in + d] = g.input[b * in + d];
    dh = std::move(g.state.at("h_prev"));
    dc = std::move(g.state.at("c_prev"));
  }
  return total;
}

}  // namespace fnwl

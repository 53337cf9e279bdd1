// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "fnwl/gradcheck.hpp"
#include "fnwl/layers/conv1d.hpp"
#include "fnwl/layers/linear.hpp"
#include "fnwl/layers/lstm.hpp"
#include "fnwl/layers/maxpool1d.hpp"
#include "fnwl/layers/relu.hpp"
#include "fnwl/loss.hpp"
#include "fnwl/model.hpp"
#include "fnwl/random.hpp"

namespace fnwl::gradcheck_suite {

inline constexpr double kStep = 1e-5;
inline constexpr double kLayerTol = 1e-6;
inline constexpr double kModelTol = 1e-4;

struct NamedReport {
  std::string check;
  GradcheckReport report;
};

namespace detail {

inline Tensor random_tensor(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// sum(r * y): a scalar whose gradient with respect to y is r.
inline long double project(const Tensor& r, const Tensor& y) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < y.size(); ++i) s += static_cast<long double>(r[i]) * y[i];
  return s;
}

}  // namespace detail

inline NamedReport conv1d(std::uint64_t seed, double tol = kLayerTol) {
  Rng rng(seed);
  Tensor x = detail::random_tensor(rng, {2, 3, 8});
  ConvParams p = ConvParams::same(3, 4, 3);
  p.weight = detail::random_tensor(rng, p.weight.shape());
  p.bias = detail::random_tensor(rng, p.bias.shape());
  Tensor r = detail::random_tensor(rng, {2, 4, 8});
  GradBundle g = conv1d_backward(x, p, r);
  auto loss = [&] { return detail::project(r, conv1d_forward(x, p)); };
  return {"conv1d", finite_diff_gradcheck(loss,
                                          {{"W", &p.weight, &g.param("W")},
                                           {"b", &p.bias, &g.param("b")},
                                           {"x", &x, &g.input}},
                                          kStep, tol)};
}

inline NamedReport relu(std::uint64_t seed, double tol = kLayerTol) {
  Rng rng(seed);
  Tensor x({2, 3, 5});
  for (double& v : x.data()) {
    do v = rng.uniform(-1.0, 1.0);
    while (std::abs(v) < 1e-3);
  }
  Tensor r = detail::random_tensor(rng, x.shape());
  Tensor dx = relu_backward(x, r);
  auto loss = [&] { return detail::project(r, fnwl::relu(x)); };
  return {"relu", finite_diff_gradcheck(loss, {{"x", &x, &dx}}, kStep, tol)};
}

inline NamedReport maxpool(std::uint64_t seed, double tol = kLayerTol) {
  Rng rng(seed);
  Tensor x = detail::random_tensor(rng, {2, 3, 9});
  Tensor r = detail::random_tensor(rng, {2, 3, 4});
  const PoolResult fwd = maxpool1d(x, 2);
  Tensor dx = maxpool1d_backward(fwd, r);
  auto loss = [&] { return detail::project(r, maxpool1d(x, 2).output); };
  return {"maxpool1d", finite_diff_gradcheck(loss, {{"x", &x, &dx}}, kStep, tol)};
}

inline NamedReport linear(std::uint64_t seed, double tol = kLayerTol) {
  Rng rng(seed);
  Tensor x = detail::random_tensor(rng, {4, 5});
  LinearParams p{detail::random_tensor(rng, {3, 5}), detail::random_tensor(rng, {3})};
  Tensor r = detail::random_tensor(rng, {4, 3});
  GradBundle g = linear_backward(x, p, r);
  auto loss = [&] { return detail::project(r, linear_forward(x, p)); };
  return {"linear", finite_diff_gradcheck(loss,
                                          {{"W", &p.weight, &g.param("W")},
                                           {"b", &p.bias, &g.param("b")},
                                           {"x", &x, &g.input}},
                                          kStep, tol)};
}

inline LstmParams random_lstm(Rng& rng, std::size_t input, std::size_t hidden, bool peephole) {
  LstmParams p = LstmParams::zeros(input, hidden, peephole);
  p.for_each([&](const std::string&, Tensor& t) {
    for (double& v : t.data()) v = rng.uniform(-1.0, 1.0);
  });
  return p;
}

inline NamedReport lstm_cell(std::uint64_t seed, bool peephole, double tol = kLayerTol) {
  Rng rng(seed);
  constexpr std::size_t kBatch = 2, kIn = 6, kHidden = 4;
  LstmParams p = random_lstm(rng, kIn, kHidden, peephole);
  Tensor x = detail::random_tensor(rng, {kBatch, kIn});
  Tensor h = detail::random_tensor(rng, {kBatch, kHidden});
  Tensor c = detail::random_tensor(rng, {kBatch, kHidden});
  Tensor rh = detail::random_tensor(rng, {kBatch, kHidden});
  Tensor rc = detail::random_tensor(rng, {kBatch, kHidden});
  const auto fwd = lstm_cell_forward(x, h, c, p);
  GradBundle g = lstm_cell_backward(fwd.cache, rh, rc, p);
  auto loss = [&] {
    const auto out = lstm_cell_forward(x, h, c, p);
    return detail::project(rh, out.h) + detail::project(rc, out.c);
  };
  std::vector<CheckedParam> params;
  p.for_each([&](const std::string& name, Tensor& t) { params.push_back({name, &t, &g.param(name)}); });
  params.push_back({"x", &x, &g.input});
  params.push_back({"h_prev", &h, &g.state.at("h_prev")});
  params.push_back({"c_prev", &c, &g.state.at("c_prev")});
  return {peephole ? "lstm_cell(peephole)" : "lstm_cell(no peephole)",
          finite_diff_gradcheck(loss, params, kStep, tol)};
}

inline NamedReport lstm_layer(std::uint64_t seed, double tol = kLayerTol) {
  Rng rng(seed);
  constexpr std::size_t kBatch = 2, kSteps = 5, kIn = 6, kHidden = 4;
  LstmParams p = random_lstm(rng, kIn, kHidden, true);
  Tensor x = detail::random_tensor(rng, {kBatch, kSteps, kIn});
  Tensor r = detail::random_tensor(rng, {kBatch, kHidden});
  const auto fwd = lstm_layer_forward(x, p);
  GradBundle g = lstm_layer_backward(fwd.cache, r, p);
  auto loss = [&] { return detail::project(r, lstm_layer_forward(x, p).h); };
  std::vector<CheckedParam> params;
  p.for_each([&](const std::string& name, Tensor& t) { params.push_back({name, &t, &g.param(name)}); });
  params.push_back({"x_seq", &x, &g.input});
  return {"lstm_layer(T=5)", finite_diff_gradcheck(loss, params, kStep, tol)};
}

inline NamedReport cross_entropy(std::uint64_t seed, double tol = kLayerTol) {
  Rng rng(seed);
  Tensor logits = detail::random_tensor(rng, {3, 4}, -2.0, 2.0);
  std::vector<int> labels(3);
  for (int& y : labels) y = static_cast<int>(rng.below(4));
  const auto fwd = softmax_cross_entropy(logits, labels);
  auto loss = [&] { return softmax_cross_entropy(logits, labels).loss; };
  return {"softmax_cross_entropy", finite_diff_gradcheck(loss, {{"logits", &logits, &fwd.dlogits}}, kStep, tol)};
}

/// Same layer stack as the default network at widths small enough for
/// exhaustive finite differences.
inline ModelConfig tiny_config(LstmInputMode mode = LstmInputMode::flat_single_step,
                               ModelVariant variant = ModelVariant::cnn_lstm) {
  ModelConfig cfg;
  cfg.input_channels = 3;
  cfg.input_length = 8;
  cfg.conv1_out = 4;
  cfg.conv2_out = 6;
  cfg.lstm_hidden = 5;
  cfg.fc_hidden = 7;
  cfg.lstm_input_mode = mode;
  cfg.variant = variant;
  return cfg;
}

/// Whole network, batch 2, loss = softmax cross-entropy.
inline NamedReport model(std::uint64_t seed, const ModelConfig& cfg, double tol, double step = kStep) {
  Rng rng(seed ^ 0x5eedULL);
  ModelWeights w = build_model(cfg, seed);
  // Non-zero biases and peepholes so every parameter sees a generic gradient.
  w.for_each([&](const std::string& name, Tensor& t) {
    const std::string param = name.substr(name.find('.') + 1);
    if (param == "b" || param.starts_with("b_") || param.starts_with("Z_"))
      for (double& v : t.data()) v = rng.uniform(-0.5, 0.5);
  });
  Tensor x = detail::random_tensor(rng, {2, cfg.input_channels, cfg.input_length});
  std::vector<int> labels = {static_cast<int>(rng.below(cfg.classes)), static_cast<int>(rng.below(cfg.classes))};
  const auto fwd = forward_train(w, cfg, x);
  const auto lr = softmax_cross_entropy(fwd.logits, labels);
  ModelWeights g = backward(w, cfg, fwd.cache, lr.dlogits);
  auto loss = [&] { return softmax_cross_entropy(forward(w, cfg, x), labels).loss; };
  std::vector<CheckedParam> params;
  std::vector<std::pair<std::string, Tensor*>> grads;
  g.for_each([&](const std::string& name, Tensor& t) { grads.emplace_back(name, &t); });
  std::size_t i = 0;
  w.for_each([&](const std::string& name, Tensor& t) { params.push_back({name, &t, grads[i++].second}); });
  std::string label = "model(" + to_string(cfg.variant);
  if (cfg.variant == ModelVariant::cnn_lstm) label += ", " + to_string(cfg.lstm_input_mode);
  label += ", L=" + std::to_string(cfg.input_length) + ")";
  return {label, finite_diff_gradcheck(loss, params, step, tol)};
}

/// Every layer check for one seed, plus the default network and its CNN-only
/// ablation at the tiny configuration.
inline std::vector<NamedReport> run_all(std::uint64_t seed, double layer_tol = kLayerTol,
                                        double model_tol = kModelTol) {
  std::vector<NamedReport> out;
  out.push_back(conv1d(seed, layer_tol));
  out.push_back(relu(seed, layer_tol));
  out.push_back(maxpool(seed, layer_tol));
  out.push_back(linear(seed, layer_tol));
  out.push_back(lstm_cell(seed, true, layer_tol));
  out.push_back(lstm_cell(seed, false, layer_tol));
  out.push_back(lstm_layer(seed, layer_tol));
  out.push_back(cross_entropy(seed, layer_tol));
  out.push_back(model(seed, tiny_config(), model_tol));
  out.push_back(model(seed, tiny_config(LstmInputMode::flat_single_step, ModelVariant::cnn_only), layer_tol));
  return out;
}

}  // namespace fnwl::gradcheck_suite

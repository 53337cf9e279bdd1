// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fnwl/layers/conv1d.hpp"
#include "fnwl/layers/linear.hpp"
#include "fnwl/layers/lstm.hpp"
#include "fnwl/layers/maxpool1d.hpp"
#include "fnwl/layers/relu.hpp"
#include "fnwl/random.hpp"
#include "fnwl/tensor.hpp"

namespace fnwl {

enum class LstmInputMode { flat_single_step, sequence };
enum class ModelVariant { cnn_lstm, cnn_only };

inline std::string to_string(LstmInputMode m) {
  return m == LstmInputMode::flat_single_step ? "flat_single_step" : "sequence_T_by_32";
}
inline std::string to_string(ModelVariant v) { return v == ModelVariant::cnn_lstm ? "cnn_lstm" : "cnn_only"; }

/// Layer stack geometry. Defaults reproduce the 8-channel, 150-sample,
/// 4-class network: conv(8->16) relu pool, conv(16->32) relu pool, flatten,
/// two 64-unit LSTMs, linear(64->128) relu, linear(128->4).
struct ModelConfig {
  std::size_t input_channels = 8;
  std::size_t input_length = 150;
  std::size_t conv1_out = 16;
  std::size_t conv2_out = 32;
  std::size_t kernel = 3;
  std::size_t pool = 2;
  std::size_t lstm_hidden = 64;
  std::size_t lstm_layers = 2;
  std::size_t fc_hidden = 128;
  std::size_t classes = 4;
  bool peephole = true;
  LstmInputMode lstm_input_mode = LstmInputMode::flat_single_step;
  ModelVariant variant = ModelVariant::cnn_lstm;

  std::size_t pooled_length() const { return input_length / pool / pool; }
  std::size_t flat_features() const { return conv2_out * pooled_length(); }
  std::size_t lstm_input_size() const {
    return lstm_input_mode == LstmInputMode::flat_single_step ? flat_features() : conv2_out;
  }
  std::size_t lstm_steps() const {
    return lstm_input_mode == LstmInputMode::flat_single_step ? 1 : pooled_length();
  }
  std::size_t fc1_input_size() const { return variant == ModelVariant::cnn_lstm ? lstm_hidden : flat_features(); }

  void validate() const {
    auto need = [](bool ok, const std::string& msg) {
      if (!ok) throw ConfigError("invalid model config: " + msg);
    };
    need(input_channels >= 1, "input_channels must be >= 1");
    need(kernel >= 1 && kernel % 2 == 1, "kernel must be odd for same padding");
    need(pool >= 1, "pool must be >= 1");
    need(pooled_length() >= 1, "input_length " + std::to_string(input_length) +
                                   " leaves an empty output after two pooling stages");
    need(input_length >= 4 || pool == 1, "input_length must be >= 4");
    need(conv1_out >= 1 && conv2_out >= 1 && fc_hidden >= 1, "layer widths must be positive");
    need(classes >= 2, "classes must be >= 2");
    if (variant == ModelVariant::cnn_lstm) {
      need(lstm_hidden >= 1, "lstm_hidden must be positive");
      need(lstm_layers >= 1, "cnn_lstm needs at least one LSTM layer");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Named parameter tensors of the network. Names are
/// conv1.{W,b} conv2.{W,b} lstm<n>.{U_*,V_*,Z_*,b_*} fc1.{W,b} fc2.{W,b}.
struct ModelWeights {
  ConvParams conv1, conv2;
  std::vector<LstmParams> lstm;
  LinearParams fc1, fc2;

  template <typename Self, typename F>
  static void visit(Self& self, F&& f) {
    f(std::string("conv1.W"), self.conv1.weight);
    f(std::string("conv1.b"), self.conv1.bias);
    f(std::string("conv2.W"), self.conv2.weight);
    f(std::string("conv2.b"), self.conv2.bias);
    for (std::size_t l = 0; l < self.lstm.size(); ++l) {
      const std::string prefix = "lstm" + std::to_string(l + 1) + ".";
      LstmParams::visit(self.lstm[l], [&](const std::string& n, auto& t) { f(prefix + n, t); });
    }
    f(std::string("fc1.W"), self.fc1.weight);
    f(std::string("fc1.b"), self.fc1.bias);
    f(std::string("fc2.W"), self.fc2.weight);
    f(std::string("fc2.b"), self.fc2.bias);
  }
  /// Visits (name, tensor) in canonical order.
  template <typename F>
  void for_each(F&& f) { visit(*this, f); }
  template <typename F>
  void for_each(F&& f) const { visit(*this, f); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Tensor& t) { n += t.size(); });
    return n;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for_each([&](const std::string& n, const Tensor&) { out.push_back(n); });
    return out;
  }

  Tensor* find(const std::string& name) {
    Tensor* hit = nullptr;
    for_each([&](const std::string& n, Tensor& t) {
      if (n == name) hit = &t;
    });
    return hit;
  }

  friend bool operator==(const ModelWeights& a, const ModelWeights& b) {
    std::vector<const Tensor*> ta, tb;
    std::vector<std::string> na, nb;
    a.for_each([&](const std::string& n, const Tensor& t) { na.push_back(n); ta.push_back(&t); });
    b.for_each([&](const std::string& n, const Tensor& t) { nb.push_back(n); tb.push_back(&t); });
    if (na != nb) return false;
    for (std::size_t i = 0; i < ta.size(); ++i)
      if (!(*ta[i] == *tb[i])) return false;
    return true;
  }
};

/// All-zero weights with the shapes `cfg` implies.
inline ModelWeights zero_weights(const ModelConfig& cfg) {
  cfg.validate();
  ModelWeights w;
  w.conv1 = ConvParams::same(cfg.input_channels, cfg.conv1_out, cfg.kernel);
  w.conv2 = ConvParams::same(cfg.conv1_out, cfg.conv2_out, cfg.kernel);
  if (cfg.variant == ModelVariant::cnn_lstm) {
    for (std::size_t l = 0; l < cfg.lstm_layers; ++l)
      w.lstm.push_back(LstmParams::zeros(l == 0 ? cfg.lstm_input_size() : cfg.lstm_hidden, cfg.lstm_hidden,
                                         cfg.peephole));
  }
  w.fc1 = LinearParams::zeros(cfg.fc1_input_size(), cfg.fc_hidden);
  w.fc2 = LinearParams::zeros(cfg.fc_hidden, cfg.classes);
  return w;
}

/// Seeded initialisation. Tensors are drawn in canonical name order from a
/// single Rng(seed):
///   conv / linear weights and LSTM input maps U_*: U(+-sqrt(6/(fan_in+fan_out)))
///   LSTM recurrent maps V_*: U(+-sqrt(1/hidden))
///   biases and peepholes: 0, except the forget bias b_f = 1 (no draws).
inline ModelWeights build_model(const ModelConfig& cfg, std::uint64_t seed) {
  ModelWeights w = zero_weights(cfg);
  Rng rng(seed);
  auto fill_uniform = [&](Tensor& t, double bound) {
    for (double& v : t.data()) v = rng.uniform(-bound, bound);
  };
  auto glorot = [](double fan_in, double fan_out) { return std::sqrt(6.0 / (fan_in + fan_out)); };
  w.for_each([&](const std::string& name, Tensor& t) {
    const auto dot = name.find('.');
    const std::string layer = name.substr(0, dot), param = name.substr(dot + 1);
    if (layer.starts_with("conv") && param == "W") {
      const double k = static_cast<double>(t.dim(2));
      fill_uniform(t, glorot(static_cast<double>(t.dim(1)) * k, static_cast<double>(t.dim(0)) * k));
    } else if (layer.starts_with("fc") && param == "W") {
      fill_uniform(t, glorot(static_cast<double>(t.dim(1)), static_cast<double>(t.dim(0))));
    } else if (param.starts_with("U_")) {
      fill_uniform(t, glorot(static_cast<double>(t.dim(1)), static_cast<double>(t.dim(0))));
    } else if (param.starts_with("V_")) {
      fill_uniform(t, std::sqrt(1.0 / static_cast<double>(t.dim(0))));
    } else if (param == "b_f") {
      t.fill(1.0);
    }
  });
  return w;
}

/// CNN-only ablation: the same stack with the LSTM rows removed.
inline ModelWeights build_cnn_only(ModelConfig cfg, std::uint64_t seed) {
  cfg.variant = ModelVariant::cnn_only;
  return build_model(cfg, seed);
}

/// One row of the layer trace: layer kind with input and output shapes.
struct LayerTrace {
  std::string layer;
  Shape input;
  Shape output;
};

/// Intermediates kept by a forward pass for backward.
struct ForwardCache {
  Tensor x;
  Tensor conv1_out;
  PoolResult pool1;
  Tensor conv2_out;
  PoolResult pool2;
  std::vector<LstmLayerCache> lstm;
  Tensor fc1_in;
  Tensor fc1_out;
  Tensor fc2_in;
  std::vector<LayerTrace> trace;
};

struct ForwardResult {
  Tensor logits;
  ForwardCache cache;
};

namespace detail {

inline void check_model_input(const ModelConfig& cfg, const Tensor& x) {
  require_rank(x, 3, "model input");
  if (x.dim(1) != cfg.input_channels || x.dim(2) != cfg.input_length)
    throw DimensionError("model input " + to_string(x.shape()) + " does not match configured (BS, " +
                         std::to_string(cfg.input_channels) + ", " + std::to_string(cfg.input_length) + ")");
}

/// [BS, C, T] -> [BS, T, C]
inline Tensor channels_to_steps(const Tensor& pooled) {
  const std::size_t batch = pooled.dim(0), ch = pooled.dim(1), steps = pooled.dim(2);
  Tensor seq({batch, steps, ch});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t t = 0; t < steps; ++t) seq[(b * steps + t) * ch + c] = pooled[(b * ch + c) * steps + t];
  return seq;
}

/// [BS, T, C] -> [BS, C, T]
inline Tensor steps_to_channels(const Tensor& seq) {
  const std::size_t batch = seq.dim(0), steps = seq.dim(1), ch = seq.dim(2);
  Tensor pooled({batch, ch, steps});
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t t = 0; t < steps; ++t) pooled[(b * ch + c) * steps + t] = seq[(b * steps + t) * ch + c];
  return pooled;
}

}  // namespace detail

/// conv1 relu pool, conv2 relu pool, flatten, [lstm...], fc1 relu, fc2.
/// Returns logits [BS, classes] and the cache with a per-layer shape trace.
inline ForwardResult forward_train(const ModelWeights& w, const ModelConfig& cfg, const Tensor& x) {
  cfg.validate();
  detail::check_model_input(cfg, x);
  const std::size_t batch = x.dim(0);
  if ((cfg.variant == ModelVariant::cnn_lstm) != !w.lstm.empty())
    throw DimensionError("weights do not match model variant " + to_string(cfg.variant));

  ForwardResult r;
  auto& k = r.cache;
  auto& trace = k.trace;
  k.x = x;

  k.conv1_out = conv1d_forward(x, w.conv1);
  trace.push_back({"Conv1d", x.shape(), k.conv1_out.shape()});
  Tensor a1 = relu(k.conv1_out);
  trace.push_back({"Relu", k.conv1_out.shape(), a1.shape()});
  k.pool1 = maxpool1d(a1, cfg.pool);
  trace.push_back({"MaxPool1d", a1.shape(), k.pool1.output.shape()});

  k.conv2_out = conv1d_forward(k.pool1.output, w.conv2);
  trace.push_back({"Conv1d", k.pool1.output.shape(), k.conv2_out.shape()});
  Tensor a2 = relu(k.conv2_out);
  trace.push_back({"Relu", k.conv2_out.shape(), a2.shape()});
  k.pool2 = maxpool1d(a2, cfg.pool);
  trace.push_back({"MaxPool1d", a2.shape(), k.pool2.output.shape()});

  Tensor flat = k.pool2.output.reshaped({batch, cfg.flat_features()});
  trace.push_back({"Flatten", k.pool2.output.shape(), flat.shape()});

  Tensor features = flat;
  if (cfg.variant == ModelVariant::cnn_lstm) {
    for (std::size_t l = 0; l < w.lstm.size(); ++l) {
      Tensor seq;
      if (l == 0 && cfg.lstm_input_mode == LstmInputMode::sequence)
        seq = detail::channels_to_steps(k.pool2.output);
      else
        seq = features.reshaped({batch, 1, features.dim(1)});
      auto out = lstm_layer_forward(seq, w.lstm[l]);
      const Shape in_shape = (l == 0 && cfg.lstm_input_mode == LstmInputMode::sequence) ? seq.shape() : features.shape();
      trace.push_back({"LSTM", in_shape, out.h.shape()});
      k.lstm.push_back(std::move(out.cache));
      features = std::move(out.h);
    }
  }

  k.fc1_in = features;
  k.fc1_out = linear_forward(features, w.fc1);
  trace.push_back({"Linear", features.shape(), k.fc1_out.shape()});
  k.fc2_in = relu(k.fc1_out);
  trace.push_back({"Relu", k.fc1_out.shape(), k.fc2_in.shape()});
  r.logits = linear_forward(k.fc2_in, w.fc2);
  trace.push_back({"Linear", k.fc2_in.shape(), r.logits.shape()});
  return r;
}

inline Tensor forward(const ModelWeights& w, const ModelConfig& cfg, const Tensor& x) {
  return forward_train(w, cfg, x).logits;
}

inline Tensor forward_cnn_only(const ModelWeights& w, ModelConfig cfg, const Tensor& x) {
  cfg.variant = ModelVariant::cnn_only;
  return forward(w, cfg, x);
}

/// Gradients of every parameter, in a ModelWeights-shaped container, for the
/// upstream logits gradient `dlogits`.
inline ModelWeights backward(const ModelWeights& w, const ModelConfig& cfg, const ForwardCache& k,
                             const Tensor& dlogits) {
  ModelWeights g = zero_weights(cfg);
  const std::size_t batch = k.x.dim(0);

  auto take = [](const GradBundle& b, ConvParams& dst) {
    dst.weight = b.param("W");
    dst.bias = b.param("b");
  };
  auto take_linear = [](const GradBundle& b, LinearParams& dst) {
    dst.weight = b.param("W");
    dst.bias = b.param("b");
  };

  GradBundle fc2 = linear_backward(k.fc2_in, w.fc2, dlogits);
  take_linear(fc2, g.fc2);
  Tensor d = relu_backward(k.fc1_out, fc2.input);
  GradBundle fc1 = linear_backward(k.fc1_in, w.fc1, d);
  take_linear(fc1, g.fc1);
  d = std::move(fc1.input);

  for (std::size_t l = w.lstm.size(); l-- > 0;) {
    GradBundle lg = lstm_layer_backward(k.lstm[l], d, w.lstm[l]);
    g.lstm[l].for_each([&](const std::string& name, Tensor& t) { t = lg.param(name); });
    if (l == 0 && cfg.lstm_input_mode == LstmInputMode::sequence)
      d = detail::steps_to_channels(lg.input).reshaped({batch, cfg.flat_features()});
    else
      d = lg.input.reshaped({batch, lg.input.dim(2)});
  }

  Tensor dpool2 = d.reshaped(k.pool2.output.shape());
  Tensor da2 = maxpool1d_backward(k.pool2, dpool2);
  Tensor dz2 = relu_backward(k.conv2_out, da2);
  GradBundle c2 = conv1d_backward(k.pool1.output, w.conv2, dz2);
  take(c2, g.conv2);
  Tensor da1 = maxpool1d_backward(k.pool1, c2.input);
  Tensor dz1 = relu_backward(k.conv1_out, da1);
  GradBundle c1 = conv1d_backward(k.x, w.conv1, dz1);
  take(c1, g.conv1);
  return g;
}

/// Row-wise argmax of logits; ties resolve to the lowest class index.
inline std::vector<int> argmax_rows(const Tensor& logits) {
  require_rank(logits, 2, "logits");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  std::vector<int> out(batch);
  for (std::size_t b = 0; b < batch; ++b) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < classes; ++c)
      if (logits[b * classes + c] > logits[b * classes + best]) best = c;
    out[b] = static_cast<int>(best);
  }
  return out;
}

inline std::vector<int> predict_labels(const ModelWeights& w, const ModelConfig& cfg, const Tensor& x) {
  return argmax_rows(forward(w, cfg, x));
}

}  // namespace fnwl

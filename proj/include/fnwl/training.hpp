// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fnwl/error.hpp"
#include "fnwl/loss.hpp"
#include "fnwl/model.hpp"
#include "fnwl/preprocessing/windows.hpp"
#include "fnwl/random.hpp"
#include "fnwl/version.hpp"

namespace fnwl {

struct TrainConfig {
  double learning_rate = 0.001;
  std::size_t epochs = 1000;
  std::size_t batch_size = 64;
  std::uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool shuffle = true;
  /// Global L2 gradient-norm ceiling; off when unset.
  std::optional<double> clip_norm;
  /// Off makes the `seconds` column zero so logs compare bit-for-bit.
  bool record_time = true;

  void validate() const {
    auto need = [](bool ok, const std::string& msg) {
      if (!ok) throw ConfigError("invalid training config: " + msg);
    };
    need(std::isfinite(learning_rate) && learning_rate >= 0.0, "learning_rate must be finite and >= 0");
    need(beta1 >= 0.0 && beta1 < 1.0, "beta1 must lie in [0, 1)");
    need(beta2 >= 0.0 && beta2 < 1.0, "beta2 must lie in [0, 1)");
    need(epsilon > 0.0 && std::isfinite(epsilon), "epsilon must be positive");
    need(batch_size >= 1, "batch_size must be >= 1");
    need(!clip_norm || *clip_norm > 0.0, "clip_norm must be positive");
  }
};

/// Adam moments in the parameter visiting order; empty until the first step.
struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::uint64_t step = 0;
};

/// One Adam update over every tensor visited by `params.for_each`, paired with
/// the same-named tensor in `grads`. Throws NumericError naming the first
/// non-finite gradient; parameters are untouched in that case.
template <typename Params>
void adam_step(Params& params, const Params& grads, AdamState& state, const TrainConfig& cfg) {
  std::vector<std::pair<std::string, Tensor*>> p;
  std::vector<const Tensor*> g;
  params.for_each([&](const std::string& name, Tensor& t) { p.emplace_back(name, &t); });
  grads.for_each([&](const std::string&, const Tensor& t) { g.push_back(&t); });
  if (p.size() != g.size())
    throw DimensionError("adam_step: " + std::to_string(p.size()) + " parameters but " + std::to_string(g.size()) +
                         " gradients");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i].second->shape() != g[i]->shape())
      throw DimensionError("adam_step: gradient of " + p[i].first + " has shape " + to_string(g[i]->shape()) +
                           ", parameter has " + to_string(p[i].second->shape()));
    const auto values = g[i]->data();
    for (std::size_t k = 0; k < values.size(); ++k)
      if (!std::isfinite(values[k]))
        throw NumericError("non-finite gradient in " + p[i].first + " at flat index " + std::to_string(k));
  }
  if (state.first_moment.empty()) {
    for (const auto& [name, t] : p) {
      state.first_moment.emplace_back(t->shape());
      state.second_moment.emplace_back(t->shape());
    }
  }
  if (state.first_moment.size() != p.size())
    throw DimensionError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                         " tensors, model has " + std::to_string(p.size()));

  double scale = 1.0;
  if (cfg.clip_norm) {
    double sq = 0.0;
    for (const Tensor* t : g)
      for (double v : t->data()) sq += v * v;
    const double norm = std::sqrt(sq);
    if (norm > *cfg.clip_norm) scale = *cfg.clip_norm / norm;
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correct1 = 1.0 - std::pow(cfg.beta1, t);
  const double correct2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto theta = p[i].second->data();
    const auto grad = g[i]->data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    if (m.size() != theta.size())
      throw DimensionError("adam_step: moment shape mismatch for " + p[i].first);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double gk = grad[k] * scale;
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
      const double m_hat = m[k] / correct1;
      const double v_hat = v[k] / correct2;
      theta[k] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

// ---------------------------------------------------------------- splitting

enum class SplitMode { random, by_subject };

struct DatasetSplit {
  WindowDataset train;
  WindowDataset test;
  std::vector<std::size_t> train_indices;  // ascending
  std::vector<std::size_t> test_indices;   // ascending
};

/// random: a seeded shuffle of window indices, the first round(f * N) go to
/// test. by_subject: a seeded shuffle of distinct subject ids (in order of
/// first appearance), the first round(f * S) subjects go to test. Both sides
/// are kept non-empty.
inline DatasetSplit split_dataset(const WindowDataset& d, double test_fraction, std::uint64_t seed,
                                  SplitMode mode = SplitMode::random) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw SplitError("test fraction must lie strictly between 0 and 1, got " + std::to_string(test_fraction));
  if (d.subjects.size() != d.size()) throw DimensionError("dataset subject ids do not match window count");
  auto take = [](std::size_t total, double fraction) {
    const auto n = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(total)));
    return std::clamp<std::size_t>(n, 1, total - 1);
  };
  Rng rng(seed);
  std::vector<bool> in_test(d.size(), false);
  if (mode == SplitMode::random) {
    if (d.size() < 2) throw SplitError("a split needs at least 2 windows, dataset has " + std::to_string(d.size()));
    std::vector<std::size_t> order(d.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (std::size_t i = 0; i < take(d.size(), test_fraction); ++i) in_test[order[i]] = true;
  } else {
    std::vector<std::string> subjects;
    for (const auto& s : d.subjects)
      if (std::find(subjects.begin(), subjects.end(), s) == subjects.end()) subjects.push_back(s);
    if (subjects.size() < 2)
      throw SplitError("by_subject split needs at least 2 subjects, dataset has " + std::to_string(subjects.size()));
    rng.shuffle(subjects);
    subjects.resize(take(subjects.size(), test_fraction));
    for (std::size_t i = 0; i < d.size(); ++i)
      in_test[i] = std::find(subjects.begin(), subjects.end(), d.subjects[i]) != subjects.end();
  }
  DatasetSplit out;
  for (std::size_t i = 0; i < d.size(); ++i) (in_test[i] ? out.test_indices : out.train_indices).push_back(i);
  out.train = d.subset(out.train_indices);
  out.test = d.subset(out.test_indices);
  return out;
}

// ---------------------------------------------------------------- training

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double test_accuracy = std::nan("");  // NaN without a test set
  double seconds = 0.0;
};

using TrainLog = std::vector<EpochRecord>;

/// Class predictions for every window, evaluated in chunks.
inline std::vector<int> predict_dataset(const ModelWeights& w, const ModelConfig& cfg, const WindowDataset& d,
                                        std::size_t chunk = 256) {
  std::vector<int> out;
  out.reserve(d.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < d.size(); start += chunk) {
    idx.resize(std::min(chunk, d.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto p = predict_labels(w, cfg, d.batch(idx));
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

struct ScoredPredictions {
  std::vector<int> labels;
  std::vector<double> probabilities;  // N x K row-major softmax
};

inline ScoredPredictions predict_scored(const ModelWeights& w, const ModelConfig& cfg, const WindowDataset& d,
                                        std::size_t chunk = 256) {
  ScoredPredictions out;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < d.size(); start += chunk) {
    idx.resize(std::min(chunk, d.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const Tensor logits = forward(w, cfg, d.batch(idx));
    const auto labels = argmax_rows(logits);
    const Tensor p = softmax(logits);
    out.labels.insert(out.labels.end(), labels.begin(), labels.end());
    out.probabilities.insert(out.probabilities.end(), p.data().begin(), p.data().end());
  }
  return out;
}

inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size())
    throw DimensionError("accuracy: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(truth.size()) + " labels");
  if (truth.empty()) return std::nan("");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

struct TrainResult {
  ModelWeights weights;
  TrainLog log;
};

/// Shuffle stream seed; kept apart from the initialisation stream.
inline std::uint64_t shuffle_seed(std::uint64_t seed) { return seed ^ 0x9e3779b97f4a7c15ULL; }

/// Mini-batch Adam on softmax cross-entropy. Each epoch reshuffles the window
/// order (when enabled) and visits every window once, the last batch possibly
/// partial. Train loss and accuracy are means over the epoch's batches as seen
/// before each update; test accuracy is measured after the epoch.
inline TrainResult train(const ModelConfig& model_cfg, ModelWeights weights, const WindowDataset& train_set,
                         const WindowDataset* test_set, const TrainConfig& cfg,
                         const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  model_cfg.validate();
  if (train_set.size() == 0) throw LengthError("training set is empty");
  train_set.validate(static_cast<int>(model_cfg.classes));
  if (test_set) test_set->validate(static_cast<int>(model_cfg.classes));

  TrainResult result{std::move(weights), {}};
  AdamState adam;
  Rng rng(shuffle_seed(cfg.seed));
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  const auto n = static_cast<double>(train_set.size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    if (cfg.shuffle) rng.shuffle(order);
    double loss_sum = 0.0;
    std::size_t hits = 0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_no) {
      const std::span<const std::size_t> idx(order.data() + start, std::min(cfg.batch_size, order.size() - start));
      const auto labels = train_set.batch_labels(idx);
      const auto fwd = forward_train(result.weights, model_cfg, train_set.batch(idx));
      const auto loss = softmax_cross_entropy(fwd.logits, labels);
      if (!std::isfinite(loss.loss))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no + 1));
      loss_sum += loss.loss * static_cast<double>(idx.size());
      const auto predicted = argmax_rows(fwd.logits);
      for (std::size_t b = 0; b < idx.size(); ++b) hits += predicted[b] == labels[b];
      const auto grads = backward(result.weights, model_cfg, fwd.cache, loss.dlogits);
      try {
        adam_step(result.weights, grads, adam, cfg);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(batch_no + 1));
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / n;
    rec.train_accuracy = static_cast<double>(hits) / n;
    if (test_set && test_set->size() > 0)
      rec.test_accuracy = accuracy(predict_dataset(result.weights, model_cfg, *test_set), test_set->labels);
    if (cfg.record_time)
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

/// CSV with a leading `#` comment line, then `epoch,train_loss,train_acc,test_acc,seconds`.
/// `config`, when given, is written as a second `# config ` comment line.
inline void write_train_log(std::ostream& out, const TrainLog& log, const std::string& config = {}) {
  out << "# " << kToolName << ' ' << kVersion << " training log\n";
  if (!config.empty()) out << "# config " << config << '\n';
  out << "epoch,train_loss,train_acc,test_acc,seconds\n";
  std::array<char, 64> buf{};
  auto put = [&](double v) {
    if (std::isnan(v)) {
      out << "nan";
      return;
    }
    const auto r = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    out.write(buf.data(), r.ptr - buf.data());
  };
  for (const auto& r : log) {
    out << r.epoch << ',';
    put(r.train_loss);
    out << ',';
    put(r.train_accuracy);
    out << ',';
    put(r.test_accuracy);
    out << ',';
    put(r.seconds);
    out << '\n';
  }
}

inline void write_train_log(const std::filesystem::path& path, const TrainLog& log, const std::string& config = {}) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_train_log(out, log, config);
}

}  // namespace fnwl

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "fnwl/dataio/synth.hpp"
#include "fnwl/model_io.hpp"
#include "fnwl/training.hpp"

using namespace fnwl;

namespace {

struct ScalarParam {
  Tensor theta = Tensor({1});
  template <typename F>
  void for_each(F&& f) {
    f(std::string("theta"), theta);
  }
  template <typename F>
  void for_each(F&& f) const {
    f(std::string("theta"), theta);
  }
};

ScalarParam scalar(double v) {
  ScalarParam p;
  p.theta[0] = v;
  return p;
}

// Tiny geometry so end-to-end tests run in seconds.
ModelConfig small_model(std::size_t classes = 4, std::size_t channels = 8, std::size_t length = 32) {
  ModelConfig cfg;
  cfg.input_channels = channels;
  cfg.input_length = length;
  cfg.conv1_out = 4;
  cfg.conv2_out = 8;
  cfg.lstm_hidden = 16;
  cfg.fc_hidden = 16;
  cfg.classes = classes;
  return cfg;
}

WindowDataset subject_dataset(std::size_t subjects, std::size_t per_subject, std::uint64_t seed) {
  Rng rng(seed);
  WindowDataset d;
  d.channels = 1;
  d.length = 2;
  std::vector<double> w(2);
  for (std::size_t i = 0; i < subjects * per_subject; ++i) {
    w = {rng.normal(), rng.normal()};
    d.push_back(w, static_cast<int>(rng.below(4)), "subj" + std::to_string(rng.below(subjects)));
  }
  return d;
}

// Two classes split by the sign of the mean of channel 0.
WindowDataset separable_toy(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  WindowDataset d;
  d.channels = 2;
  d.length = 16;
  d.sample_rate_hz = 5.2;
  std::vector<double> w(d.window_size());
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double offset = label == 0 ? -1.0 : 1.0;
    for (std::size_t t = 0; t < 16; ++t) {
      w[t] = offset + 0.3 * rng.normal();
      w[16 + t] = rng.normal();
    }
    d.push_back(w, label, "toy");
  }
  return d;
}

SynthConfig small_synth() {
  SynthConfig s;
  s.windows_per_class = 40;
  s.length = 32;
  s.bandpass = false;
  return s;
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  TrainConfig cfg;
  auto p = scalar(1.0);
  auto g = scalar(0.5);
  AdamState st;
  adam_step(p, g, st, cfg);
  EXPECT_NEAR(p.theta[0] - 1.0, -0.001 * 0.5 / (0.5 + 1e-8), 1e-15);
  EXPECT_EQ(st.step, 1u);
  EXPECT_DOUBLE_EQ(st.first_moment[0][0], 0.05);
  EXPECT_DOUBLE_EQ(st.second_moment[0][0], 0.001 * 0.25);
}

TEST(Adam, ZeroGradientLeavesParametersAndDecaysMoments) {
  TrainConfig cfg;
  auto p = scalar(2.0);
  AdamState st;
  adam_step(p, scalar(1.0), st, cfg);
  const double before = p.theta[0];
  const double m = st.first_moment[0][0], v = st.second_moment[0][0];
  auto q = p;
  adam_step(q, scalar(0.0), st, cfg);
  EXPECT_DOUBLE_EQ(st.first_moment[0][0], 0.9 * m);
  EXPECT_DOUBLE_EQ(st.second_moment[0][0], 0.999 * v);
  // zero gradient with nonzero momentum still moves, so check a fresh state
  AdamState fresh;
  auto r = scalar(before);
  adam_step(r, scalar(0.0), fresh, cfg);
  EXPECT_EQ(r.theta[0], before);
}

TEST(Adam, QuadraticSimulation) {
  // independent scalar recursion
  double theta_ref = 1.0, m = 0.0, v = 0.0;
  std::vector<double> ref;
  for (int t = 1; t <= 100; ++t) {
    const double g = 2.0 * theta_ref;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    theta_ref -= 0.001 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
    ref.push_back(theta_ref);
  }
  TrainConfig cfg;
  auto p = scalar(1.0);
  AdamState st;
  double previous = 1.0;
  for (int t = 1; t <= 100; ++t) {
    adam_step(p, scalar(2.0 * p.theta[0]), st, cfg);
    EXPECT_LT(std::abs(p.theta[0]), std::abs(previous)) << "step " << t;
    EXPECT_NEAR(p.theta[0], ref[static_cast<std::size_t>(t - 1)], 1e-15);
    previous = p.theta[0];
  }
  EXPECT_LT(std::abs(p.theta[0]), 0.95);
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  const ModelConfig mc = small_model();
  auto w = build_model(mc, 3);
  const auto original = w;
  auto g = build_model(mc, 4);
  AdamState st;
  for (int i = 0; i < 3; ++i) adam_step(w, g, st, cfg);
  EXPECT_TRUE(w == original);
  for (const auto& v : st.second_moment)
    for (double x : v.data()) EXPECT_GE(x, 0.0);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  const ModelConfig mc = small_model();
  auto w = build_model(mc, 3);
  const auto original = w;
  auto g = zero_weights(mc);
  g.find("fc1.b")->data()[2] = std::nan("");
  AdamState st;
  try {
    adam_step(w, g, st, TrainConfig{});
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("fc1.b"), std::string::npos) << e.what();
  }
  EXPECT_TRUE(w == original);
  EXPECT_EQ(st.step, 0u);
}

TEST(Adam, ClipBoundsTheEffectiveGradient) {
  TrainConfig cfg;
  cfg.clip_norm = 1.0;
  auto p = scalar(0.0);
  AdamState st;
  adam_step(p, scalar(1000.0), st, cfg);
  EXPECT_DOUBLE_EQ(st.first_moment[0][0], 0.1);
}

TEST(Adam, InvalidConfigRejected) {
  TrainConfig cfg;
  cfg.beta1 = 1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = {};
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Split, RandomSizesAndDeterminism) {
  const auto d = subject_dataset(3, 34, 1);
  ASSERT_EQ(d.size(), 102u);
  std::vector<std::size_t> first_hundred(100);
  std::iota(first_hundred.begin(), first_hundred.end(), 0);
  const auto hundred = d.subset(first_hundred);
  const auto a = split_dataset(hundred, 0.2, 9);
  EXPECT_EQ(a.train.size(), 80u);
  EXPECT_EQ(a.test.size(), 20u);
  const auto b = split_dataset(hundred, 0.2, 9);
  EXPECT_EQ(a.test_indices, b.test_indices);
  EXPECT_NE(split_dataset(hundred, 0.2, 10).test_indices, a.test_indices);

  std::vector<std::size_t> all = a.train_indices;
  all.insert(all.end(), a.test_indices.begin(), a.test_indices.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_EQ(all[i], i);
  EXPECT_EQ(a.test.values, hundred.subset(a.test_indices).values);
}

TEST(Split, BySubjectMembershipAudit) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto d = subject_dataset(5, 40, 100 + seed);
    const auto s = split_dataset(d, 0.2, seed, SplitMode::by_subject);
    std::set<std::string> train_subjects(s.train.subjects.begin(), s.train.subjects.end());
    std::set<std::string> test_subjects(s.test.subjects.begin(), s.test.subjects.end());
    for (const auto& subject : test_subjects) EXPECT_EQ(train_subjects.count(subject), 0u) << subject;
    EXPECT_EQ(test_subjects.size(), 1u);
    EXPECT_EQ(train_subjects.size() + test_subjects.size(), 5u);
    EXPECT_EQ(s.train.size() + s.test.size(), d.size());
  }
}

TEST(Split, Errors) {
  const auto d = subject_dataset(1, 10, 2);
  EXPECT_THROW(split_dataset(d, 0.2, 1, SplitMode::by_subject), SplitError);
  EXPECT_THROW(split_dataset(d, 0.0, 1), SplitError);
  EXPECT_THROW(split_dataset(d, 1.0, 1), SplitError);
  EXPECT_NO_THROW(split_dataset(d, 0.01, 1));
}

TEST(Train, ZeroEpochsReturnsInitialWeights) {
  const auto mc = small_model(4, 8, 32);
  const auto data = synth_generate(small_synth());
  const auto init = build_model(mc, 5);
  TrainConfig cfg;
  cfg.epochs = 0;
  const auto r = train(mc, init, data, nullptr, cfg);
  EXPECT_TRUE(r.weights == init);
  EXPECT_TRUE(r.log.empty());
}

TEST(Train, SeparableTwoClassToyReachesFullTrainAccuracy) {
  const auto mc = small_model(2, 2, 16);
  const auto data = separable_toy(64, 6);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 16;
  const auto r = train(mc, build_model(mc, 7), data, nullptr, cfg);
  ASSERT_EQ(r.log.size(), 50u);
  EXPECT_EQ(accuracy(predict_dataset(r.weights, mc, data), data.labels), 1.0);
  EXPECT_TRUE(std::isnan(r.log.back().test_accuracy));
}

TEST(Train, PartialFinalBatchIsUsed) {
  // 10 windows, batch 4: a run with the last two windows removed must differ
  const auto mc = small_model(2, 2, 16);
  const auto data = separable_toy(10, 8);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.shuffle = false;
  const auto full = train(mc, build_model(mc, 1), data, nullptr, cfg);
  const auto trimmed =
      train(mc, build_model(mc, 1), data.subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7}), nullptr, cfg);
  EXPECT_FALSE(full.weights == trimmed.weights);
}

TEST(Train, BitReproducible) {
  const auto mc = small_model();
  const auto data = synth_generate(small_synth());
  const auto split = split_dataset(data, 0.25, 1);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 16;
  cfg.record_time = false;
  const auto a = train(mc, build_model(mc, 2), split.train, &split.test, cfg);
  const auto b = train(mc, build_model(mc, 2), split.train, &split.test, cfg);
  EXPECT_TRUE(a.weights == b.weights);
  EXPECT_EQ(encode_weights(a.weights), encode_weights(b.weights));
  std::ostringstream la, lb;
  write_train_log(la, a.log);
  write_train_log(lb, b.log);
  EXPECT_EQ(la.str(), lb.str());
}

TEST(Train, LossMostlyDecreasesOverFirstEpochs) {
  const ModelConfig mc;
  const auto data = synth_generate(SynthConfig{});
  TrainConfig cfg;
  cfg.epochs = 11;
  const auto r = train(mc, build_model(mc, 42), data, nullptr, cfg);
  int upticks = 0;
  for (std::size_t e = 1; e < r.log.size(); ++e) upticks += r.log[e].train_loss > r.log[e - 1].train_loss;
  EXPECT_LE(upticks, 1);
}

TEST(Train, DivergenceAbortsWithCoordinates) {
  const auto mc = small_model(2, 2, 16);
  auto data = separable_toy(8, 9);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e300;
  try {
    train(mc, build_model(mc, 1), data, nullptr, cfg);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1, batch 2"), std::string::npos) << e.what();
  }
}

TEST(Train, EmptyTrainingSetRejected) {
  const auto mc = small_model(2, 2, 16);
  const auto data = separable_toy(4, 1).subset(std::vector<std::size_t>{});
  EXPECT_THROW(train(mc, build_model(mc, 1), data, nullptr, TrainConfig{}), LengthError);
}

TEST(TrainLogCsv, Layout) {
  TrainLog log{{1, 1.25, 0.5, 0.75, 0.0}, {2, 1.0, 0.625, std::nan(""), 0.5}};
  std::ostringstream out;
  write_train_log(out, log);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, 2), "# ");
  EXPECT_NE(text.find("\nepoch,train_loss,train_acc,test_acc,seconds\n1,1.25,0.5,0.75,0\n2,1,0.625,nan,0.5\n"),
            std::string::npos)
      << text;
}

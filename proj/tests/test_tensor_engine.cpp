// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "fnwl/gradcheck.hpp"
#include "fnwl/gradcheck_suite.hpp"
#include "fnwl/layers/conv1d.hpp"
#include "fnwl/layers/linear.hpp"
#include "fnwl/layers/lstm.hpp"
#include "fnwl/layers/maxpool1d.hpp"
#include "fnwl/layers/relu.hpp"
#include "fnwl/loss.hpp"
#include "fnwl/random.hpp"

using namespace fnwl;

namespace {

// Direct evaluation of y[b,o,i] = b[o] + sum_c sum_j xpad[b,c,i+j] w[o,c,j]
// with an explicitly materialised zero-padded input.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor& bias, std::size_t pad) {
  const std::size_t B = x.dim(0), C = x.dim(1), L = x.dim(2), O = w.dim(0), K = w.dim(2);
  std::vector<double> xpad(B * C * (L + 2 * pad), 0.0);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < L; ++i) xpad[(b * C + c) * (L + 2 * pad) + pad + i] = x.at(b, c, i);
  const std::size_t out = L + 2 * pad - K + 1;
  Tensor y({B, O, out});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < O; ++o)
      for (std::size_t i = 0; i < out; ++i) {
        double s = bias[o];
        for (std::size_t c = 0; c < C; ++c)
          for (std::size_t j = 0; j < K; ++j) s += xpad[(b * C + c) * (L + 2 * pad) + i + j] * w.at(o, c, j);
        y.at(b, o, i) = s;
      }
  return y;
}

Tensor random_tensor(Rng& rng, Shape s) {
  Tensor t(std::move(s));
  for (double& v : t.data()) v = rng.uniform(-1, 1);
  return t;
}

void expect_passed(const gradcheck_suite::NamedReport& r) {
  for (const auto& p : r.report.params)
    EXPECT_TRUE(p.passed) << r.check << " parameter " << p.name << " rel err " << p.max_rel_error;
}

}  // namespace

TEST(Tensor, RejectsMismatchedData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), DimensionError);
  EXPECT_THROW(Tensor(Shape{2, 0}), DimensionError);
  Tensor t({2, 3});
  EXPECT_THROW(t.reshape({4, 2}), DimensionError);
  t.reshape({3, 2});
  EXPECT_EQ(t.size(), 6u);
}

TEST(Conv1d, ZeroInputLeavesBias) {
  ConvParams p = ConvParams::same(1, 1, 3);
  p.weight = Tensor({1, 1, 3}, {0.3, -1.2, 2.0});
  p.bias = Tensor::from({0.7});
  const Tensor y = conv1d_forward(Tensor::zeros({1, 1, 4}), p);
  for (double v : y.data()) EXPECT_DOUBLE_EQ(v, 0.7);
}

TEST(Conv1d, IdentityKernel) {
  ConvParams p{Tensor({1, 1, 1}, {1.0}), Tensor::from({0.0}), 0};
  const Tensor y = conv1d_forward(Tensor({1, 1, 3}, {1, 2, 3}), p);
  EXPECT_EQ(y.values(), (std::vector<double>{1, 2, 3}));
}

TEST(Conv1d, DifferenceKernelMatchesDirectSum) {
  const Tensor x({1, 1, 4}, {1, 2, 3, 4});
  const Tensor w({1, 1, 3}, {1, 0, -1});
  const Tensor b = Tensor::from({0.0});
  const Tensor expect = conv_oracle(x, w, b, 1);
  // frozen from the oracle
  EXPECT_EQ(expect.values(), (std::vector<double>{-2, -2, -2, 3}));
  EXPECT_EQ(conv1d_forward(x, {w, b, 1}).values(), expect.values());
}

TEST(Conv1d, MatchesOracleOnRandomShapes) {
  Rng rng(3);
  for (std::size_t k : {1u, 3u, 5u}) {
    const Tensor x = random_tensor(rng, {3, 2, 11});
    ConvParams p{random_tensor(rng, {4, 2, k}), random_tensor(rng, {4}), 1};
    const Tensor ref = conv_oracle(x, p.weight, p.bias, 1);
    const Tensor y = conv1d_forward(x, p);
    ASSERT_EQ(y.shape(), ref.shape());
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
  }
}

TEST(Conv1d, SamePaddingPreservesLength) {
  ConvParams p = ConvParams::same(8, 16, 3);
  EXPECT_EQ(conv1d_forward(Tensor({5, 8, 150}), p).shape(), (Shape{5, 16, 150}));
}

TEST(Conv1d, ShapeErrorsNameBothShapes) {
  ConvParams p = ConvParams::same(3, 4, 3);
  try {
    conv1d_forward(Tensor({1, 2, 8}), p);
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("(1, 2, 8)"), std::string::npos);
    EXPECT_NE(msg.find("(4, 3, 3)"), std::string::npos);
  }
  EXPECT_THROW(conv1d_backward(Tensor({1, 3, 8}), p, Tensor({1, 4, 7})), DimensionError);
}

TEST(Conv1d, BackwardTrivialCases) {
  Rng rng(11);
  const Tensor x = random_tensor(rng, {2, 3, 8});
  ConvParams p = ConvParams::same(3, 4, 3);
  p.weight = random_tensor(rng, p.weight.shape());
  const GradBundle zero = conv1d_backward(x, p, Tensor({2, 4, 8}));
  for (const auto& [name, g] : zero.params)
    for (double v : g.data()) EXPECT_EQ(v, 0.0) << name;
  for (double v : zero.input.data()) EXPECT_EQ(v, 0.0);

  const GradBundle ones = conv1d_backward(x, p, Tensor({2, 4, 8}, 1.0));
  for (double v : ones.param("b").data()) EXPECT_DOUBLE_EQ(v, 2.0 * 8.0);
}

TEST(Conv1d, GradientMatchesFiniteDifferences) { expect_passed(gradcheck_suite::conv1d(42)); }

TEST(Relu, Definition) {
  EXPECT_EQ(relu(Tensor::from({-1, 0, 2})).values(), (std::vector<double>{0, 0, 2}));
  const Tensor pos = Tensor::from({0, 0.5, 3});
  EXPECT_EQ(relu(pos), pos);
  EXPECT_EQ(relu_backward(Tensor::from({-1, 0, 2}), Tensor::from({5, 5, 5})).values(),
            (std::vector<double>{0, 0, 5}));
}

TEST(Relu, GradientAwayFromKink) { expect_passed(gradcheck_suite::relu(42)); }

TEST(MaxPool, Definition) {
  const auto r = maxpool1d(Tensor({1, 1, 4}, {1, 3, 2, 0}), 2);
  EXPECT_EQ(r.output.values(), (std::vector<double>{3, 2}));
  EXPECT_EQ(maxpool1d(Tensor({1, 1, 3}, {5, 1, 4}), 2).output.values(), (std::vector<double>{5}));
  EXPECT_EQ(maxpool1d(Tensor({2, 3, 7}, 1.5), 2).output, Tensor({2, 3, 3}, 1.5));
  EXPECT_THROW(maxpool1d(Tensor({1, 1, 1}), 2), LengthError);
}

TEST(MaxPool, TiesRouteToLowestIndex) {
  const auto r = maxpool1d(Tensor({1, 1, 4}, {2, 2, 7, 7}), 2);
  const Tensor dx = maxpool1d_backward(r, Tensor({1, 1, 2}, {1.0, 4.0}));
  EXPECT_EQ(dx.values(), (std::vector<double>{1, 0, 4, 0}));
}

TEST(MaxPool, TwoStagesOn150Give37) {
  const auto a = maxpool1d(Tensor({1, 1, 150}), 2);
  EXPECT_EQ(a.output.dim(2), 75u);
  EXPECT_EQ(maxpool1d(a.output, 2).output.dim(2), 37u);
}

TEST(MaxPool, GradientMatchesFiniteDifferences) { expect_passed(gradcheck_suite::maxpool(42)); }

TEST(Linear, TrivialCases) {
  Rng rng(1);
  const Tensor x = random_tensor(rng, {3, 4});
  LinearParams id = LinearParams::zeros(4, 4);
  for (std::size_t i = 0; i < 4; ++i) id.weight.at(i, i) = 1.0;
  EXPECT_EQ(linear_forward(x, id), x);

  LinearParams p{random_tensor(rng, {2, 4}), Tensor::from({0.25, -3.0})};
  const Tensor y = linear_forward(Tensor({3, 4}), p);
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(y.at(b, 0), 0.25);
    EXPECT_EQ(y.at(b, 1), -3.0);
  }
  EXPECT_THROW(linear_forward(Tensor({3, 5}), p), DimensionError);
}

TEST(Linear, GradientMatchesFiniteDifferences) { expect_passed(gradcheck_suite::linear(7)); }

TEST(LstmCell, ZeroParametersZeroState) {
  const LstmParams p = LstmParams::zeros(3, 2);
  const auto out = lstm_cell_forward(Tensor({1, 3}, 0.4), Tensor({1, 2}), Tensor({1, 2}), p);
  for (std::size_t n = 0; n < 2; ++n) {
    EXPECT_EQ(out.cache.i[n], 0.5);
    EXPECT_EQ(out.cache.f[n], 0.5);
    EXPECT_EQ(out.cache.o[n], 0.5);
    EXPECT_EQ(out.cache.cand[n], 0.0);
    EXPECT_EQ(out.c[n], 0.0);
    EXPECT_EQ(out.h[n], 0.0);
  }
}

TEST(LstmCell, ZeroParametersCarryHalfTheCell) {
  const LstmParams p = LstmParams::zeros(3, 2);
  const Tensor c({1, 2}, {0.8, -2.0});
  const auto out = lstm_cell_forward(Tensor({1, 3}), Tensor({1, 2}), c, p);
  for (std::size_t n = 0; n < 2; ++n) {
    EXPECT_DOUBLE_EQ(out.c[n], 0.5 * c[n]);
    EXPECT_DOUBLE_EQ(out.h[n], 0.5 * std::tanh(0.5 * c[n]));
  }
}

TEST(LstmCell, LargeForgetBiasKeepsCell) {
  LstmParams p = LstmParams::zeros(3, 2);
  p.b(Gate::forget).fill(10.0);
  const Tensor c({1, 2}, {1.0, -3.0});
  const auto out = lstm_cell_forward(Tensor({1, 3}), Tensor({1, 2}), c, p);
  const double f = 1.0 / (1.0 + std::exp(-10.0));
  EXPECT_NEAR(f, 0.9999546, 1e-7);
  for (std::size_t n = 0; n < 2; ++n) {
    EXPECT_NEAR(out.cache.f[n], f, 1e-15);
    EXPECT_NEAR(out.c[n], f * c[n], 1e-15);
  }
}

TEST(LstmCell, GatesStayInUnitInterval) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    LstmParams p = gradcheck_suite::random_lstm(rng, 4, 3, true);
    for (auto& t : p.input_w)
      for (double& v : t.data()) v *= 5.0;
    const auto out = lstm_cell_forward(random_tensor(rng, {2, 4}), random_tensor(rng, {2, 3}),
                                       random_tensor(rng, {2, 3}), p);
    for (std::size_t n = 0; n < 6; ++n) {
      for (double g : {out.cache.i[n], out.cache.f[n], out.cache.o[n]}) {
        EXPECT_GT(g, 0.0);
        EXPECT_LT(g, 1.0);
      }
      EXPECT_LT(std::abs(out.cache.cand[n]), 1.0);
    }
  }
}

TEST(LstmCell, BackwardZeroUpstream) {
  Rng rng(9);
  const LstmParams p = gradcheck_suite::random_lstm(rng, 6, 4, true);
  const auto fwd = lstm_cell_forward(random_tensor(rng, {2, 6}), random_tensor(rng, {2, 4}),
                                     random_tensor(rng, {2, 4}), p);
  const GradBundle g = lstm_cell_backward(fwd.cache, Tensor({2, 4}), Tensor({2, 4}), p);
  for (const auto& [name, t] : g.params)
    for (double v : t.data()) EXPECT_EQ(v, 0.0) << name;
  for (double v : g.input.data()) EXPECT_EQ(v, 0.0);
}

TEST(LstmCell, GradientWithPeephole) { expect_passed(gradcheck_suite::lstm_cell(42, true)); }

TEST(LstmCell, GradientWithoutPeepholeHasNoZEntries) {
  const auto r = gradcheck_suite::lstm_cell(42, false);
  expect_passed(r);
  for (const auto& p : r.report.params) EXPECT_NE(p.name.substr(0, 2), "Z_");

  Rng rng(42);
  const LstmParams p = gradcheck_suite::random_lstm(rng, 6, 4, false);
  const auto fwd = lstm_cell_forward(random_tensor(rng, {2, 6}), Tensor({2, 4}), Tensor({2, 4}), p);
  const GradBundle g = lstm_cell_backward(fwd.cache, Tensor({2, 4}, 1.0), Tensor({2, 4}), p);
  EXPECT_FALSE(g.has("Z_i"));
  EXPECT_FALSE(g.has("Z_f"));
  EXPECT_FALSE(g.has("Z_o"));
  EXPECT_EQ(g.params.size(), 12u);
}

TEST(LstmCell, StaleCacheRejected) {
  Rng rng(2);
  const LstmParams p = gradcheck_suite::random_lstm(rng, 6, 4, true);
  const LstmParams other = p;
  const auto fwd = lstm_cell_forward(random_tensor(rng, {2, 6}), Tensor({2, 4}), Tensor({2, 4}), p);
  EXPECT_THROW(lstm_cell_backward(fwd.cache, Tensor({2, 4}), Tensor({2, 4}), other), ContractError);
  EXPECT_THROW(lstm_cell_backward(LstmCellCache{}, Tensor({2, 4}), Tensor({2, 4}), p), ContractError);
}

TEST(LstmLayer, SingleStepEqualsCell) {
  Rng rng(4);
  const LstmParams p = gradcheck_suite::random_lstm(rng, 5, 3, true);
  const Tensor x = random_tensor(rng, {2, 5});
  const auto cell = lstm_cell_forward(x, Tensor({2, 3}), Tensor({2, 3}), p);
  const auto layer = lstm_layer_forward(x.reshaped({2, 1, 5}), p);
  EXPECT_EQ(layer.h, cell.h);
}

TEST(LstmLayer, ZeroParametersGiveZeroOutput) {
  Rng rng(4);
  const auto out = lstm_layer_forward(random_tensor(rng, {3, 6, 5}), LstmParams::zeros(5, 4));
  for (double v : out.h.data()) EXPECT_EQ(v, 0.0);
}

TEST(LstmLayer, GradientThroughFiveSteps) { expect_passed(gradcheck_suite::lstm_layer(42)); }

TEST(CrossEntropy, UniformLogits) {
  const std::vector<int> y = {2};
  EXPECT_NEAR(softmax_cross_entropy(Tensor({1, 4}), y).loss, std::log(4.0), 1e-15);
  EXPECT_NEAR(std::log(4.0), 1.386294, 1e-6);
}

TEST(CrossEntropy, ConfidentCorrectLogit) {
  const std::vector<int> y = {0};
  const double expect = std::log1p(3.0 * std::exp(-10.0));
  EXPECT_NEAR(expect, 1.362e-4, 1e-7);
  EXPECT_NEAR(softmax_cross_entropy(Tensor({1, 4}, {10, 0, 0, 0}), y).loss, expect, 1e-15);
}

TEST(CrossEntropy, LabelOutOfRange) {
  const std::vector<int> y = {4};
  EXPECT_THROW(softmax_cross_entropy(Tensor({1, 4}), y), LabelError);
  const std::vector<int> neg = {-1};
  EXPECT_THROW(softmax_cross_entropy(Tensor({1, 4}), neg), LabelError);
}

TEST(CrossEntropy, NonNegativeAndLnKOnlyForConstantRows) {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor logits = random_tensor(rng, {1, 4});
    const std::vector<int> y = {static_cast<int>(rng.below(4))};
    const double l = softmax_cross_entropy(logits, y).loss;
    EXPECT_GE(l, 0.0);
    EXPECT_NE(l, std::log(4.0));
  }
  const std::vector<int> y = {1};
  EXPECT_NEAR(softmax_cross_entropy(Tensor({1, 4}, 3.7), y).loss, std::log(4.0), 1e-15);
}

TEST(CrossEntropy, GradientMatchesFiniteDifferences) { expect_passed(gradcheck_suite::cross_entropy(42)); }

TEST(Gradcheck, DetectsCorruptedBiasGradient) {
  Rng rng(7);
  Tensor x = random_tensor(rng, {4, 5});
  LinearParams p{random_tensor(rng, {3, 5}), random_tensor(rng, {3})};
  const Tensor r = random_tensor(rng, {4, 3});
  GradBundle g = linear_backward(x, p, r);
  auto loss = [&] {
    const Tensor y = linear_forward(x, p);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  const auto good = finite_diff_gradcheck(loss, {{"b", &p.bias, &g.param("b")}}, 1e-5, 1e-6);
  EXPECT_TRUE(good.passed());
  Tensor bad = g.param("b");
  bad[1] += 0.1;
  const auto report = finite_diff_gradcheck(loss, {{"b", &p.bias, &bad}}, 1e-5, 1e-6);
  EXPECT_FALSE(report.passed());
  EXPECT_EQ(report.params[0].worst_index, 1u);
}

TEST(Gradcheck, NonFiniteLossIsAnError) {
  Tensor x = Tensor::from({1.0});
  Tensor g = Tensor::from({0.0});
  auto loss = [&] { return x[0] > 1.0 ? std::nan("") : x[0]; };
  EXPECT_THROW(finite_diff_gradcheck(loss, {{"x", &x, &g}}, 1e-5, 1e-6), NumericError);
  EXPECT_THROW(finite_diff_gradcheck(loss, {{"x", &x, &g}}, 0.0, 1e-6), ConfigError);
}

TEST(Ops, PureAndBitIdentical) {
  Rng rng(12);
  const Tensor x = random_tensor(rng, {2, 3, 10});
  ConvParams p{random_tensor(rng, {4, 3, 3}), random_tensor(rng, {4}), 1};
  EXPECT_EQ(conv1d_forward(x, p), conv1d_forward(x, p));
  const Tensor dy = random_tensor(rng, {2, 4, 10});
  EXPECT_EQ(conv1d_backward(x, p, dy).params.at("W"), conv1d_backward(x, p, dy).params.at("W"));
}

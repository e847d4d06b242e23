/*
 * Copyright 2026 The CDL Sentinel Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "cdl_sentinel/errors.h"
#include "cdl_sentinel/numeric.h"
#include "test_util.h"

namespace cdl_sentinel {
namespace {

Network hand_set_222() {
  Network net(2);
  net[0].weights = Matrix(2, 2);
  net[0].weights.data = {0.1, 0.2, -0.3, 0.4};
  net[0].biases = {0.05, -0.05};
  net[0].activation = Activation::kSigmoid;
  net[1].weights = Matrix(2, 2);
  net[1].weights.data = {0.6, -0.7, 0.8, 0.9};
  net[1].biases = {0.1, -0.2};
  net[1].activation = Activation::kSoftmax;
  return net;
}

TEST(Forward, ZeroNetworkSoftmaxHeadIsUniform) {
  const std::vector<size_t> dims{6, 5, 10};
  const Network net = make_zero_network(dims, Activation::kSigmoid, Activation::kSoftmax);
  const std::vector<double> x{0.3, -1.0, 2.0, 0.0, 0.7, 5.0};
  const auto trace = forward(net, x);
  for (double p : trace.output()) EXPECT_DOUBLE_EQ(p, 0.1);
  for (double h : trace.activations[1]) EXPECT_DOUBLE_EQ(h, 0.5);
}

TEST(Forward, HandSetTwoTwoTwoMatchesIndependentOracle) {
  // Values from a separate double-precision script.
  const auto trace = forward(hand_set_222(), std::vector<double>{0.5, -1.0});
  EXPECT_NEAR(trace.activations[1][0], 0.47502081252106, 1e-14);
  EXPECT_NEAR(trace.activations[1][1], 0.35434369377420455, 1e-14);
  EXPECT_NEAR(trace.output()[0], 0.4104866225199908, 1e-14);
  EXPECT_NEAR(trace.output()[1], 0.5895133774800092, 1e-14);
  EXPECT_NEAR(cross_entropy(trace.output(), 1), 0.5284578663359677, 1e-13);
}

TEST(Forward, RejectsShapeMismatchAndNonFiniteInput) {
  const Network net = hand_set_222();
  EXPECT_THROW(forward(net, std::vector<double>{1.0, 2.0, 3.0}), ShapeError);
  EXPECT_THROW(forward(net, std::vector<double>{1.0, std::nan("")}), InputError);
  EXPECT_THROW(
      forward(net, std::vector<double>{std::numeric_limits<double>::infinity(), 0.0}),
      InputError);
}

TEST(Forward, SoftmaxStableForHugeLogits) {
  std::vector<double> z{1000.0, 1000.0, -1000.0};
  softmax_inplace(z);
  EXPECT_DOUBLE_EQ(z[0], 0.5);
  EXPECT_DOUBLE_EQ(z[1], 0.5);
  EXPECT_EQ(z[2], 0.0);
}

TEST(CrossEntropy, KnownValues) {
  EXPECT_DOUBLE_EQ(cross_entropy(std::vector<double>{0.0, 1.0, 0.0}, 1), 0.0);
  const std::vector<double> uniform(10, 0.1);
  EXPECT_NEAR(cross_entropy(uniform, 3), std::log(10.0), 1e-12);
  EXPECT_NEAR(cross_entropy(uniform, 3), 2.302585, 1e-6);
  EXPECT_NEAR(cross_entropy(std::vector<double>{0.25, 0.75}, 0), 1.386294, 1e-6);
  EXPECT_NEAR(cross_entropy(std::vector<double>{0.25, 0.75}, one_hot(0, 2)),
              std::log(4.0), 1e-15);
}

TEST(CrossEntropy, ZeroProbabilityIsClampedAtEpsilon) {
  const double ce = cross_entropy(std::vector<double>{1.0, 0.0}, 1);
  EXPECT_TRUE(std::isfinite(ce));
  EXPECT_NEAR(ce, -std::log(kProbEpsilon), 1e-9);
}

TEST(CrossEntropy, PropertyNonNegativeAndZeroOnlyWhenCertain) {
  Rng rng(11);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> z(5);
    for (double& v : z) v = rng.normal(0.0, 3.0);
    softmax_inplace(z);
    const size_t label = rng.below(5);
    const double ce = cross_entropy(z, label);
    EXPECT_GE(ce, 0.0);
    if (z[label] < 1.0) EXPECT_GT(ce, 0.0);
  }
}

TEST(Backprop, PerfectPredictionGivesZeroOutputGradient) {
  Network net(1);
  net[0].weights = Matrix(2, 1);
  net[0].weights.data = {200.0, -200.0};
  net[0].biases = {0.0, 0.0};
  net[0].activation = Activation::kSoftmax;
  const auto trace = forward(net, std::vector<double>{1.0});
  ASSERT_EQ(trace.output()[0], 1.0);
  const auto g = backprop(net, std::vector<double>{1.0}, one_hot(0, 2));
  // p - y: exactly 0 for the true class, e^-400 for the other.
  EXPECT_EQ(g[0].weights.data[0], 0.0);
  EXPECT_EQ(g[0].biases[0], 0.0);
  EXPECT_NEAR(g[0].weights.data[1], std::exp(-400.0), 1e-185);
  EXPECT_NEAR(g[0].biases[1], std::exp(-400.0), 1e-185);
}

TEST(Backprop, SigmoidLocalDerivativeAtHalfIsQuarter) {
  const std::vector<double> out{0.5, 0.5};
  const std::vector<double> ones{1.0, 1.0};
  const auto d = activation_backward(Activation::kSigmoid, out, ones);
  EXPECT_DOUBLE_EQ(d[0], 0.25);
  EXPECT_DOUBLE_EQ(d[1], 0.25);
}

TEST(Backprop, HandSetOutputBiasGradientIsPredMinusTarget) {
  const auto g = backprop(hand_set_222(), std::vector<double>{0.5, -1.0}, one_hot(1, 2));
  EXPECT_NEAR(g[1].biases[0], 0.4104866225199908, 1e-14);
  EXPECT_NEAR(g[1].biases[1], 0.5895133774800092 - 1.0, 1e-14);
}

TEST(Backprop, MatchesCentralDifferencesOnRandomNetworks) {
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const auto dims = testing_util::random_dims(rng);
    Network net = make_dense_network(dims, Activation::kSigmoid, Activation::kSoftmax, rng);
    std::vector<double> x(dims.front());
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    const auto target = one_hot(rng.below(dims.back()), dims.back());
    const double err = testing_util::max_fd_relative_error(net, x, target);
    EXPECT_LT(err, 1e-5) << "trial " << trial;
  }
}

TEST(Sgd, KnownArithmetic) {
  Network net(1);
  net[0].weights = Matrix(1, 1, 1.0);
  net[0].biases = {0.0};
  GradientSet g = zero_gradients_like(net);
  g[0].weights.data[0] = 0.5;
  const Network out = sgd_step(net, g, 0.1);
  EXPECT_DOUBLE_EQ(out[0].weights.data[0], 0.95);
}

TEST(Sgd, ZeroGradientOrZeroRateLeavesParametersBitIdentical) {
  Rng rng(5);
  const std::vector<size_t> dims{4, 3, 2};
  const Network net = make_dense_network(dims, Activation::kSigmoid, Activation::kSoftmax, rng);
  EXPECT_EQ(sgd_step(net, zero_gradients_like(net), 0.3), net);
  const auto g = backprop(net, std::vector<double>{0.1, 0.2, 0.3, 0.4}, one_hot(1, 2));
  EXPECT_EQ(sgd_step(net, g, 0.0), net);
}

TEST(Sgd, NonFiniteResultIsRejectedAtomically) {
  Rng rng(6);
  const std::vector<size_t> dims{3, 2};
  Network net = make_dense_network(dims, Activation::kSigmoid, Activation::kSoftmax, rng);
  const Network before = net;
  GradientSet g = zero_gradients_like(net);
  g[0].weights.data[0] = 1.0;
  g[0].biases[1] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(apply_sgd(net, g, 0.1), NumericError);
  EXPECT_EQ(net, before);
}

TEST(Sgd, ShapeMismatchThrows) {
  Rng rng(7);
  const std::vector<size_t> a{3, 2};
  const std::vector<size_t> b{4, 2};
  const Network net = make_dense_network(a, Activation::kSigmoid, Activation::kSoftmax, rng);
  const Network other = make_zero_network(b, Activation::kSigmoid, Activation::kSoftmax);
  EXPECT_THROW(sgd_step(net, zero_gradients_like(other), 0.1), ShapeError);
}

TEST(Decay, KnownSchedule) {
  Hyperparams hp;
  hp.learning_rate = 0.1;
  hp.decay_factor = 0.9;
  EXPECT_DOUBLE_EQ(decay_lr(hp, 0), 0.1);
  EXPECT_NEAR(decay_lr(hp, 2), 0.081, 1e-15);
  hp.decay_factor = 1.0;
  for (int e = 0; e < 50; ++e) EXPECT_DOUBLE_EQ(decay_lr(hp, e), 0.1);
  hp.decay_mode = Hyperparams::DecayMode::kNone;
  hp.decay_factor = 0.5;
  EXPECT_DOUBLE_EQ(decay_lr(hp, 7), 0.1);
}

TEST(Decay, PropertyPositiveAndNonIncreasing) {
  Rng rng(9);
  for (int t = 0; t < 100; ++t) {
    Hyperparams hp;
    hp.learning_rate = rng.uniform(1e-4, 1.0);
    hp.decay_factor = rng.uniform(0.5, 1.0);
    double prev = decay_lr(hp, 0);
    for (int e = 1; e < 200; ++e) {
      const double mu = decay_lr(hp, e);
      EXPECT_GT(mu, 0.0);
      EXPECT_LE(mu, prev);
      prev = mu;
    }
  }
}

TEST(ParamCount, DenseLayerCounts) {
  const std::vector<size_t> one{4, 3};
  EXPECT_EQ(param_count(make_zero_network(one, Activation::kSigmoid, Activation::kSoftmax)),
            15u);
  const std::vector<size_t> deep{7, 5, 3};
  EXPECT_EQ(param_count(make_zero_network(deep, Activation::kSigmoid, Activation::kSoftmax)),
            7u * 5 + 5 + 5 * 3 + 3);
}

TEST(GradientSetOps, AccumulateScaleNorm) {
  const std::vector<size_t> dims{2, 2};
  const Network net = make_zero_network(dims, Activation::kSigmoid, Activation::kSoftmax);
  GradientSet a = zero_gradients_like(net);
  a[0].weights.data = {3.0, 0.0, 0.0, 4.0};
  EXPECT_DOUBLE_EQ(l2_norm(a), 5.0);
  GradientSet acc = zero_gradients_like(net);
  accumulate(acc, a, 2.0);
  scale(acc, 0.5);
  EXPECT_EQ(acc, a);
  EXPECT_EQ(value_count(a), 6u);
  EXPECT_TRUE(all_finite(a));
  a[0].biases[0] = std::numeric_limits<double>::infinity();
  EXPECT_FALSE(all_finite(a));
}

}  // namespace
}  // namespace cdl_sentinel

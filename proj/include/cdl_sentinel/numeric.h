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

#ifndef CDL_SENTINEL_NUMERIC_H_
#define CDL_SENTINEL_NUMERIC_H_

// Dense neural-network substrate: forward pass, cross-entropy, chain-rule
// backpropagation, plain SGD and learning-rate decay. Double precision
// throughout.

#include <cstddef>
#include <span>
#include <vector>

#include "cdl_sentinel/rng.h"

namespace cdl_sentinel {

// Lower clamp applied to probabilities before taking a log.
inline constexpr double kProbEpsilon = 1e-12;

// Row-major dense matrix.
struct Matrix {
  size_t rows = 0;
  size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(size_t r, size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(size_t r, size_t c) { return data[r * cols + c]; }
  double operator()(size_t r, size_t c) const { return data[r * cols + c]; }
  std::span<const double> row(size_t r) const {
    return {data.data() + r * cols, cols};
  }
  std::span<double> row(size_t r) { return {data.data() + r * cols, cols}; }

  bool operator==(const Matrix&) const = default;
};

enum class Activation { kSigmoid, kSoftmax, kIdentity };

// One dense layer: out = act(weights * in + biases).
struct LayerParams {
  Matrix weights;  // out_dim x in_dim
  std::vector<double> biases;
  Activation activation = Activation::kIdentity;

  size_t in_dim() const { return weights.cols; }
  size_t out_dim() const { return weights.rows; }
  size_t param_count() const { return weights.data.size() + biases.size(); }

  bool operator==(const LayerParams&) const = default;
};

using Network = std::vector<LayerParams>;

struct LayerGradient {
  Matrix weights;
  std::vector<double> biases;

  bool operator==(const LayerGradient&) const = default;
};

// Per-layer gradients, shaped like the network they belong to.
using GradientSet = std::vector<LayerGradient>;

struct Hyperparams {
  enum class DecayMode { kNone, kExponentialPerEpoch };

  double learning_rate = 0.1;
  double decay_factor = 0.99;
  DecayMode decay_mode = DecayMode::kExponentialPerEpoch;
};

// activations[0] is the input; activations[k + 1] is layer k's output.
struct ForwardTrace {
  std::vector<std::vector<double>> activations;

  const std::vector<double>& output() const { return activations.back(); }
};

struct BackwardResult {
  GradientSet gradients;
  std::vector<double> input_gradient;  // dL/d(network input)
};

// Builds a dense stack over `dims` (dims[0] = input size). Hidden layers use
// `hidden`, the last layer `output`. Parameters are uniform in [-0.5, 0.5].
Network make_dense_network(std::span<const size_t> dims, Activation hidden,
                           Activation output, Rng& rng);

// Same structure with every parameter zero.
Network make_zero_network(std::span<const size_t> dims, Activation hidden,
                          Activation output);

size_t param_count(const Network& net);

// Throws ShapeError on dimension mismatch, InputError on non-finite input.
ForwardTrace forward(const Network& net, std::span<const double> input);

void softmax_inplace(std::span<double> values);
double sigmoid(double x);

// -log(max(pred[true], eps)). `target` must be one-hot.
double cross_entropy(std::span<const double> pred,
                     std::span<const double> target);
double cross_entropy(std::span<const double> pred, size_t label);

std::vector<double> one_hot(size_t label, size_t num_classes);

// Maps dL/d(out) to dL/d(pre-activation) for the given activation.
std::vector<double> activation_backward(Activation act,
                                        std::span<const double> out,
                                        std::span<const double> grad_out);

// Chain-rule pass given dL/d(pre-activation of the last layer).
BackwardResult backward(const Network& net, const ForwardTrace& trace,
                        std::vector<double> output_delta);

// Cross-entropy gradients for one example. A softmax head gets the
// pred - target shortcut.
GradientSet backprop(const Network& net, std::span<const double> input,
                     std::span<const double> target);

// w' = w - mu * g, elementwise. Throws NumericError (nothing applied) if any
// result is non-finite, ShapeError on mismatch.
Network sgd_step(const Network& net, const GradientSet& grads, double mu);
void apply_sgd(Network& net, const GradientSet& grads, double mu);

double decay_lr(const Hyperparams& hp, int epoch);

GradientSet zero_gradients_like(const Network& net);
void check_gradient_shapes(const Network& net, const GradientSet& grads);
// acc += scale * g
void accumulate(GradientSet& acc, const GradientSet& g, double scale = 1.0);
void scale(GradientSet& g, double factor);
double l2_norm(const GradientSet& g);
bool all_finite(const GradientSet& g);
size_t value_count(const GradientSet& g);

}  // namespace cdl_sentinel

#endif  // CDL_SENTINEL_NUMERIC_H_

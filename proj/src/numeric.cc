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

#include "cdl_sentinel/numeric.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "cdl_sentinel/errors.h"

namespace cdl_sentinel {
namespace {

std::string dims_text(size_t a, size_t b) {
  return std::to_string(a) + " vs " + std::to_string(b);
}

Network build_network(std::span<const size_t> dims, Activation hidden,
                      Activation output, Rng* rng) {
  if (dims.size() < 2) throw ShapeError("network needs at least one layer");
  Network net;
  net.reserve(dims.size() - 1);
  for (size_t k = 0; k + 1 < dims.size(); ++k) {
    if (dims[k] == 0 || dims[k + 1] == 0) {
      throw ShapeError("zero-sized layer dimension");
    }
    LayerParams layer;
    layer.weights = Matrix(dims[k + 1], dims[k]);
    layer.biases.assign(dims[k + 1], 0.0);
    layer.activation = (k + 2 == dims.size()) ? output : hidden;
    if (rng != nullptr) {
      for (double& w : layer.weights.data) w = rng->uniform(-0.5, 0.5);
      for (double& b : layer.biases) b = rng->uniform(-0.5, 0.5);
    }
    net.push_back(std::move(layer));
  }
  return net;
}

void apply_activation(Activation act, std::span<double> values) {
  switch (act) {
    case Activation::kSigmoid:
      for (double& v : values) v = sigmoid(v);
      break;
    case Activation::kSoftmax:
      softmax_inplace(values);
      break;
    case Activation::kIdentity:
      break;
  }
}

}  // namespace

Network make_dense_network(std::span<const size_t> dims, Activation hidden,
                           Activation output, Rng& rng) {
  return build_network(dims, hidden, output, &rng);
}

Network make_zero_network(std::span<const size_t> dims, Activation hidden,
                          Activation output) {
  return build_network(dims, hidden, output, nullptr);
}

size_t param_count(const Network& net) {
  size_t n = 0;
  for (const auto& layer : net) n += layer.param_count();
  return n;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax_inplace(std::span<double> values) {
  if (values.empty()) return;
  const double peak = *std::max_element(values.begin(), values.end());
  double total = 0.0;
  for (double& v : values) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : values) v /= total;
}

ForwardTrace forward(const Network& net, std::span<const double> input) {
  if (net.empty()) throw ShapeError("empty network");
  if (input.size() != net.front().in_dim()) {
    throw ShapeError("input length " +
                     dims_text(input.size(), net.front().in_dim()));
  }
  for (double x : input) {
    if (!std::isfinite(x)) throw InputError("non-finite network input");
  }
  ForwardTrace trace;
  trace.activations.reserve(net.size() + 1);
  trace.activations.emplace_back(input.begin(), input.end());
  for (size_t k = 0; k < net.size(); ++k) {
    const LayerParams& layer = net[k];
    const std::vector<double>& in = trace.activations.back();
    if (in.size() != layer.in_dim()) {
      throw ShapeError("layer " + std::to_string(k) + " input " +
                       dims_text(in.size(), layer.in_dim()));
    }
    std::vector<double> out(layer.out_dim());
    for (size_t r = 0; r < out.size(); ++r) {
      const std::span<const double> w = layer.weights.row(r);
      double acc = layer.biases[r];
      for (size_t c = 0; c < w.size(); ++c) acc += w[c] * in[c];
      out[r] = acc;
    }
    apply_activation(layer.activation, out);
    trace.activations.push_back(std::move(out));
  }
  return trace;
}

std::vector<double> one_hot(size_t label, size_t num_classes) {
  if (label >= num_classes) throw ContractError("label out of range");
  std::vector<double> v(num_classes, 0.0);
  v[label] = 1.0;
  return v;
}

double cross_entropy(std::span<const double> pred,
                     std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw ShapeError("prediction/target length " +
                     dims_text(pred.size(), target.size()));
  }
  size_t hot = target.size();
  for (size_t i = 0; i < target.size(); ++i) {
    if (target[i] == 1.0) {
      if (hot != target.size()) throw ContractError("target is not one-hot");
      hot = i;
    } else if (target[i] != 0.0) {
      throw ContractError("target is not one-hot");
    }
  }
  if (hot == target.size()) throw ContractError("target is not one-hot");
  return cross_entropy(pred, hot);
}

double cross_entropy(std::span<const double> pred, size_t label) {
  if (label >= pred.size()) throw ContractError("label out of range");
  // -log(1) is -0.0; report +0.
  return 0.0 - std::log(std::max(pred[label], kProbEpsilon));
}

std::vector<double> activation_backward(Activation act,
                                        std::span<const double> out,
                                        std::span<const double> grad_out) {
  if (out.size() != grad_out.size()) {
    throw ShapeError("activation gradient length mismatch");
  }
  std::vector<double> delta(out.size());
  switch (act) {
    case Activation::kSigmoid:
      for (size_t i = 0; i < out.size(); ++i) {
        delta[i] = grad_out[i] * out[i] * (1.0 - out[i]);
      }
      break;
    case Activation::kIdentity:
      std::copy(grad_out.begin(), grad_out.end(), delta.begin());
      break;
    case Activation::kSoftmax: {
      double dot = 0.0;
      for (size_t i = 0; i < out.size(); ++i) dot += out[i] * grad_out[i];
      for (size_t i = 0; i < out.size(); ++i) {
        delta[i] = out[i] * (grad_out[i] - dot);
      }
      break;
    }
  }
  return delta;
}

BackwardResult backward(const Network& net, const ForwardTrace& trace,
                        std::vector<double> output_delta) {
  if (trace.activations.size() != net.size() + 1) {
    throw ShapeError("trace does not belong to this network");
  }
  if (output_delta.size() != net.back().out_dim()) {
    throw ShapeError("output delta length " +
                     dims_text(output_delta.size(), net.back().out_dim()));
  }
  BackwardResult result;
  result.gradients.resize(net.size());
  std::vector<double> delta = std::move(output_delta);
  for (size_t k = net.size(); k-- > 0;) {
    const LayerParams& layer = net[k];
    const std::vector<double>& in = trace.activations[k];
    LayerGradient& g = result.gradients[k];
    g.weights = Matrix(layer.out_dim(), layer.in_dim());
    g.biases = delta;
    for (size_t r = 0; r < layer.out_dim(); ++r) {
      std::span<double> row = g.weights.row(r);
      for (size_t c = 0; c < row.size(); ++c) row[c] = delta[r] * in[c];
    }
    std::vector<double> grad_in(layer.in_dim(), 0.0);
    for (size_t r = 0; r < layer.out_dim(); ++r) {
      const std::span<const double> w = layer.weights.row(r);
      for (size_t c = 0; c < w.size(); ++c) grad_in[c] += w[c] * delta[r];
    }
    if (k == 0) {
      result.input_gradient = std::move(grad_in);
    } else {
      delta = activation_backward(net[k - 1].activation, in, grad_in);
    }
  }
  return result;
}

GradientSet backprop(const Network& net, std::span<const double> input,
                     std::span<const double> target) {
  ForwardTrace trace = forward(net, input);
  const std::vector<double>& pred = trace.output();
  if (target.size() != pred.size()) {
    throw ShapeError("target length " + dims_text(target.size(), pred.size()));
  }
  std::vector<double> delta(pred.size());
  if (net.back().activation == Activation::kSoftmax) {
    for (size_t i = 0; i < pred.size(); ++i) delta[i] = pred[i] - target[i];
  } else {
    std::vector<double> grad_out(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
      grad_out[i] = -target[i] / std::max(pred[i], kProbEpsilon);
    }
    delta = activation_backward(net.back().activation, pred, grad_out);
  }
  return backward(net, trace, std::move(delta)).gradients;
}

void check_gradient_shapes(const Network& net, const GradientSet& grads) {
  if (grads.size() != net.size()) {
    throw ShapeError("gradient layer count " +
                     dims_text(grads.size(), net.size()));
  }
  for (size_t k = 0; k < net.size(); ++k) {
    if (grads[k].weights.rows != net[k].weights.rows ||
        grads[k].weights.cols != net[k].weights.cols ||
        grads[k].weights.data.size() != net[k].weights.data.size() ||
        grads[k].biases.size() != net[k].biases.size()) {
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(k));
    }
  }
}

Network sgd_step(const Network& net, const GradientSet& grads, double mu) {
  Network updated = net;
  apply_sgd(updated, grads, mu);
  return updated;
}

void apply_sgd(Network& net, const GradientSet& grads, double mu) {
  check_gradient_shapes(net, grads);
  // Validate everything first so a rejected update leaves `net` untouched.
  for (size_t k = 0; k < net.size(); ++k) {
    const auto& w = net[k].weights.data;
    const auto& gw = grads[k].weights.data;
    for (size_t i = 0; i < w.size(); ++i) {
      if (!std::isfinite(w[i] - mu * gw[i])) {
        throw NumericError("non-finite weight after update at layer " +
                           std::to_string(k));
      }
    }
    for (size_t i = 0; i < net[k].biases.size(); ++i) {
      if (!std::isfinite(net[k].biases[i] - mu * grads[k].biases[i])) {
        throw NumericError("non-finite bias after update at layer " +
                           std::to_string(k));
      }
    }
  }
  for (size_t k = 0; k < net.size(); ++k) {
    auto& w = net[k].weights.data;
    const auto& gw = grads[k].weights.data;
    for (size_t i = 0; i < w.size(); ++i) w[i] -= mu * gw[i];
    auto& b = net[k].biases;
    for (size_t i = 0; i < b.size(); ++i) b[i] -= mu * grads[k].biases[i];
  }
}

double decay_lr(const Hyperparams& hp, int epoch) {
  if (epoch < 0) throw ContractError("epoch must be non-negative");
  if (hp.decay_mode == Hyperparams::DecayMode::kNone) return hp.learning_rate;
  return hp.learning_rate * std::pow(hp.decay_factor, epoch);
}

GradientSet zero_gradients_like(const Network& net) {
  GradientSet g(net.size());
  for (size_t k = 0; k < net.size(); ++k) {
    g[k].weights = Matrix(net[k].weights.rows, net[k].weights.cols);
    g[k].biases.assign(net[k].biases.size(), 0.0);
  }
  return g;
}

void accumulate(GradientSet& acc, const GradientSet& g, double factor) {
  if (acc.size() != g.size()) throw ShapeError("gradient layer count mismatch");
  for (size_t k = 0; k < acc.size(); ++k) {
    auto& aw = acc[k].weights.data;
    const auto& gw = g[k].weights.data;
    if (aw.size() != gw.size() || acc[k].biases.size() != g[k].biases.size()) {
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(k));
    }
    for (size_t i = 0; i < aw.size(); ++i) aw[i] += factor * gw[i];
    for (size_t i = 0; i < acc[k].biases.size(); ++i) {
      acc[k].biases[i] += factor * g[k].biases[i];
    }
  }
}

void scale(GradientSet& g, double factor) {
  for (auto& layer : g) {
    for (double& v : layer.weights.data) v *= factor;
    for (double& v : layer.biases) v *= factor;
  }
}

double l2_norm(const GradientSet& g) {
  double sum = 0.0;
  for (const auto& layer : g) {
    for (double v : layer.weights.data) sum += v * v;
    for (double v : layer.biases) sum += v * v;
  }
  return std::sqrt(sum);
}

bool all_finite(const GradientSet& g) {
  for (const auto& layer : g) {
    for (double v : layer.weights.data) {
      if (!std::isfinite(v)) return false;
    }
    for (double v : layer.biases) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

size_t value_count(const GradientSet& g) {
  size_t n = 0;
  for (const auto& layer : g) n += layer.weights.data.size() + layer.biases.size();
  return n;
}

}  // namespace cdl_sentinel

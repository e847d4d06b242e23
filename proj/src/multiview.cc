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

#include "cdl_sentinel/multiview.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "cdl_sentinel/errors.h"
#include "cdl_sentinel/kernels.h"

namespace cdl_sentinel {
namespace {

void validate_model(const MultiViewModel& model) {
  if (model.branches.empty() || model.head.empty() ||
      model.view_indices.size() != model.branches.size()) {
    throw ShapeError("malformed multi-view model");
  }
}

size_t argmax(std::span<const double> values) {
  return static_cast<size_t>(
      std::distance(values.begin(), std::max_element(values.begin(), values.end())));
}

std::vector<double> forward_sample(const MultiViewModel& model,
                                   const MultiViewBatch& batch, size_t sample) {
  const auto inputs = branch_inputs(model, batch, sample);
  return trace_mv(model, inputs).output();
}

void check_batch(const MultiViewModel& model, const MultiViewBatch& batch) {
  validate_model(model);
  if (batch.shape != model.input_shape) {
    throw ShapeError("batch view shape does not match model input shape");
  }
  for (size_t v : model.view_indices) {
    if (v >= batch.num_views) throw ShapeError("batch has too few views");
  }
  if (batch.data.size() != batch.batch_size * batch.num_views * batch.shape.size() ||
      batch.labels.size() != batch.batch_size) {
    throw ShapeError("batch storage does not match its dimensions");
  }
}

}  // namespace

MultiViewModel build_model(size_t num_views, size_t num_classes,
                           InputShape input_shape,
                           std::span<const size_t> hidden_spec, uint64_t seed) {
  if (num_views == 0) throw ConfigError("num_views", "must be >= 1");
  if (num_classes == 0) throw ConfigError("num_classes", "must be >= 1");
  if (input_shape.size() == 0) throw ConfigError("input_shape", "zero-sized");
  if (hidden_spec.empty()) throw ConfigError("hidden_spec", "must be non-empty");
  for (size_t h : hidden_spec) {
    if (h == 0) throw ConfigError("hidden_spec", "zero-sized hidden layer");
  }

  MultiViewModel model;
  model.num_classes = num_classes;
  model.input_shape = input_shape;
  model.hidden_spec.assign(hidden_spec.begin(), hidden_spec.end());

  std::vector<size_t> branch_dims{input_shape.size()};
  branch_dims.insert(branch_dims.end(), hidden_spec.begin(), hidden_spec.end());
  for (size_t v = 0; v < num_views; ++v) {
    Rng rng(derive_seed(seed, "branch", v));
    model.branches.push_back(make_dense_network(branch_dims, Activation::kSigmoid,
                                                Activation::kSigmoid, rng));
    model.view_indices.push_back(v);
  }
  Rng head_rng(derive_seed(seed, "head"));
  const std::array<size_t, 2> head_dims{num_views * hidden_spec.back(),
                                        num_classes};
  model.head = make_dense_network(head_dims, Activation::kSigmoid,
                                  Activation::kSoftmax, head_rng);
  return model;
}

MultiViewModel zeroed(const MultiViewModel& model) {
  MultiViewModel z = model;
  Network layers = flat_layers(z);
  for (auto& layer : layers) {
    std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
    std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
  }
  assign_flat_layers(z, layers);
  return z;
}

size_t param_count(const MultiViewModel& model) {
  size_t n = param_count(model.head);
  for (const auto& b : model.branches) n += param_count(b);
  return n;
}

MultiViewBatch form_batch(std::span<const MultiViewSample> samples,
                          InputShape shape) {
  MultiViewBatch batch;
  batch.shape = shape;
  if (samples.empty()) return batch;
  const size_t views = samples.front().views.size();
  const size_t len = shape.size();
  if (views == 0 || len == 0) throw ShapeError("sample has no view data");
  batch.batch_size = samples.size();
  batch.num_views = views;
  batch.data.reserve(samples.size() * views * len);
  for (const auto& s : samples) {
    if (s.views.size() != views) throw ShapeError("samples disagree on view count");
    if (s.confidences.size() != views) {
      throw ShapeError("one confidence per view required");
    }
    for (size_t v = 0; v < views; ++v) {
      if (s.views[v].size() != len) throw ShapeError("ragged view shapes");
      const double conf = s.confidences[v];
      for (double x : s.views[v]) batch.data.push_back(x * conf);
    }
    batch.labels.push_back(s.label);
  }
  return batch;
}

std::vector<std::span<const double>> branch_inputs(const MultiViewModel& model,
                                                   const MultiViewBatch& batch,
                                                   size_t sample) {
  std::vector<std::span<const double>> inputs;
  inputs.reserve(model.view_indices.size());
  for (size_t v : model.view_indices) inputs.push_back(batch.view(sample, v));
  return inputs;
}

MultiViewTrace trace_mv(const MultiViewModel& model,
                        std::span<const std::span<const double>> inputs) {
  validate_model(model);
  if (inputs.size() != model.branches.size()) {
    throw ShapeError("expected one input per branch");
  }
  MultiViewTrace trace;
  trace.branches.reserve(model.branches.size());
  std::vector<double> fused;
  fused.reserve(model.branches.size() * model.feature_dim());
  for (size_t b = 0; b < model.branches.size(); ++b) {
    trace.branches.push_back(forward(model.branches[b], inputs[b]));
    const auto& features = trace.branches.back().output();
    fused.insert(fused.end(), features.begin(), features.end());
  }
  trace.head = forward(model.head, fused);
  return trace;
}

MultiViewBackward backward_mv(const MultiViewModel& model,
                              const MultiViewTrace& trace,
                              std::vector<double> head_delta) {
  BackwardResult head = backward(model.head, trace.head, std::move(head_delta));
  MultiViewBackward result;
  const size_t feat = model.feature_dim();
  for (size_t b = 0; b < model.branches.size(); ++b) {
    const Network& branch = model.branches[b];
    const ForwardTrace& bt = trace.branches[b];
    std::span<const double> grad_features(head.input_gradient.data() + b * feat,
                                          feat);
    std::vector<double> delta =
        activation_backward(branch.back().activation, bt.output(), grad_features);
    BackwardResult br = backward(branch, bt, std::move(delta));
    for (auto& g : br.gradients) result.gradients.push_back(std::move(g));
    result.input_gradients.push_back(std::move(br.input_gradient));
  }
  for (auto& g : head.gradients) result.gradients.push_back(std::move(g));
  return result;
}

GradientSet backprop_mv(const MultiViewModel& model,
                        const MultiViewBatch& batch, size_t sample) {
  const auto inputs = branch_inputs(model, batch, sample);
  MultiViewTrace trace = trace_mv(model, inputs);
  std::vector<double> delta = trace.output();
  const size_t label = batch.labels[sample];
  if (label >= delta.size()) throw ContractError("label out of range");
  delta[label] -= 1.0;
  return backward_mv(model, trace, std::move(delta)).gradients;
}

std::vector<std::vector<double>> forward_mv(const MultiViewModel& model,
                                            const MultiViewBatch& batch) {
  check_batch(model, batch);
  std::vector<std::vector<double>> out(batch.batch_size);
  kernels::parallel::for_each_index(batch.batch_size, [&](size_t i) {
    out[i] = forward_sample(model, batch, i);
  });
  return out;
}

std::vector<std::vector<double>> forward_mv_serial(const MultiViewModel& model,
                                                   const MultiViewBatch& batch) {
  check_batch(model, batch);
  std::vector<std::vector<double>> out(batch.batch_size);
  kernels::serial::for_each_index(batch.batch_size, [&](size_t i) {
    out[i] = forward_sample(model, batch, i);
  });
  return out;
}

std::vector<size_t> predict(const MultiViewModel& model,
                            const MultiViewBatch& batch) {
  check_batch(model, batch);
  std::vector<size_t> out(batch.batch_size);
  kernels::parallel::for_each_index(batch.batch_size, [&](size_t i) {
    out[i] = argmax(forward_sample(model, batch, i));
  });
  return out;
}

std::vector<size_t> predict_serial(const MultiViewModel& model,
                                   const MultiViewBatch& batch) {
  check_batch(model, batch);
  std::vector<size_t> out(batch.batch_size);
  kernels::serial::for_each_index(batch.batch_size, [&](size_t i) {
    out[i] = argmax(forward_sample(model, batch, i));
  });
  return out;
}

double accuracy(const MultiViewModel& model, const MultiViewBatch& batch) {
  if (batch.batch_size == 0) return 0.0;
  const std::vector<size_t> pred = predict(model, batch);
  size_t correct = 0;
  for (size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.labels[i];
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

double mean_loss(const MultiViewModel& model, const MultiViewBatch& batch) {
  if (batch.batch_size == 0) return 0.0;
  const auto probs = forward_mv(model, batch);
  double loss = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    loss += cross_entropy(probs[i], batch.labels[i]);
  }
  return loss / static_cast<double>(probs.size());
}

double train_pass(MultiViewModel& model, const MultiViewBatch& batch,
                  double mu, Rng& rng) {
  check_batch(model, batch);
  std::vector<size_t> order(batch.batch_size);
  std::iota(order.begin(), order.end(), size_t{0});
  rng.shuffle(std::span<size_t>(order));
  double loss = 0.0;
  for (size_t i : order) {
    const auto inputs = branch_inputs(model, batch, i);
    MultiViewTrace trace = trace_mv(model, inputs);
    std::vector<double> delta = trace.output();
    loss += cross_entropy(delta, batch.labels[i]);
    delta[batch.labels[i]] -= 1.0;
    apply_sgd(model, backward_mv(model, trace, std::move(delta)).gradients, mu);
  }
  return order.empty() ? 0.0 : loss / static_cast<double>(order.size());
}

MultiViewModel activate_single_branch(const MultiViewModel& model,
                                      size_t branch_id) {
  validate_model(model);
  if (branch_id >= model.branches.size()) {
    throw ContractError("branch id " + std::to_string(branch_id) +
                        " out of range");
  }
  MultiViewModel sub;
  sub.branches = {model.branches[branch_id]};
  sub.view_indices = {model.view_indices[branch_id]};
  sub.num_classes = model.num_classes;
  sub.input_shape = model.input_shape;
  sub.hidden_spec = model.hidden_spec;

  const size_t feat = model.feature_dim();
  const LayerParams& full = model.head.front();
  LayerParams head;
  head.activation = full.activation;
  head.biases = full.biases;
  head.weights = Matrix(full.out_dim(), feat);
  for (size_t r = 0; r < full.out_dim(); ++r) {
    const auto src = full.weights.row(r).subspan(branch_id * feat, feat);
    std::copy(src.begin(), src.end(), head.weights.row(r).begin());
  }
  sub.head = {std::move(head)};
  return sub;
}

GradientSet restrict_gradients_to_branch(const MultiViewModel& model,
                                         const GradientSet& grads,
                                         size_t branch_id) {
  validate_model(model);
  if (branch_id >= model.branches.size()) {
    throw ContractError("branch id out of range");
  }
  check_gradient_shapes(flat_layers(model), grads);
  const size_t per_branch = model.branches.front().size();
  GradientSet out(grads.begin() + static_cast<long>(branch_id * per_branch),
                  grads.begin() + static_cast<long>((branch_id + 1) * per_branch));
  const size_t feat = model.feature_dim();
  const LayerGradient& full = grads[model.branches.size() * per_branch];
  LayerGradient head;
  head.biases = full.biases;
  head.weights = Matrix(full.weights.rows, feat);
  for (size_t r = 0; r < full.weights.rows; ++r) {
    const auto src = full.weights.row(r).subspan(branch_id * feat, feat);
    std::copy(src.begin(), src.end(), head.weights.row(r).begin());
  }
  out.push_back(std::move(head));
  return out;
}

Network flat_layers(const MultiViewModel& model) {
  Network layers;
  for (const auto& b : model.branches) layers.insert(layers.end(), b.begin(), b.end());
  layers.insert(layers.end(), model.head.begin(), model.head.end());
  return layers;
}

void assign_flat_layers(MultiViewModel& model, const Network& layers) {
  size_t expected = model.head.size();
  for (const auto& b : model.branches) expected += b.size();
  if (layers.size() != expected) throw ShapeError("layer count mismatch");
  size_t k = 0;
  for (auto& b : model.branches) {
    for (auto& layer : b) layer = layers[k++];
  }
  for (auto& layer : model.head) layer = layers[k++];
}

GradientSet zero_gradients_like(const MultiViewModel& model) {
  return zero_gradients_like(flat_layers(model));
}

void apply_sgd(MultiViewModel& model, const GradientSet& grads, double mu) {
  std::vector<LayerParams*> layers;
  for (auto& b : model.branches) {
    for (auto& layer : b) layers.push_back(&layer);
  }
  for (auto& layer : model.head) layers.push_back(&layer);
  if (grads.size() != layers.size()) {
    throw ShapeError("gradient layer count mismatch");
  }
  for (size_t k = 0; k < layers.size(); ++k) {
    const LayerParams& p = *layers[k];
    const LayerGradient& g = grads[k];
    if (g.weights.rows != p.weights.rows || g.weights.cols != p.weights.cols ||
        g.weights.data.size() != p.weights.data.size() ||
        g.biases.size() != p.biases.size()) {
      throw ShapeError("gradient shape mismatch at layer " + std::to_string(k));
    }
    for (size_t i = 0; i < p.weights.data.size(); ++i) {
      if (!std::isfinite(p.weights.data[i] - mu * g.weights.data[i])) {
        throw NumericError("non-finite weight after update");
      }
    }
    for (size_t i = 0; i < p.biases.size(); ++i) {
      if (!std::isfinite(p.biases[i] - mu * g.biases[i])) {
        throw NumericError("non-finite bias after update");
      }
    }
  }
  for (size_t k = 0; k < layers.size(); ++k) {
    auto& w = layers[k]->weights.data;
    const auto& gw = grads[k].weights.data;
    for (size_t i = 0; i < w.size(); ++i) w[i] -= mu * gw[i];
    auto& b = layers[k]->biases;
    for (size_t i = 0; i < b.size(); ++i) b[i] -= mu * grads[k].biases[i];
  }
}

std::vector<double> flatten_parameters(const MultiViewModel& model) {
  std::vector<double> flat;
  flat.reserve(param_count(model));
  for (const auto& layer : flat_layers(model)) {
    flat.insert(flat.end(), layer.weights.data.begin(), layer.weights.data.end());
    flat.insert(flat.end(), layer.biases.begin(), layer.biases.end());
  }
  return flat;
}

}  // namespace cdl_sentinel

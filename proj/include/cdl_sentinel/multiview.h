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

#ifndef CDL_SENTINEL_MULTIVIEW_H_
#define CDL_SENTINEL_MULTIVIEW_H_

// Expandable multi-branch classifier: one dense sigmoid branch per view, a
// softmax fusion head over the concatenated branch features.
//
// Layer order used for flattening, gradients and serialization
// ("canonical order"): branch 0 layers, branch 1 layers, ..., head layers.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cdl_sentinel/numeric.h"

namespace cdl_sentinel {

struct InputShape {
  size_t channels = 1;
  size_t height = 16;
  size_t width = 16;

  size_t size() const { return channels * height * width; }
  bool operator==(const InputShape&) const = default;
};

struct MultiViewModel {
  std::vector<Network> branches;
  Network head;
  // Which batch view feeds each branch. Identity for full models; a
  // single-branch sub-model keeps the index of the view it was cut from.
  std::vector<size_t> view_indices;
  size_t num_classes = 10;
  InputShape input_shape;
  std::vector<size_t> hidden_spec;

  size_t num_views() const { return branches.size(); }
  size_t feature_dim() const { return hidden_spec.back(); }

  bool operator==(const MultiViewModel&) const = default;
};

struct MultiViewSample {
  std::vector<std::vector<double>> views;  // each channels*height*width
  size_t label = 0;
  std::vector<double> confidences;  // one per view, in [0, 1]
};

// Model-ready batch: data is laid out (sample, view, channel, row, col) with
// every view already multiplied by its confidence.
struct MultiViewBatch {
  size_t batch_size = 0;
  size_t num_views = 0;
  InputShape shape;
  std::vector<double> data;
  std::vector<size_t> labels;

  std::array<size_t, 5> dims() const {
    return {batch_size, num_views, shape.channels, shape.height, shape.width};
  }
  std::span<const double> view(size_t sample, size_t v) const {
    const size_t len = shape.size();
    return {data.data() + (sample * num_views + v) * len, len};
  }
};

struct MultiViewTrace {
  std::vector<ForwardTrace> branches;
  ForwardTrace head;

  const std::vector<double>& output() const { return head.output(); }
};

struct MultiViewBackward {
  GradientSet gradients;  // canonical order
  std::vector<std::vector<double>> input_gradients;  // one per branch
};

// Throws ConfigError on zero sizes or an empty hidden_spec.
MultiViewModel build_model(size_t num_views, size_t num_classes,
                           InputShape input_shape,
                           std::span<const size_t> hidden_spec, uint64_t seed);

// Same structure, all parameters zero.
MultiViewModel zeroed(const MultiViewModel& model);

size_t param_count(const MultiViewModel& model);

// Concatenates views of each sample, scaled by the sample's confidences.
// Every view must hold exactly shape.size() values.
MultiViewBatch form_batch(std::span<const MultiViewSample> samples,
                          InputShape shape);

// Inputs for each branch of `model` taken from one batch sample.
std::vector<std::span<const double>> branch_inputs(const MultiViewModel& model,
                                                   const MultiViewBatch& batch,
                                                   size_t sample);

MultiViewTrace trace_mv(const MultiViewModel& model,
                        std::span<const std::span<const double>> inputs);

// `head_delta` is dL/d(pre-softmax logits).
MultiViewBackward backward_mv(const MultiViewModel& model,
                              const MultiViewTrace& trace,
                              std::vector<double> head_delta);

// Cross-entropy gradients (canonical order) for one batch sample.
GradientSet backprop_mv(const MultiViewModel& model,
                        const MultiViewBatch& batch, size_t sample);

// Per-sample class probabilities. forward_mv runs the OpenMP kernel;
// forward_mv_serial is the reference.
std::vector<std::vector<double>> forward_mv(const MultiViewModel& model,
                                            const MultiViewBatch& batch);
std::vector<std::vector<double>> forward_mv_serial(const MultiViewModel& model,
                                                   const MultiViewBatch& batch);

std::vector<size_t> predict(const MultiViewModel& model,
                            const MultiViewBatch& batch);
std::vector<size_t> predict_serial(const MultiViewModel& model,
                                   const MultiViewBatch& batch);
double accuracy(const MultiViewModel& model, const MultiViewBatch& batch);

// Mean cross-entropy over the batch.
double mean_loss(const MultiViewModel& model, const MultiViewBatch& batch);

// One shuffled pass of per-sample SGD. Returns the mean loss seen.
double train_pass(MultiViewModel& model, const MultiViewBatch& batch,
                  double mu, Rng& rng);

// Branch `branch_id` plus the head columns that read its features; head
// biases are kept.
MultiViewModel activate_single_branch(const MultiViewModel& model,
                                      size_t branch_id);

// Gradients for activate_single_branch(model, branch_id) cut out of a
// full-model GradientSet.
GradientSet restrict_gradients_to_branch(const MultiViewModel& model,
                                         const GradientSet& grads,
                                         size_t branch_id);

// Canonical-order accessors.
Network flat_layers(const MultiViewModel& model);
void assign_flat_layers(MultiViewModel& model, const Network& layers);
GradientSet zero_gradients_like(const MultiViewModel& model);
void apply_sgd(MultiViewModel& model, const GradientSet& grads, double mu);
std::vector<double> flatten_parameters(const MultiViewModel& model);

}  // namespace cdl_sentinel

#endif  // CDL_SENTINEL_MULTIVIEW_H_

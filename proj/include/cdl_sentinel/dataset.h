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

#ifndef CDL_SENTINEL_DATASET_H_
#define CDL_SENTINEL_DATASET_H_

// Procedural stand-in for a multi-aspect grayscale image set: one smooth
// template per class, seen through a fixed transform per view, plus
// Gaussian pixel noise.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "cdl_sentinel/multiview.h"
#include "cdl_sentinel/rng.h"

namespace cdl_sentinel {

struct DatasetSpec {
  size_t num_classes = 10;
  size_t num_views = 4;
  InputShape shape;
  double noise_sigma = 0.05;
};

// View v: flip pattern (v % 4: none, horizontal, vertical, both) followed by
// a cyclic shift of v / 4 pixels along both axes.
std::vector<double> view_transform(std::span<const double> image,
                                   InputShape shape, size_t view);

class SyntheticSource {
 public:
  SyntheticSource(DatasetSpec spec, uint64_t template_seed);

  const DatasetSpec& spec() const { return spec_; }
  std::span<const double> class_template(size_t label) const;

  // Noise-free views of a class template.
  std::vector<std::vector<double>> clean_views(size_t label) const;

  // One noisy sample; pixel values clamped to [0, 1], confidences 1.
  MultiViewSample sample(size_t label, Rng& rng) const;

 private:
  DatasetSpec spec_;
  std::vector<std::vector<double>> templates_;
};

// Hold-out split of one participant's data, 7:1:2.
struct Shard {
  std::vector<MultiViewSample> train;
  std::vector<MultiViewSample> validation;
  std::vector<MultiViewSample> test;
};

// Class-balanced (label = i mod classes before shuffling) shard of n samples.
Shard make_shard(const SyntheticSource& source, size_t n, uint64_t seed);

std::vector<MultiViewSample> make_samples(const SyntheticSource& source,
                                          size_t n, uint64_t seed);

// Mean over all samples of `label`, views concatenated (view-major).
// Throws ContractError if no sample has that label.
std::vector<double> class_mean_image(std::span<const MultiViewSample> samples,
                                     size_t label);

}  // namespace cdl_sentinel

#endif  // CDL_SENTINEL_DATASET_H_

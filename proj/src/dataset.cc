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

#include "cdl_sentinel/dataset.h"

#include <algorithm>
#include <cmath>

#include "cdl_sentinel/errors.h"

namespace cdl_sentinel {
namespace {

constexpr int kBlobsPerTemplate = 3;

std::vector<double> make_template(InputShape shape, Rng& rng) {
  std::vector<double> image(shape.size(), 0.0);
  const double h = static_cast<double>(shape.height);
  const double w = static_cast<double>(shape.width);
  for (size_t c = 0; c < shape.channels; ++c) {
    double* plane = image.data() + c * shape.height * shape.width;
    for (int k = 0; k < kBlobsPerTemplate; ++k) {
      const double cy = rng.uniform(0.15 * h, 0.85 * h);
      const double cx = rng.uniform(0.15 * w, 0.85 * w);
      const double sigma = rng.uniform(0.09, 0.22) * std::min(h, w);
      const double amp = rng.uniform(0.6, 1.0);
      for (size_t y = 0; y < shape.height; ++y) {
        for (size_t x = 0; x < shape.width; ++x) {
          const double dy = static_cast<double>(y) - cy;
          const double dx = static_cast<double>(x) - cx;
          plane[y * shape.width + x] +=
              amp * std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        }
      }
    }
    const size_t len = shape.height * shape.width;
    const double peak = *std::max_element(plane, plane + len);
    for (size_t i = 0; i < len; ++i) plane[i] = std::min(1.0, plane[i] / peak);
  }
  return image;
}

}  // namespace

std::vector<double> view_transform(std::span<const double> image,
                                   InputShape shape, size_t view) {
  if (image.size() != shape.size()) throw ShapeError("image/shape mismatch");
  const size_t h = shape.height;
  const size_t w = shape.width;
  const bool flip_x = (view % 4 == 1) || (view % 4 == 3);
  const bool flip_y = (view % 4 == 2) || (view % 4 == 3);
  const size_t shift = view / 4;
  std::vector<double> out(image.size());
  for (size_t c = 0; c < shape.channels; ++c) {
    const size_t base = c * h * w;
    for (size_t y = 0; y < h; ++y) {
      for (size_t x = 0; x < w; ++x) {
        size_t sy = flip_y ? h - 1 - y : y;
        size_t sx = flip_x ? w - 1 - x : x;
        sy = (sy + shift) % h;
        sx = (sx + shift) % w;
        out[base + y * w + x] = image[base + sy * w + sx];
      }
    }
  }
  return out;
}

SyntheticSource::SyntheticSource(DatasetSpec spec, uint64_t template_seed)
    : spec_(spec) {
  if (spec_.num_classes == 0 || spec_.num_views == 0 || spec_.shape.size() == 0) {
    throw ConfigError("dataset", "zero-sized dataset dimension");
  }
  Rng rng(template_seed);
  templates_.reserve(spec_.num_classes);
  for (size_t c = 0; c < spec_.num_classes; ++c) {
    templates_.push_back(make_template(spec_.shape, rng));
  }
}

std::span<const double> SyntheticSource::class_template(size_t label) const {
  if (label >= templates_.size()) throw ContractError("label out of range");
  return templates_[label];
}

std::vector<std::vector<double>> SyntheticSource::clean_views(size_t label) const {
  std::vector<std::vector<double>> views;
  for (size_t v = 0; v < spec_.num_views; ++v) {
    views.push_back(view_transform(class_template(label), spec_.shape, v));
  }
  return views;
}

MultiViewSample SyntheticSource::sample(size_t label, Rng& rng) const {
  MultiViewSample s;
  s.label = label;
  s.views = clean_views(label);
  for (auto& view : s.views) {
    for (double& px : view) {
      px = std::clamp(px + rng.normal(0.0, spec_.noise_sigma), 0.0, 1.0);
    }
  }
  s.confidences.assign(spec_.num_views, 1.0);
  return s;
}

std::vector<MultiViewSample> make_samples(const SyntheticSource& source,
                                          size_t n, uint64_t seed) {
  Rng rng(seed);
  std::vector<size_t> labels(n);
  for (size_t i = 0; i < n; ++i) labels[i] = i % source.spec().num_classes;
  rng.shuffle(std::span<size_t>(labels));
  std::vector<MultiViewSample> samples;
  samples.reserve(n);
  for (size_t label : labels) samples.push_back(source.sample(label, rng));
  return samples;
}

Shard make_shard(const SyntheticSource& source, size_t n, uint64_t seed) {
  std::vector<MultiViewSample> all = make_samples(source, n, seed);
  const size_t n_train = n * 7 / 10;
  const size_t n_val = n / 10;
  Shard shard;
  auto first = std::make_move_iterator(all.begin());
  shard.train.assign(first, first + static_cast<long>(n_train));
  shard.validation.assign(first + static_cast<long>(n_train),
                          first + static_cast<long>(n_train + n_val));
  shard.test.assign(first + static_cast<long>(n_train + n_val),
                    std::make_move_iterator(all.end()));
  return shard;
}

std::vector<double> class_mean_image(std::span<const MultiViewSample> samples,
                                     size_t label) {
  std::vector<double> mean;
  size_t count = 0;
  for (const auto& s : samples) {
    if (s.label != label) continue;
    size_t i = 0;
    for (const auto& view : s.views) {
      if (mean.empty() && count == 0 && i == 0) {
        size_t total = 0;
        for (const auto& v : s.views) total += v.size();
        mean.assign(total, 0.0);
      }
      for (double px : view) mean[i++] += px;
    }
    ++count;
  }
  if (count == 0) throw ContractError("no samples with the requested label");
  for (double& m : mean) m /= static_cast<double>(count);
  return mean;
}

}  // namespace cdl_sentinel

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

#ifndef CDL_SENTINEL_TESTS_TEST_UTIL_H_
#define CDL_SENTINEL_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "cdl_sentinel/numeric.h"
#include "cdl_sentinel/rng.h"

namespace cdl_sentinel::testing_util {

// 2 to 6 inputs, one or two sigmoid hidden layers of 2 to 6 units, 2 to 5
// softmax outputs.
inline std::vector<size_t> random_dims(Rng& rng) {
  std::vector<size_t> dims{2 + rng.below(5)};
  const size_t hidden = 1 + rng.below(2);
  for (size_t i = 0; i < hidden; ++i) dims.push_back(2 + rng.below(5));
  dims.push_back(2 + rng.below(4));
  return dims;
}

inline double loss_at(const Network& net, const std::vector<double>& x,
                      const std::vector<double>& target) {
  return cross_entropy(forward(net, x).output(), target);
}

// Independent long-double forward pass and cross-entropy. `bump` is added
// to parameter `index` of layer `layer` (weights first, then biases).
inline long double reference_loss(const Network& net, const std::vector<double>& x,
                                  const std::vector<double>& target, size_t layer,
                                  size_t index, long double bump) {
  std::vector<long double> a(x.begin(), x.end());
  for (size_t k = 0; k < net.size(); ++k) {
    const auto& l = net[k];
    std::vector<long double> z(l.out_dim());
    for (size_t r = 0; r < l.out_dim(); ++r) {
      long double b = l.biases[r];
      if (k == layer && index == l.weights.data.size() + r) b += bump;
      long double acc = b;
      for (size_t c = 0; c < l.in_dim(); ++c) {
        long double w = l.weights(r, c);
        if (k == layer && index == r * l.in_dim() + c) w += bump;
        acc += w * a[c];
      }
      z[r] = acc;
    }
    if (l.activation == Activation::kSigmoid) {
      for (auto& v : z) v = 1.0L / (1.0L + std::exp(-v));
    } else if (l.activation == Activation::kSoftmax) {
      const long double m = *std::max_element(z.begin(), z.end());
      long double sum = 0.0L;
      for (auto& v : z) sum += (v = std::exp(v - m));
      for (auto& v : z) v /= sum;
    }
    a = std::move(z);
  }
  long double loss = 0.0L;
  for (size_t i = 0; i < a.size(); ++i) {
    const long double p = std::clamp<long double>(a[i], kProbEpsilon, 1.0L - kProbEpsilon);
    loss -= target[i] * std::log(p);
  }
  return loss;
}

// Largest |analytic - numeric| / max(|analytic|, |numeric|, floor) over all
// parameters. The numeric side is a five-point stencil with step h over
// reference_loss.
inline double max_fd_relative_error(const Network& net, const std::vector<double>& x,
                                    const std::vector<double>& target,
                                    double h = 1e-4, double floor = 1e-8) {
  const GradientSet analytic = backprop(net, x, target);
  double worst = 0.0;
  const long double step = h;
  for (size_t k = 0; k < net.size(); ++k) {
    const size_t nw = net[k].weights.data.size();
    for (size_t i = 0; i < net[k].param_count(); ++i) {
      auto f = [&](long double d) { return reference_loss(net, x, target, k, i, d); };
      const long double numeric =
          (-f(2 * step) + 8 * f(step) - 8 * f(-step) + f(-2 * step)) / (12 * step);
      const double a = i < nw ? analytic[k].weights.data[i] : analytic[k].biases[i - nw];
      const double n = static_cast<double>(numeric);
      const double denom = std::max({std::abs(a), std::abs(n), floor});
      worst = std::max(worst, std::abs(a - n) / denom);
    }
  }
  return worst;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("cdl_sentinel_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace cdl_sentinel::testing_util

#endif  // CDL_SENTINEL_TESTS_TEST_UTIL_H_

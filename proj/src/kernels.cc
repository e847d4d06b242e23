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

#include "cdl_sentinel/kernels.h"

#include <cstdlib>
#include <string>

#include "cdl_sentinel/errors.h"

namespace cdl_sentinel::kernels {
namespace {

void check_affine(std::span<const double> weights, std::span<const double> bias,
                  std::span<const double> x, std::span<double> out) {
  if (bias.size() != out.size() || weights.size() != out.size() * x.size()) {
    throw ShapeError("affine kernel dimension mismatch");
  }
}

}  // namespace

int apply_thread_cap_from_env() {
  if (const char* env = std::getenv("CDL_SENTINEL_THREADS")) {
    char* end = nullptr;
    const long value = std::strtol(env, &end, 10);
    if (end != env && value > 0) set_thread_cap(static_cast<int>(value));
  }
  return thread_cap();
}

void set_thread_cap(int threads) {
#ifdef _OPENMP
  if (threads > 0) omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

int thread_cap() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace serial {

void affine(std::span<const double> weights, std::span<const double> bias,
            std::span<const double> x, std::span<double> out) {
  check_affine(weights, bias, x, out);
  const size_t cols = x.size();
  for (size_t r = 0; r < out.size(); ++r) {
    const double* w = weights.data() + r * cols;
    double acc = bias[r];
    for (size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
    out[r] = acc;
  }
}

}  // namespace serial

namespace parallel {

void affine(std::span<const double> weights, std::span<const double> bias,
            std::span<const double> x, std::span<double> out) {
  check_affine(weights, bias, x, out);
  const size_t cols = x.size();
  const long long rows = static_cast<long long>(out.size());
#pragma omp parallel for schedule(static)
  for (long long r = 0; r < rows; ++r) {
    const double* w = weights.data() + static_cast<size_t>(r) * cols;
    double acc = bias[static_cast<size_t>(r)];
    for (size_t c = 0; c < cols; ++c) acc += w[c] * x[c];
    out[static_cast<size_t>(r)] = acc;
  }
}

}  // namespace parallel

}  // namespace cdl_sentinel::kernels

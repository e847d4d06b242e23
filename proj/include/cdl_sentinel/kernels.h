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

#ifndef CDL_SENTINEL_KERNELS_H_
#define CDL_SENTINEL_KERNELS_H_

// Data-parallel loops. Every kernel exists twice: `serial::` is the
// reference used by tests, `parallel::` is the OpenMP version used in runs.
// Parallel kernels only ever write per-index slots, and reductions are done
// afterwards in index order, so results are bit-identical to the serial
// versions at any thread count.

#include <cstddef>
#include <exception>
#include <span>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cdl_sentinel::kernels {

// Applies CDL_SENTINEL_THREADS (if set and positive) as the OpenMP thread
// cap. Returns the resulting cap.
int apply_thread_cap_from_env();
void set_thread_cap(int threads);
int thread_cap();

namespace serial {

template <typename Fn>
void for_each_index(size_t n, Fn&& fn) {
  for (size_t i = 0; i < n; ++i) fn(i);
}

// out = W x + b, W row-major rows x cols.
void affine(std::span<const double> weights, std::span<const double> bias,
            std::span<const double> x, std::span<double> out);

}  // namespace serial

namespace parallel {

// The first exception thrown by any iteration is rethrown on the caller's
// thread after the loop.
template <typename Fn>
void for_each_index(size_t n, Fn&& fn) {
  std::exception_ptr failure;
  const long long count = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < count; ++i) {
    try {
      fn(static_cast<size_t>(i));
    } catch (...) {
#pragma omp critical(cdl_sentinel_kernel_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
}

void affine(std::span<const double> weights, std::span<const double> bias,
            std::span<const double> x, std::span<double> out);

}  // namespace parallel

}  // namespace cdl_sentinel::kernels

#endif  // CDL_SENTINEL_KERNELS_H_

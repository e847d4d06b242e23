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

#ifndef CDL_SENTINEL_RNG_H_
#define CDL_SENTINEL_RNG_H_

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace cdl_sentinel {

// Seeded random source over std::mt19937_64. Doubles and bounded integers
// are derived from raw engine output here, not by std:: distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (second variate cached).
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Unbiased integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Hierarchical seed split: derive(run, "actor", 3) gives actor 3 its own
// stream, independent of how many other actors exist.
uint64_t derive_seed(uint64_t parent, std::string_view tag, uint64_t index = 0);

// 64-bit FNV-1a.
uint64_t fnv1a64(std::span<const unsigned char> bytes);
uint64_t fnv1a64(std::string_view text);

}  // namespace cdl_sentinel

#endif  // CDL_SENTINEL_RNG_H_

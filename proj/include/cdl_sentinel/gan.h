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

#ifndef CDL_SENTINEL_GAN_H_
#define CDL_SENTINEL_GAN_H_

// GAN machinery: the minimax value estimate, a small standalone GAN on a 2-D
// Gaussian, and the inversion attack that trains a generator against
// downloaded classifier parameters.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cdl_sentinel/numeric.h"
#include "cdl_sentinel/snapshot.h"

namespace cdl_sentinel {

// mean(log d_real) + mean(log(1 - d_fake)), probabilities clamped to
// [eps, 1 - eps]. Throws ContractError on an empty batch.
double value_function(std::span<const double> d_real,
                      std::span<const double> d_fake);

struct GanState {
  Network generator;      // noise -> sample, sigmoid output
  Network discriminator;  // sample -> 1, sigmoid output
  size_t noise_dim = 0;
  size_t step_count = 0;
  bool diverged = false;  // a loss went non-finite; training stopped

  bool operator==(const GanState&) const = default;
};

enum class GeneratorLoss {
  kMinimax,        // descend log(1 - D(G(z)))
  kNonSaturating,  // descend -log D(G(z))
};

struct StandaloneGanConfig {
  size_t noise_dim = 32;
  size_t generator_hidden = 128;
  size_t discriminator_hidden = 64;
  std::array<double, 2> real_mean{0.35, 0.65};
  double real_stddev = 0.05;
  size_t steps = 2000;
  size_t batch_size = 16;
  size_t discriminator_steps_per_generator_step = 1;
  double discriminator_lr = 0.5;
  double generator_lr = 0.1;
  GeneratorLoss generator_loss = GeneratorLoss::kMinimax;
  bool train_generator = true;
};

struct DiscriminatorEvaluation {
  double mean_real = 0.0;   // mean D output on real samples
  double mean_fake = 0.0;   // mean D output on generated samples
  double mean_mixed = 0.0;  // mean over the pooled real + fake batch
  double accuracy = 0.0;    // real > 0.5 and fake <= 0.5 counted correct
  double value = 0.0;       // value_function on the same batches
};

GanState train_standalone_gan(const StandaloneGanConfig& config, uint64_t seed);

// Evaluates on `samples` fresh real and generated points each.
DiscriminatorEvaluation evaluate_discriminator(const GanState& state,
                                               const StandaloneGanConfig& config,
                                               uint64_t seed,
                                               size_t samples = 256);

inline constexpr size_t kDefaultAttackBudget = 300;

struct AttackConfig {
  size_t noise_dim = 32;
  size_t generator_hidden = 128;
  size_t batch_size = 4;
  double learning_rate = 0.5;
  size_t sample_count = 16;
  // Weight of a squared total-variation image prior in the attacker's loss.
  double smoothness_weight = 0.02;
  // Multiplier on the generator's initial output-layer weights; output
  // biases start at zero, so small values begin near a flat gray image.
  double output_init_scale = 0.1;
};

struct ReconstructionResult {
  size_t target_class = 0;
  std::vector<std::vector<double>> generated_samples;  // values in [0, 1]
  size_t snapshots_used = 0;
  double final_error = 0.0;
};

// Trains a generator so the frozen downloaded classifier assigns
// `target_class` to its output; the attacker moves to the next snapshot
// every ceil(budget / snapshots.size()) steps. `class_mean_image` is the
// harness-side ground truth used only for final_error.
ReconstructionResult reconstruct_from_params(
    std::span<const ParameterSnapshot> snapshots, size_t target_class,
    size_t budget, uint64_t seed, std::span<const double> class_mean_image,
    const AttackConfig& config = {});

// MSE between the mean of `samples` and `class_mean`.
double reconstruction_error(std::span<const std::vector<double>> samples,
                            std::span<const double> class_mean);

// Mean squared difference between horizontally and vertically adjacent
// pixels, over every (view, channel) plane of a concatenated image.
double high_frequency_energy(std::span<const double> image, InputShape shape);

// Binary P5 grid: one row per sample, one column per view/channel plane.
void write_pgm_grid(const std::filesystem::path& path,
                    std::span<const std::vector<double>> samples,
                    InputShape shape);

}  // namespace cdl_sentinel

#endif  // CDL_SENTINEL_GAN_H_

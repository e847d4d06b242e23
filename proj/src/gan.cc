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

#include "cdl_sentinel/gan.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "cdl_sentinel/errors.h"
#include "cdl_sentinel/kernels.h"

namespace cdl_sentinel {
namespace {

double clamp_prob(double p) {
  return std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
}

std::vector<double> noise_vector(size_t dim, Rng& rng) {
  std::vector<double> z(dim);
  for (double& v : z) v = rng.normal();
  return z;
}

// Per-sample gradients computed in parallel, then averaged in index order.
template <typename Fn>
GradientSet mean_gradient(const Network& like, size_t n, Fn&& per_sample) {
  std::vector<GradientSet> slots(n);
  kernels::parallel::for_each_index(n, [&](size_t i) { slots[i] = per_sample(i); });
  GradientSet total = zero_gradients_like(like);
  for (const auto& g : slots) accumulate(total, g);
  if (n > 0) scale(total, 1.0 / static_cast<double>(n));
  return total;
}

std::vector<double> sample_real(const StandaloneGanConfig& config, Rng& rng) {
  return {rng.normal(config.real_mean[0], config.real_stddev),
          rng.normal(config.real_mean[1], config.real_stddev)};
}

double d_out(const Network& disc, std::span<const double> x) {
  return forward(disc, x).output()[0];
}

// Gradient of the generator loss w.r.t. generator parameters for one z,
// given dL/d(discriminator logit) as a function of D's output.
template <typename DeltaFn>
GradientSet generator_gradient(const Network& gen, const Network& disc,
                               const std::vector<double>& z, DeltaFn&& delta_of) {
  ForwardTrace gt = forward(gen, z);
  ForwardTrace dt = forward(disc, gt.output());
  const double d = dt.output()[0];
  BackwardResult db = backward(disc, dt, {delta_of(d)});
  std::vector<double> delta =
      activation_backward(gen.back().activation, gt.output(), db.input_gradient);
  return backward(gen, gt, std::move(delta)).gradients;
}

// grad += weight * d/dx sum over neighbour pairs of (x_i - x_j)^2
void add_smoothness_gradient(std::span<const double> x, InputShape shape,
                             double weight, std::vector<double>& grad) {
  const size_t h = shape.height;
  const size_t w = shape.width;
  const size_t plane = h * w;
  for (size_t base = 0; base + plane <= x.size(); base += plane) {
    for (size_t y = 0; y < h; ++y) {
      for (size_t c = 0; c < w; ++c) {
        const size_t i = base + y * w + c;
        if (c + 1 < w) {
          const double d = 2.0 * weight * (x[i] - x[i + 1]);
          grad[i] += d;
          grad[i + 1] -= d;
        }
        if (y + 1 < h) {
          const double d = 2.0 * weight * (x[i] - x[i + w]);
          grad[i] += d;
          grad[i + w] -= d;
        }
      }
    }
  }
}

}  // namespace

double value_function(std::span<const double> d_real,
                      std::span<const double> d_fake) {
  if (d_real.empty() || d_fake.empty()) {
    throw ContractError("value_function needs non-empty batches");
  }
  double real = 0.0;
  for (double p : d_real) real += std::log(clamp_prob(p));
  double fake = 0.0;
  for (double p : d_fake) fake += std::log(1.0 - clamp_prob(p));
  return real / static_cast<double>(d_real.size()) +
         fake / static_cast<double>(d_fake.size());
}

GanState train_standalone_gan(const StandaloneGanConfig& config, uint64_t seed) {
  GanState state;
  state.noise_dim = config.noise_dim;
  {
    Rng rng(derive_seed(seed, "generator"));
    const std::array<size_t, 3> dims{config.noise_dim, config.generator_hidden, 2};
    state.generator = make_dense_network(dims, Activation::kSigmoid,
                                         Activation::kSigmoid, rng);
  }
  {
    Rng rng(derive_seed(seed, "discriminator"));
    const std::array<size_t, 3> dims{2, config.discriminator_hidden, 1};
    state.discriminator = make_dense_network(dims, Activation::kSigmoid,
                                             Activation::kSigmoid, rng);
  }
  Rng rng(derive_seed(seed, "training"));
  const size_t b = config.batch_size;

  for (size_t step = 0; step < config.steps; ++step) {
    for (size_t k = 0; k < config.discriminator_steps_per_generator_step; ++k) {
      std::vector<std::vector<double>> real(b), fake(b);
      for (size_t i = 0; i < b; ++i) {
        real[i] = sample_real(config, rng);
        fake[i] = forward(state.generator, noise_vector(config.noise_dim, rng)).output();
      }
      GradientSet g = mean_gradient(state.discriminator, 2 * b, [&](size_t i) {
        const bool is_real = i < b;
        const auto& x = is_real ? real[i] : fake[i - b];
        ForwardTrace t = forward(state.discriminator, x);
        const double d = t.output()[0];
        return backward(state.discriminator, t, {is_real ? d - 1.0 : d}).gradients;
      });
      if (!all_finite(g)) {
        state.diverged = true;
        return state;
      }
      apply_sgd(state.discriminator, g, config.discriminator_lr);
    }

    if (config.train_generator) {
      std::vector<std::vector<double>> zs(b);
      for (auto& z : zs) z = noise_vector(config.noise_dim, rng);
      const bool minimax = config.generator_loss == GeneratorLoss::kMinimax;
      GradientSet g = mean_gradient(state.generator, b, [&](size_t i) {
        return generator_gradient(state.generator, state.discriminator, zs[i],
                                  [minimax](double d) { return minimax ? -d : d - 1.0; });
      });
      if (!all_finite(g)) {
        state.diverged = true;
        return state;
      }
      apply_sgd(state.generator, g, config.generator_lr);
    }
    ++state.step_count;
  }
  return state;
}

DiscriminatorEvaluation evaluate_discriminator(const GanState& state,
                                               const StandaloneGanConfig& config,
                                               uint64_t seed, size_t samples) {
  Rng rng(seed);
  std::vector<double> real(samples), fake(samples);
  for (size_t i = 0; i < samples; ++i) {
    real[i] = d_out(state.discriminator, sample_real(config, rng));
    fake[i] = d_out(state.discriminator,
                    forward(state.generator, noise_vector(state.noise_dim, rng)).output());
  }
  DiscriminatorEvaluation ev;
  size_t correct = 0;
  for (size_t i = 0; i < samples; ++i) {
    ev.mean_real += real[i];
    ev.mean_fake += fake[i];
    correct += (real[i] > 0.5) + (fake[i] <= 0.5);
  }
  const double n = static_cast<double>(samples);
  ev.mean_real /= n;
  ev.mean_fake /= n;
  ev.mean_mixed = 0.5 * (ev.mean_real + ev.mean_fake);
  ev.accuracy = static_cast<double>(correct) / (2.0 * n);
  ev.value = value_function(real, fake);
  return ev;
}

ReconstructionResult reconstruct_from_params(
    std::span<const ParameterSnapshot> snapshots, size_t target_class,
    size_t budget, uint64_t seed, std::span<const double> class_mean_image,
    const AttackConfig& config) {
  if (snapshots.empty()) throw ContractError("attack needs at least one snapshot");
  const MultiViewModel& first = snapshots.front().model;
  if (target_class >= first.num_classes) throw ContractError("target class out of range");
  const size_t view_len = first.input_shape.size();
  const size_t image_dim = first.num_views() * view_len;
  for (const auto& s : snapshots) {
    if (s.model.num_views() * s.model.input_shape.size() != image_dim) {
      throw ShapeError("snapshots disagree on input size");
    }
  }
  if (class_mean_image.size() != image_dim) {
    throw ShapeError("class mean image does not match the model input");
  }

  Network gen;
  {
    Rng rng(derive_seed(seed, "attack-generator"));
    const std::array<size_t, 3> dims{config.noise_dim, config.generator_hidden,
                                     image_dim};
    gen = make_dense_network(dims, Activation::kSigmoid, Activation::kSigmoid, rng);
    if (config.output_init_scale != 1.0) {
      for (double& w : gen.back().weights.data) w *= config.output_init_scale;
      std::fill(gen.back().biases.begin(), gen.back().biases.end(), 0.0);
    }
  }
  Rng noise(derive_seed(seed, "attack-noise"));
  const size_t n = snapshots.size();
  const size_t cadence = std::max<size_t>(1, (budget + n - 1) / n);
  size_t used = 0;

  for (size_t step = 0; step < budget; ++step) {
    const size_t idx = std::min(step / cadence, n - 1);
    used = std::max(used, idx + 1);
    const MultiViewModel& clf = snapshots[idx].model;
    std::vector<std::vector<double>> zs(config.batch_size);
    for (auto& z : zs) z = noise_vector(config.noise_dim, noise);

    GradientSet g = mean_gradient(gen, zs.size(), [&](size_t i) {
      ForwardTrace gt = forward(gen, zs[i]);
      const std::vector<double>& x = gt.output();
      std::vector<std::span<const double>> inputs;
      for (size_t v = 0; v < clf.num_views(); ++v) {
        inputs.emplace_back(x.data() + v * view_len, view_len);
      }
      MultiViewTrace ct = trace_mv(clf, inputs);
      std::vector<double> delta = ct.output();
      delta[target_class] -= 1.0;
      MultiViewBackward cb = backward_mv(clf, ct, std::move(delta));
      std::vector<double> dx;
      dx.reserve(image_dim);
      for (const auto& part : cb.input_gradients) dx.insert(dx.end(), part.begin(), part.end());
      if (config.smoothness_weight > 0.0) {
        add_smoothness_gradient(x, first.input_shape, config.smoothness_weight, dx);
      }
      std::vector<double> gdelta =
          activation_backward(gen.back().activation, x, dx);
      return backward(gen, gt, std::move(gdelta)).gradients;
    });
    if (!all_finite(g)) break;
    apply_sgd(gen, g, config.learning_rate);
  }

  ReconstructionResult result;
  result.target_class = target_class;
  result.snapshots_used = used;
  Rng eval(derive_seed(seed, "attack-eval"));
  for (size_t k = 0; k < config.sample_count; ++k) {
    result.generated_samples.push_back(
        forward(gen, noise_vector(config.noise_dim, eval)).output());
  }
  result.final_error = reconstruction_error(result.generated_samples, class_mean_image);
  return result;
}

double reconstruction_error(std::span<const std::vector<double>> samples,
                            std::span<const double> class_mean) {
  if (samples.empty()) throw ContractError("no samples to compare");
  std::vector<double> mean(class_mean.size(), 0.0);
  for (const auto& s : samples) {
    if (s.size() != class_mean.size()) throw ShapeError("sample/class mean size mismatch");
    for (size_t i = 0; i < s.size(); ++i) mean[i] += s[i];
  }
  double err = 0.0;
  for (size_t i = 0; i < mean.size(); ++i) {
    const double d = mean[i] / static_cast<double>(samples.size()) - class_mean[i];
    err += d * d;
  }
  return mean.empty() ? 0.0 : err / static_cast<double>(mean.size());
}

double high_frequency_energy(std::span<const double> image, InputShape shape) {
  const size_t plane = shape.height * shape.width;
  if (plane == 0 || image.size() % plane != 0) {
    throw ShapeError("image is not a whole number of planes");
  }
  double sum = 0.0;
  size_t pairs = 0;
  for (size_t base = 0; base < image.size(); base += plane) {
    for (size_t y = 0; y < shape.height; ++y) {
      for (size_t x = 0; x < shape.width; ++x) {
        const double v = image[base + y * shape.width + x];
        if (x + 1 < shape.width) {
          const double d = v - image[base + y * shape.width + x + 1];
          sum += d * d;
          ++pairs;
        }
        if (y + 1 < shape.height) {
          const double d = v - image[base + (y + 1) * shape.width + x];
          sum += d * d;
          ++pairs;
        }
      }
    }
  }
  return pairs == 0 ? 0.0 : sum / static_cast<double>(pairs);
}

void write_pgm_grid(const std::filesystem::path& path,
                    std::span<const std::vector<double>> samples,
                    InputShape shape) {
  const size_t plane = shape.height * shape.width;
  if (samples.empty() || plane == 0) throw ContractError("nothing to draw");
  const size_t planes = samples.front().size() / plane;
  const size_t width = planes * shape.width;
  const size_t height = samples.size() * shape.height;
  std::vector<unsigned char> pixels(width * height, 0);
  for (size_t s = 0; s < samples.size(); ++s) {
    if (samples[s].size() != planes * plane) throw ShapeError("ragged samples");
    for (size_t p = 0; p < planes; ++p) {
      for (size_t y = 0; y < shape.height; ++y) {
        for (size_t x = 0; x < shape.width; ++x) {
          const double v = std::clamp(samples[s][p * plane + y * shape.width + x], 0.0, 1.0);
          pixels[(s * shape.height + y) * width + p * shape.width + x] =
              static_cast<unsigned char>(std::lround(v * 255.0));
        }
      }
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << "P5\n" << width << " " << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(pixels.data()),
            static_cast<std::streamsize>(pixels.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace cdl_sentinel

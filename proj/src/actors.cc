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

#include "cdl_sentinel/actors.h"

#include <cmath>
#include <limits>
#include <numeric>

#include "cdl_sentinel/errors.h"
#include "cdl_sentinel/rng.h"

namespace cdl_sentinel {
namespace {

struct RoleName {
  Role role;
  std::string_view name;
};

constexpr RoleName kRoles[] = {
    {Role::kVictim, "victim"},
    {Role::kAdvType2Gan, "adv_type2_gan"},
    {Role::kAdvType3Poison, "adv_type3_poison"},
    {Role::kAdvType4ClassInject, "adv_type4_class_inject"},
    {Role::kAdvType5ParamTamper, "adv_type5_param_tamper"},
};

// Parameter delta of a local run expressed as the gradient the server would
// have to apply at rate mu to land on the same parameters.
GradientSet implied_gradient(const MultiViewModel& before,
                             const MultiViewModel& after, double mu) {
  const Network a = flat_layers(before);
  const Network b = flat_layers(after);
  GradientSet g;
  g.reserve(a.size());
  for (size_t l = 0; l < a.size(); ++l) {
    LayerGradient lg;
    lg.weights = Matrix(a[l].weights.rows, a[l].weights.cols);
    for (size_t i = 0; i < lg.weights.data.size(); ++i) {
      lg.weights.data[i] = (a[l].weights.data[i] - b[l].weights.data[i]) / mu;
    }
    lg.biases.resize(a[l].biases.size());
    for (size_t i = 0; i < lg.biases.size(); ++i) {
      lg.biases[i] = (a[l].biases[i] - b[l].biases[i]) / mu;
    }
    g.push_back(std::move(lg));
  }
  return g;
}

MultiViewBatch subset(const MultiViewBatch& batch, size_t n) {
  MultiViewBatch out = batch;
  out.batch_size = std::min(n, batch.batch_size);
  const size_t stride = batch.num_views * batch.shape.size();
  out.data.resize(out.batch_size * stride);
  out.labels.resize(out.batch_size);
  return out;
}

}  // namespace

std::string_view role_name(Role role) {
  for (const auto& r : kRoles) {
    if (r.role == role) return r.name;
  }
  return "unknown";
}

std::optional<Role> parse_role(std::string_view name) {
  for (const auto& r : kRoles) {
    if (r.name == name) return r.role;
  }
  return std::nullopt;
}

std::string_view poison_name(PoisonKind kind) {
  switch (kind) {
    case PoisonKind::kNanInject: return "nan_inject";
    case PoisonKind::kSignFlipScale: return "sign_flip_scale";
    case PoisonKind::kLabelShuffle: return "label_shuffle";
  }
  return "unknown";
}

std::optional<PoisonKind> parse_poison(std::string_view name) {
  if (name == "nan_inject") return PoisonKind::kNanInject;
  if (name == "sign_flip_scale") return PoisonKind::kSignFlipScale;
  if (name == "label_shuffle") return PoisonKind::kLabelShuffle;
  return std::nullopt;
}

void validate_actor_config(const ActorConfig& c) {
  if (c.id.empty()) throw ConfigError("id", "participant id is empty");
  if (c.local_epochs_per_slot == 0) {
    throw ConfigError("local_epochs_per_slot", "must be >= 1");
  }
  const bool type3 = c.role == Role::kAdvType3Poison;
  if (type3 != c.poison.has_value()) {
    throw ConfigError("poison", type3 ? "required for adv_type3_poison"
                                      : "only valid for adv_type3_poison");
  }
  if (type3 && c.poison->kind == PoisonKind::kSignFlipScale &&
      !(c.poison->scale > 0.0)) {
    throw ConfigError("poison.k", "must be positive");
  }
  const bool type4 = c.role == Role::kAdvType4ClassInject;
  if (!type4 && (c.extra_class_count != 0 || c.declared_channels != 0)) {
    throw ConfigError("extra_class_count",
                      "only valid for adv_type4_class_inject");
  }
  if (type4 && c.extra_class_count == 0 && c.declared_channels == 0) {
    throw ConfigError("extra_class_count",
                      "adv_type4_class_inject needs extra classes or channels");
  }
  if (c.role == Role::kAdvType2Gan && c.download_requests_per_epoch == 0) {
    throw ConfigError("download_requests_per_epoch", "must be >= 1");
  }
  if (c.role == Role::kAdvType2Gan && c.side_shard_samples == 0) {
    throw ConfigError("side_shard_samples", "must be >= 1");
  }
  if (!(c.tamper_scale > 0.0)) throw ConfigError("tamper_scale", "must be positive");
}

LocalUpdate victim_step(const ActorConfig& config, const ParameterSnapshot& snapshot,
                        const MultiViewBatch& train, int epoch, double mu,
                        uint64_t seed) {
  LocalUpdate out;
  MultiViewModel local = snapshot.model;
  out.loss_before = mean_loss(local, train);
  Rng rng(derive_seed(seed, "local-train"));
  for (size_t e = 0; e < config.local_epochs_per_slot; ++e) {
    train_pass(local, train, mu, rng);
    out.epoch_losses.push_back(mean_loss(local, train));
  }
  GradientPacket& p = out.packet;
  p.participant_id = config.id;
  p.epoch = epoch;
  p.declared_signature = signature_of(snapshot.model);
  p.gradients = implied_gradient(snapshot.model, local, mu);
  p.nonce = derive_seed(seed, "nonce");
  return out;
}

void poison_gradients(GradientSet& grads, const PoisonSpec& spec) {
  switch (spec.kind) {
    case PoisonKind::kNanInject:
      if (!grads.empty() && !grads.front().weights.data.empty()) {
        grads.front().weights.data.front() = std::numeric_limits<double>::quiet_NaN();
      }
      break;
    case PoisonKind::kSignFlipScale:
      scale(grads, -spec.scale);
      break;
    case PoisonKind::kLabelShuffle:
      break;
  }
}

GradientPacket class_inject_packet(const ActorConfig& config,
                                   const GradientPacket& honest,
                                   const MultiViewModel& model, uint64_t seed) {
  GradientPacket p = honest;
  Rng rng(derive_seed(seed, "class-inject"));
  const size_t in_channels = model.input_shape.channels;
  const size_t channels =
      config.declared_channels == 0 ? in_channels : config.declared_channels;
  const size_t plane = model.input_shape.height * model.input_shape.width;
  const size_t per_branch = model.hidden_spec.size();

  if (channels != in_channels) {
    for (size_t b = 0; b < model.num_views(); ++b) {
      LayerGradient& first = p.gradients[b * per_branch];
      Matrix wide(first.weights.rows, channels * plane);
      for (size_t r = 0; r < wide.rows; ++r) {
        for (size_t c = 0; c < channels; ++c) {
          for (size_t i = 0; i < plane; ++i) {
            wide(r, c * plane + i) =
                first.weights(r, (c % in_channels) * plane + i) /
                static_cast<double>(channels);
          }
        }
      }
      first.weights = std::move(wide);
    }
  }
  if (config.extra_class_count > 0) {
    LayerGradient& head = p.gradients.back();
    double rms = 0.0;
    for (double w : head.weights.data) rms += w * w;
    rms = std::sqrt(rms / std::max<size_t>(1, head.weights.data.size()));
    const size_t rows = head.weights.rows + config.extra_class_count;
    Matrix grown(rows, head.weights.cols);
    std::copy(head.weights.data.begin(), head.weights.data.end(), grown.data.begin());
    for (size_t i = head.weights.data.size(); i < grown.data.size(); ++i) {
      grown.data[i] = rng.normal(0.0, rms);
    }
    head.weights = std::move(grown);
    for (size_t k = 0; k < config.extra_class_count; ++k) {
      head.biases.push_back(rng.normal(0.0, rms));
    }
  }
  ShapeSignature& sig = p.declared_signature;
  sig.num_classes = model.num_classes + config.extra_class_count;
  sig.channels = channels;
  sig.per_layer_shapes.clear();
  for (const auto& g : p.gradients) {
    sig.per_layer_shapes.push_back({g.weights.rows, g.weights.cols});
  }
  return p;
}

GradientPacket tamper_packet(const ActorConfig& config,
                             const ParameterSnapshot& snapshot, int epoch,
                             uint64_t seed) {
  Rng rng(derive_seed(seed, "tamper"));
  GradientPacket p;
  p.participant_id = config.id;
  p.epoch = epoch;
  p.kind = PayloadKind::kOverwrite;
  p.declared_signature = signature_of(snapshot.model);
  p.nonce = derive_seed(seed, "nonce");
  for (const auto& layer : flat_layers(snapshot.model)) {
    LayerGradient g;
    g.weights = layer.weights;
    g.biases = layer.biases;
    for (double& w : g.weights.data) w += rng.normal(0.0, config.tamper_scale);
    for (double& b : g.biases) b += rng.normal(0.0, config.tamper_scale);
    p.gradients.push_back(std::move(g));
  }
  return p;
}

Actor::Actor(ActorConfig config, const SyntheticSource& source, size_t shard_samples)
    : config_(std::move(config)) {
  validate_actor_config(config_);
  shard_ = make_shard(source, shard_samples, config_.local_dataset_seed);
  train_ = form_batch(shard_.train, source.spec().shape);
  side_train_ = subset(train_, config_.side_shard_samples);
}

size_t Actor::download_requests(int epoch, int slot_start) const {
  if (config_.role == Role::kAdvType2Gan) return config_.download_requests_per_epoch;
  return epoch == slot_start ? 1 : 0;
}

void Actor::receive(const ParameterSnapshot& snapshot) {
  latest_ = snapshot;
  if (config_.role == Role::kAdvType2Gan) harvested_.push_back(snapshot);
}

std::optional<GradientPacket> Actor::upload(int epoch, double mu,
                                            uint64_t seed) const {
  if (!latest_) return std::nullopt;
  switch (config_.role) {
    case Role::kVictim:
      return victim_step(config_, *latest_, train_, epoch, mu, seed).packet;
    case Role::kAdvType2Gan:
      return victim_step(config_, *latest_, side_train_, epoch, mu, seed).packet;
    case Role::kAdvType3Poison: {
      if (config_.poison->kind == PoisonKind::kLabelShuffle) {
        MultiViewBatch shuffled = train_;
        Rng rng(derive_seed(seed, "label-shuffle"));
        rng.shuffle(std::span<size_t>(shuffled.labels));
        return victim_step(config_, *latest_, shuffled, epoch, mu, seed).packet;
      }
      GradientPacket p = victim_step(config_, *latest_, train_, epoch, mu, seed).packet;
      poison_gradients(p.gradients, *config_.poison);
      return p;
    }
    case Role::kAdvType4ClassInject: {
      GradientPacket p = victim_step(config_, *latest_, train_, epoch, mu, seed).packet;
      return class_inject_packet(config_, p, latest_->model, seed);
    }
    case Role::kAdvType5ParamTamper:
      return tamper_packet(config_, *latest_, epoch, seed);
  }
  return std::nullopt;
}

}  // namespace cdl_sentinel

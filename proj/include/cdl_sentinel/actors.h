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

#ifndef CDL_SENTINEL_ACTORS_H_
#define CDL_SENTINEL_ACTORS_H_

// Participant behaviour: the honest victim and adversary types 2 to 5.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdl_sentinel/dataset.h"
#include "cdl_sentinel/multiview.h"
#include "cdl_sentinel/protocol.h"
#include "cdl_sentinel/snapshot.h"

namespace cdl_sentinel {

enum class Role {
  kVictim,
  kAdvType2Gan,
  kAdvType3Poison,
  kAdvType4ClassInject,
  kAdvType5ParamTamper,
};

std::string_view role_name(Role role);
std::optional<Role> parse_role(std::string_view name);
inline bool is_adversary(Role role) { return role != Role::kVictim; }

enum class PoisonKind { kNanInject, kSignFlipScale, kLabelShuffle };

std::string_view poison_name(PoisonKind kind);
std::optional<PoisonKind> parse_poison(std::string_view name);

struct PoisonSpec {
  PoisonKind kind = PoisonKind::kSignFlipScale;
  double scale = 10.0;  // sign_flip_scale only

  bool operator==(const PoisonSpec&) const = default;
};

struct ActorConfig {
  std::string id;
  Role role = Role::kVictim;
  uint64_t local_dataset_seed = 0;
  size_t local_epochs_per_slot = 2;
  std::optional<PoisonSpec> poison;  // type 3 only
  size_t extra_class_count = 0;      // type 4
  size_t declared_channels = 0;      // type 4; 0 keeps the model's channels
  size_t download_requests_per_epoch = 2;  // type 2
  size_t side_shard_samples = 40;          // type 2 covert training set
  double tamper_scale = 50.0;              // type 5 overwrite noise

  bool operator==(const ActorConfig&) const = default;
};

// Throws ConfigError naming the offending field.
void validate_actor_config(const ActorConfig& config);

struct LocalUpdate {
  GradientPacket packet;
  double loss_before = 0.0;          // on the training split, at download
  std::vector<double> epoch_losses;  // after each local epoch
};

// Honest local training: `local_epochs_per_slot` shuffled SGD passes at
// rate `mu`, uploaded as (downloaded - trained) / mu with a truthful
// signature. Deterministic in (config, snapshot, seed).
LocalUpdate victim_step(const ActorConfig& config, const ParameterSnapshot& snapshot,
                        const MultiViewBatch& train, int epoch, double mu,
                        uint64_t seed);

// Applies a type-3 corruption to an honest packet (label_shuffle is applied
// to the training data instead; see Actor).
void poison_gradients(GradientSet& grads, const PoisonSpec& spec);

// Type-4 packet: an honest update whose head gains extra_class_count rows
// and whose first branch layers widen to declared_channels.
GradientPacket class_inject_packet(const ActorConfig& config,
                                   const GradientPacket& honest,
                                   const MultiViewModel& model, uint64_t seed);

// Type-5 packet: the snapshot's parameters plus N(0, tamper_scale) noise,
// flagged as a direct overwrite.
GradientPacket tamper_packet(const ActorConfig& config,
                             const ParameterSnapshot& snapshot, int epoch,
                             uint64_t seed);

class Actor {
 public:
  Actor(ActorConfig config, const SyntheticSource& source, size_t shard_samples);

  const ActorConfig& config() const { return config_; }
  const Shard& shard() const { return shard_; }

  // Download requests issued in `epoch` for a slot starting at `slot_start`.
  size_t download_requests(int epoch, int slot_start) const;

  void receive(const ParameterSnapshot& snapshot);
  const std::vector<ParameterSnapshot>& harvested() const { return harvested_; }

  // The packet sent at the end of a slot, or nothing without a snapshot.
  std::optional<GradientPacket> upload(int epoch, double mu, uint64_t seed) const;

 private:
  ActorConfig config_;
  Shard shard_;
  MultiViewBatch train_;
  MultiViewBatch side_train_;
  std::optional<ParameterSnapshot> latest_;
  std::vector<ParameterSnapshot> harvested_;
};

}  // namespace cdl_sentinel

#endif  // CDL_SENTINEL_ACTORS_H_

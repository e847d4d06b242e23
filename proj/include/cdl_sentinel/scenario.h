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

#ifndef CDL_SENTINEL_SCENARIO_H_
#define CDL_SENTINEL_SCENARIO_H_

// Scenario files: JSON, unknown keys rejected, documented defaults for
// everything except the participant roster.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdl_sentinel/actors.h"
#include "cdl_sentinel/gan.h"
#include "cdl_sentinel/multiview.h"

namespace cdl_sentinel {

enum class OracleMode { kGroundTruth, kAlwaysConfirm, kNeverConfirm };

std::string_view oracle_mode_name(OracleMode mode);

struct ThresholdConfig {
  double delta_det = 0.05;
  double theta_explode = 1e3;
  double theta_vanish = 1e-8;
};

struct ModelSpec {
  size_t num_views = 4;
  InputShape shape;
  std::vector<size_t> hidden_spec{64};
};

struct DatasetConfig {
  size_t num_classes = 10;
  size_t samples_per_shard = 300;
  double noise_sigma = 0.05;
  // Class templates; when unset they derive from the run seed.
  std::optional<uint64_t> template_seed;
};

struct AttackSettings {
  bool enabled = true;
  size_t target_class = 0;
  size_t budget = kDefaultAttackBudget;
};

struct ScenarioConfig {
  std::string name = "scenario";
  uint64_t seed = 1;
  int epochs = 24;
  int slot_length = 2;
  bool repeat_slots = true;  // false: every participant gets one slot
  int credential_trials = 3;
  ThresholdConfig thresholds;
  OracleMode oracle_mode = OracleMode::kGroundTruth;
  double learning_rate = 0.1;
  double decay_factor = 0.99;
  ModelSpec model;
  DatasetConfig dataset;
  size_t validation_samples = 200;  // server-held validation set
  size_t fast_check_branch = 0;
  AttackSettings attack;
  std::vector<ActorConfig> participants;
};

// Throws ConfigError naming the first offending field.
ScenarioConfig parse_scenario(std::string_view json_text);
ScenarioConfig load_scenario(const std::filesystem::path& path);
void validate_scenario(const ScenarioConfig& config);

}  // namespace cdl_sentinel

#endif  // CDL_SENTINEL_SCENARIO_H_

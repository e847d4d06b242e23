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

#include "cdl_sentinel/scenario.h"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cdl_sentinel/errors.h"
#include "cdl_sentinel/rng.h"

namespace cdl_sentinel {
namespace {

using nlohmann::json;

std::string join(const std::string& prefix, std::string_view key) {
  return prefix.empty() ? std::string(key) : prefix + "." + std::string(key);
}

void reject_unknown(const json& j, const std::string& prefix,
                    std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (auto a : allowed) known = known || it.key() == a;
    if (!known) throw ConfigError(join(prefix, it.key()), "unknown key");
  }
}

uint64_t get_u64(const json& j, std::string_view key, const std::string& field,
                 uint64_t fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_unsigned()) throw ConfigError(field, "expected a non-negative integer");
  return it->get<uint64_t>();
}

size_t get_size(const json& j, std::string_view key, const std::string& field,
                size_t fallback) {
  return static_cast<size_t>(get_u64(j, key, field, fallback));
}

int get_int(const json& j, std::string_view key, const std::string& field,
            int fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number_integer()) throw ConfigError(field, "expected an integer");
  return it->get<int>();
}

double get_double(const json& j, std::string_view key, const std::string& field,
                  double fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_number()) throw ConfigError(field, "expected a number");
  return it->get<double>();
}

bool get_bool(const json& j, std::string_view key, const std::string& field,
              bool fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) throw ConfigError(field, "expected true or false");
  return it->get<bool>();
}

std::string get_string(const json& j, std::string_view key,
                       const std::string& field, const std::string& fallback) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string()) throw ConfigError(field, "expected a string");
  return it->get<std::string>();
}

ActorConfig parse_participant(const json& j, size_t index, uint64_t run_seed) {
  const std::string at = "participants[" + std::to_string(index) + "]";
  reject_unknown(j, at,
                 {"id", "role", "local_dataset_seed", "local_epochs_per_slot",
                  "poison", "extra_class_count", "declared_channels",
                  "download_requests_per_epoch", "side_shard_samples",
                  "tamper_scale"});
  ActorConfig c;
  if (!j.contains("role")) throw ConfigError(join(at, "role"), "missing field");
  const std::string role = get_string(j, "role", join(at, "role"), "");
  const auto parsed = parse_role(role);
  if (!parsed) throw ConfigError(join(at, "role"), "unknown role '" + role + "'");
  c.role = *parsed;
  c.id = get_string(j, "id", join(at, "id"),
                    role + "-" + std::to_string(index));
  c.local_dataset_seed = get_u64(j, "local_dataset_seed", join(at, "local_dataset_seed"),
                                 derive_seed(run_seed, "actor-data", index));
  c.local_epochs_per_slot = get_size(j, "local_epochs_per_slot",
                                     join(at, "local_epochs_per_slot"),
                                     c.local_epochs_per_slot);
  if (auto it = j.find("poison"); it != j.end()) {
    const std::string p = join(at, "poison");
    reject_unknown(*it, p, {"kind", "k"});
    if (!it->contains("kind")) throw ConfigError(join(p, "kind"), "missing field");
    const std::string kind = get_string(*it, "kind", join(p, "kind"), "");
    const auto pk = parse_poison(kind);
    if (!pk) throw ConfigError(join(p, "kind"), "unknown poison '" + kind + "'");
    PoisonSpec spec;
    spec.kind = *pk;
    spec.scale = get_double(*it, "k", join(p, "k"), spec.scale);
    if (spec.kind != PoisonKind::kSignFlipScale && it->contains("k")) {
      throw ConfigError(join(p, "k"), "only valid for sign_flip_scale");
    }
    c.poison = spec;
  }
  c.extra_class_count = get_size(j, "extra_class_count", join(at, "extra_class_count"), 0);
  c.declared_channels = get_size(j, "declared_channels", join(at, "declared_channels"), 0);
  if (c.role == Role::kAdvType4ClassInject && !j.contains("extra_class_count") &&
      !j.contains("declared_channels")) {
    c.extra_class_count = 1;
  }
  c.download_requests_per_epoch =
      get_size(j, "download_requests_per_epoch",
               join(at, "download_requests_per_epoch"), c.download_requests_per_epoch);
  c.side_shard_samples = get_size(j, "side_shard_samples",
                                  join(at, "side_shard_samples"), c.side_shard_samples);
  c.tamper_scale = get_double(j, "tamper_scale", join(at, "tamper_scale"), c.tamper_scale);
  try {
    validate_actor_config(c);
  } catch (const ConfigError& e) {
    throw ConfigError(join(at, e.field()), e.message());
  }
  return c;
}

}  // namespace

std::string_view oracle_mode_name(OracleMode mode) {
  switch (mode) {
    case OracleMode::kGroundTruth: return "ground_truth";
    case OracleMode::kAlwaysConfirm: return "always_confirm";
    case OracleMode::kNeverConfirm: return "never_confirm";
  }
  return "unknown";
}

ScenarioConfig parse_scenario(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<root>", std::string("malformed JSON: ") + e.what());
  }
  reject_unknown(root, "",
                 {"name", "seed", "epochs", "slot_length", "repeat_slots",
                  "credential_trials", "thresholds", "oracle_mode",
                  "learning_rate", "decay_factor", "model", "dataset",
                  "validation_samples", "fast_check_branch", "attack",
                  "participants"});
  ScenarioConfig c;
  c.name = get_string(root, "name", "name", c.name);
  c.seed = get_u64(root, "seed", "seed", c.seed);
  c.epochs = get_int(root, "epochs", "epochs", c.epochs);
  c.slot_length = get_int(root, "slot_length", "slot_length", c.slot_length);
  c.repeat_slots = get_bool(root, "repeat_slots", "repeat_slots", c.repeat_slots);
  c.credential_trials =
      get_int(root, "credential_trials", "credential_trials", c.credential_trials);
  c.learning_rate = get_double(root, "learning_rate", "learning_rate", c.learning_rate);
  c.decay_factor = get_double(root, "decay_factor", "decay_factor", c.decay_factor);
  c.validation_samples =
      get_size(root, "validation_samples", "validation_samples", c.validation_samples);
  c.fast_check_branch =
      get_size(root, "fast_check_branch", "fast_check_branch", c.fast_check_branch);

  if (auto it = root.find("thresholds"); it != root.end()) {
    reject_unknown(*it, "thresholds", {"delta_det", "theta_explode", "theta_vanish"});
    auto& t = c.thresholds;
    t.delta_det = get_double(*it, "delta_det", "thresholds.delta_det", t.delta_det);
    t.theta_explode =
        get_double(*it, "theta_explode", "thresholds.theta_explode", t.theta_explode);
    t.theta_vanish =
        get_double(*it, "theta_vanish", "thresholds.theta_vanish", t.theta_vanish);
  }
  if (root.contains("oracle_mode")) {
    const std::string mode = get_string(root, "oracle_mode", "oracle_mode", "");
    if (mode == "ground_truth") {
      c.oracle_mode = OracleMode::kGroundTruth;
    } else if (mode == "always_confirm") {
      c.oracle_mode = OracleMode::kAlwaysConfirm;
    } else if (mode == "never_confirm") {
      c.oracle_mode = OracleMode::kNeverConfirm;
    } else {
      throw ConfigError("oracle_mode", "unknown mode '" + mode + "'");
    }
  }
  if (auto it = root.find("model"); it != root.end()) {
    reject_unknown(*it, "model", {"num_views", "channels", "height", "width", "hidden_spec"});
    auto& m = c.model;
    m.num_views = get_size(*it, "num_views", "model.num_views", m.num_views);
    m.shape.channels = get_size(*it, "channels", "model.channels", m.shape.channels);
    m.shape.height = get_size(*it, "height", "model.height", m.shape.height);
    m.shape.width = get_size(*it, "width", "model.width", m.shape.width);
    if (auto h = it->find("hidden_spec"); h != it->end()) {
      if (!h->is_array()) throw ConfigError("model.hidden_spec", "expected an array");
      m.hidden_spec.clear();
      for (size_t i = 0; i < h->size(); ++i) {
        const auto& v = (*h)[i];
        if (!v.is_number_unsigned()) {
          throw ConfigError("model.hidden_spec[" + std::to_string(i) + "]",
                            "expected a non-negative integer");
        }
        m.hidden_spec.push_back(v.get<size_t>());
      }
    }
  }
  if (auto it = root.find("dataset"); it != root.end()) {
    reject_unknown(*it, "dataset",
                   {"num_classes", "samples_per_shard", "noise_sigma", "template_seed"});
    auto& d = c.dataset;
    d.num_classes = get_size(*it, "num_classes", "dataset.num_classes", d.num_classes);
    d.samples_per_shard =
        get_size(*it, "samples_per_shard", "dataset.samples_per_shard", d.samples_per_shard);
    d.noise_sigma = get_double(*it, "noise_sigma", "dataset.noise_sigma", d.noise_sigma);
    if (it->contains("template_seed")) {
      d.template_seed = get_u64(*it, "template_seed", "dataset.template_seed", 0);
    }
  }
  if (auto it = root.find("attack"); it != root.end()) {
    reject_unknown(*it, "attack", {"enabled", "target_class", "budget"});
    auto& a = c.attack;
    a.enabled = get_bool(*it, "enabled", "attack.enabled", a.enabled);
    a.target_class = get_size(*it, "target_class", "attack.target_class", a.target_class);
    a.budget = get_size(*it, "budget", "attack.budget", a.budget);
  }
  auto parts = root.find("participants");
  if (parts == root.end()) throw ConfigError("participants", "missing field");
  if (!parts->is_array()) throw ConfigError("participants", "expected an array");
  for (size_t i = 0; i < parts->size(); ++i) {
    c.participants.push_back(parse_participant((*parts)[i], i, c.seed));
  }
  validate_scenario(c);
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("<file>", "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

void validate_scenario(const ScenarioConfig& c) {
  if (c.epochs < 0) throw ConfigError("epochs", "must be non-negative");
  if (c.slot_length <= 0) throw ConfigError("slot_length", "must be positive");
  if (c.epochs % c.slot_length != 0) {
    throw ConfigError("epochs", "must be divisible by slot_length");
  }
  if (c.participants.empty()) throw ConfigError("participants", "at least one required");
  if (c.credential_trials < 1) throw ConfigError("credential_trials", "must be >= 1");
  if (!(c.learning_rate > 0.0)) throw ConfigError("learning_rate", "must be positive");
  if (!(c.decay_factor > 0.0 && c.decay_factor <= 1.0)) {
    throw ConfigError("decay_factor", "must be in (0, 1]");
  }
  const auto& t = c.thresholds;
  if (!(t.delta_det >= 0.0)) throw ConfigError("thresholds.delta_det", "must be >= 0");
  if (!(t.theta_vanish >= 0.0 && t.theta_explode > t.theta_vanish)) {
    throw ConfigError("thresholds.theta_explode", "must exceed theta_vanish");
  }
  const auto& m = c.model;
  if (m.num_views == 0) throw ConfigError("model.num_views", "must be >= 1");
  if (m.shape.size() == 0) throw ConfigError("model.channels", "zero-sized input");
  if (m.hidden_spec.empty()) throw ConfigError("model.hidden_spec", "must be non-empty");
  for (size_t h : m.hidden_spec) {
    if (h == 0) throw ConfigError("model.hidden_spec", "zero-sized layer");
  }
  if (c.dataset.num_classes == 0) throw ConfigError("dataset.num_classes", "must be >= 1");
  if (c.dataset.samples_per_shard < 10) {
    throw ConfigError("dataset.samples_per_shard", "must be >= 10");
  }
  if (!(c.dataset.noise_sigma >= 0.0)) {
    throw ConfigError("dataset.noise_sigma", "must be >= 0");
  }
  if (c.fast_check_branch >= m.num_views) {
    throw ConfigError("fast_check_branch", "must name an existing branch");
  }
  if (c.attack.target_class >= c.dataset.num_classes) {
    throw ConfigError("attack.target_class", "out of range");
  }
  std::set<std::string> ids;
  for (size_t i = 0; i < c.participants.size(); ++i) {
    const std::string at = "participants[" + std::to_string(i) + "]";
    try {
      validate_actor_config(c.participants[i]);
    } catch (const ConfigError& e) {
      throw ConfigError(join(at, e.field()), e.message());
    }
    if (!ids.insert(c.participants[i].id).second) {
      throw ConfigError(join(at, "id"), "duplicate id");
    }
  }
}

}  // namespace cdl_sentinel

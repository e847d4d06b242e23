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

#ifndef CDL_SENTINEL_HARNESS_H_
#define CDL_SENTINEL_HARNESS_H_

// Deterministic scenario runs: orchestration, invariant checks, artifacts.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "cdl_sentinel/gan.h"
#include "cdl_sentinel/metrics.h"
#include "cdl_sentinel/scenario.h"
#include "cdl_sentinel/snapshot.h"

namespace cdl_sentinel {

struct AttackReport {
  std::string participant_id;
  ReconstructionResult result;
  double high_frequency_energy = 0.0;  // mean over generated samples
  std::vector<uint64_t> snapshot_versions;
};

struct EpochRecord {
  int epoch = 0;
  uint64_t version = 0;  // after the epoch
  uint64_t digest_before = 0;
  uint64_t digest_after = 0;
  bool firewall_engaged = false;
  bool live_unchanged = true;  // serialized live parameters byte-equal across the epoch
  std::string owner;  // slot owner, empty when idle
};

struct RunTiming {
  double protocol_seconds = 0.0;
  double attack_seconds = 0.0;
  int threads = 0;
};

struct RunReport {
  std::string scenario_name;
  std::vector<std::string> event_log;
  std::map<std::string, std::string> roles;  // id -> role name
  ConfusionMatrix confusion;
  MetricReport metrics;
  DetectionReport detection;
  std::vector<AttackReport> attacks;
  std::vector<EpochRecord> epochs;
  ParameterSnapshot initial_snapshot;
  ParameterSnapshot final_snapshot;
  std::vector<ParameterSnapshot> snapshot_history;  // every version, if kept
  std::vector<double> target_class_mean;  // innocents' mean image, attack target
  InputShape shape;
  std::optional<RunTiming> timing;

  std::string event_log_text() const;
};

struct RunOptions {
  bool record_timing = false;
  bool keep_snapshots = false;
};

// Throws InvariantError when a protocol invariant is breached.
RunReport run_scenario(const ScenarioConfig& config, const RunOptions& options = {});

// Scans a finished log against the slot schedule and credential limits.
// Throws InvariantError describing the first breach.
void check_log_invariants(const std::vector<std::string>& event_log,
                          const ScenarioConfig& config);

// Writes events.jsonl, metrics.csv, confusion.csv, detection.csv,
// versions.csv, attacks.csv, snapshots/, one PGM grid per attack and, when
// timing was recorded, timing.json. I/O failures throw with the path.
void emit_report(const RunReport& report, const std::filesystem::path& out_dir);

// One-screen human summary.
std::string summarize(const RunReport& report);

// One seeded draw of the attack-distinction experiment. A victims-only run
// of `base` (with its seed replaced) supplies the snapshots: rich access is
// every aggregated version, capped access is three copies of the untrained
// version 0. The noise arm scores `sample_count` uniform-noise images.
struct AttackTrial {
  uint64_t seed = 0;
  ReconstructionResult rich;
  ReconstructionResult capped;
  double rich_hf = 0.0;
  double capped_hf = 0.0;
  double noise_error = 0.0;
  double noise_hf = 0.0;
  size_t rich_snapshots = 0;
};

AttackTrial run_attack_trial(const ScenarioConfig& base, uint64_t seed,
                             const AttackConfig& attack = {});

struct LogComparison {
  bool match = true;
  size_t first_mismatch = 0;  // 1-based line number
  std::string expected;
  std::string actual;
};

LogComparison compare_logs(std::string_view expected, std::string_view actual);

}  // namespace cdl_sentinel

#endif  // CDL_SENTINEL_HARNESS_H_

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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "cdl_sentinel/errors.h"
#include "cdl_sentinel/harness.h"
#include "cdl_sentinel/kernels.h"
#include "test_util.h"

namespace cdl_sentinel {
namespace {

namespace fs = std::filesystem;

std::string source_path(const std::string& rel) {
  return std::string(CDL_SOURCE_DIR) + "/" + rel;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// A quick world: 2 views of 8x8, 4 classes, every adversary type.
ScenarioConfig small_mixed() {
  return parse_scenario(R"({
    "name": "small", "seed": 5, "epochs": 12, "slot_length": 2,
    "model": {"num_views": 2, "height": 8, "width": 8, "hidden_spec": [16]},
    "dataset": {"num_classes": 4, "samples_per_shard": 80},
    "validation_samples": 60,
    "attack": {"budget": 20},
    "participants": [
      {"id": "g", "role": "adv_type2_gan"},
      {"id": "v0", "role": "victim"},
      {"id": "p", "role": "adv_type3_poison", "poison": {"kind": "nan_inject"}},
      {"id": "i", "role": "adv_type4_class_inject"},
      {"id": "t", "role": "adv_type5_param_tamper"},
      {"id": "v1", "role": "victim"}
    ]})");
}

TEST(Harness, SameConfigTwiceGivesIdenticalLogsAndSnapshots) {
  const auto c = small_mixed();
  const auto a = run_scenario(c);
  const auto b = run_scenario(c);
  EXPECT_EQ(a.event_log_text(), b.event_log_text());
  EXPECT_EQ(a.final_snapshot, b.final_snapshot);
  EXPECT_EQ(a.attacks.size(), 1u);
  EXPECT_EQ(a.attacks[0].result.generated_samples, b.attacks[0].result.generated_samples);
}

TEST(Harness, ThreadCountDoesNotChangeTheLog) {
  const auto c = small_mixed();
  const int saved = kernels::thread_cap();
  kernels::set_thread_cap(1);
  const auto one = run_scenario(c).event_log_text();
  kernels::set_thread_cap(4);
  const auto four = run_scenario(c).event_log_text();
  kernels::set_thread_cap(saved);
  EXPECT_EQ(one, four);
}

TEST(Harness, EveryAdversaryCaughtNoInnocentConfirmed) {
  const auto r = run_scenario(small_mixed());
  EXPECT_EQ(r.detection.detection_rate, 1.0);
  EXPECT_EQ(r.detection.false_alarm_rate, 0.0);
  // The type-2 attacker only ever holds what its credential allowed.
  ASSERT_EQ(r.attacks.size(), 1u);
  EXPECT_LE(r.attacks[0].result.snapshots_used, 3u);
}

TEST(Harness, FirewallEpochsLeaveLiveUnchanged) {
  const auto r = run_scenario(small_mixed());
  int engaged = 0;
  for (const auto& e : r.epochs) {
    if (e.firewall_engaged) {
      ++engaged;
      EXPECT_EQ(e.digest_before, e.digest_after) << "epoch " << e.epoch;
    }
  }
  EXPECT_GE(engaged, 3);
}

TEST(Harness, ZeroEpochRunProducesEmptyArtifacts) {
  auto c = small_mixed();
  c.epochs = 0;
  const auto r = run_scenario(c);
  EXPECT_EQ(r.event_log.size(), 1u);  // server_init only
  EXPECT_TRUE(r.epochs.empty());
  EXPECT_TRUE(r.attacks.empty());
  const auto dir = testing_util::scratch_dir("empty_run");
  EXPECT_NO_THROW(emit_report(r, dir));
  EXPECT_TRUE(fs::exists(dir / "events.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "metrics.csv"));
}

TEST(Harness, ReportFilesExistParseAndReEmitIdentically) {
  const auto r = run_scenario(small_mixed());
  const auto d1 = testing_util::scratch_dir("emit1");
  const auto d2 = testing_util::scratch_dir("emit2");
  emit_report(r, d1);
  emit_report(r, d2);
  const std::vector<std::string> files{
      "events.jsonl",   "metrics.csv",  "confusion.csv",
      "detection.csv",  "versions.csv", "attacks.csv",
      "snapshots/initial.snap", "snapshots/final.snap", "attack_g.pgm"};
  for (const auto& f : files) {
    ASSERT_TRUE(fs::exists(d1 / f)) << f;
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  }
  std::istringstream events(slurp(d1 / "events.jsonl"));
  std::string line;
  size_t n = 0;
  while (std::getline(events, line)) {
    EXPECT_NO_THROW(nlohmann::json::parse(line));
    ++n;
  }
  EXPECT_EQ(n, r.event_log.size());
  EXPECT_EQ(read_snapshot_file(d1 / "snapshots/final.snap"), r.final_snapshot);
  EXPECT_FALSE(fs::exists(d1 / "timing.json"));
}

TEST(Harness, TimingWrittenOnlyOnRequest) {
  RunOptions opt;
  opt.record_timing = true;
  auto c = small_mixed();
  c.epochs = 2;
  const auto r = run_scenario(c, opt);
  ASSERT_TRUE(r.timing.has_value());
  const auto dir = testing_util::scratch_dir("timing");
  emit_report(r, dir);
  const auto j = nlohmann::json::parse(slurp(dir / "timing.json"));
  EXPECT_TRUE(j.contains("threads"));
}

TEST(Harness, LogInvariantCheckerCatchesBreaches) {
  const auto c = small_mixed();
  const auto r = run_scenario(c);
  EXPECT_NO_THROW(check_log_invariants(r.event_log, c));

  auto out_of_slot = r.event_log;
  out_of_slot.push_back(
      R"({"epoch":2,"seq":99,"actor":"g","event":"download_granted","reason":"2","payload_digest":null})");
  EXPECT_THROW(check_log_invariants(out_of_slot, c), InvariantError);

  auto too_many = r.event_log;
  for (int i = 0; i < 4; ++i) {
    too_many.push_back(
        R"({"epoch":2,"seq":99,"actor":"v0","event":"download_granted","reason":"0","payload_digest":null})");
  }
  EXPECT_THROW(check_log_invariants(too_many, c), InvariantError);

  auto after_blacklist = r.event_log;
  after_blacklist.push_back(
      R"({"epoch":12,"seq":0,"actor":"g","event":"upload_received","reason":"","payload_digest":null})");
  auto c2 = c;
  c2.epochs = 14;
  EXPECT_THROW(check_log_invariants(after_blacklist, c2), InvariantError);
}

TEST(Harness, GoldenMixedAttackLogMatches) {
  auto c = load_scenario(source_path("scenarios/mixed_attack.json"));
  c.attack.enabled = false;
  const auto r = run_scenario(c);
  const auto cmp = compare_logs(slurp(source_path("tests/golden/mixed_attack.jsonl")),
                                r.event_log_text());
  EXPECT_TRUE(cmp.match) << "line " << cmp.first_mismatch << "\n  expected " << cmp.expected
                         << "\n  actual   " << cmp.actual;
}

TEST(Harness, CompareLogsReportsFirstMismatch) {
  EXPECT_TRUE(compare_logs("a\nb\n", "a\nb\n").match);
  const auto c = compare_logs("a\nb\nc\n", "a\nx\nc\n");
  EXPECT_FALSE(c.match);
  EXPECT_EQ(c.first_mismatch, 2u);
  EXPECT_EQ(c.expected, "b");
  EXPECT_EQ(c.actual, "x");
  const auto shorter = compare_logs("a\nb\n", "a\n");
  EXPECT_FALSE(shorter.match);
  EXPECT_EQ(shorter.first_mismatch, 2u);
}

TEST(Harness, AttackTrialRequiresVictimsOnly) {
  EXPECT_THROW(run_attack_trial(small_mixed(), 1), ConfigError);
}

}  // namespace
}  // namespace cdl_sentinel

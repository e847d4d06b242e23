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

// Command-line front end: run, validate and replay-check scenarios.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "cdl_sentinel/errors.h"
#include "cdl_sentinel/harness.h"
#include "cdl_sentinel/kernels.h"
#include "cdl_sentinel/scenario.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInvariant = 3;
constexpr int kExitGolden = 4;

int run(const std::string& scenario, const std::string& out_dir, bool timing) {
  const auto config = cdl_sentinel::load_scenario(scenario);
  cdl_sentinel::RunOptions options;
  options.record_timing = timing;
  const auto report = cdl_sentinel::run_scenario(config, options);
  cdl_sentinel::emit_report(report, out_dir);
  std::cout << cdl_sentinel::summarize(report);
  std::cout << "artifacts       " << out_dir << "\n";
  return kExitOk;
}

int validate(const std::string& scenario) {
  const auto config = cdl_sentinel::load_scenario(scenario);
  std::cout << "ok: " << config.name << " (" << config.participants.size()
            << " participants, " << config.epochs << " epochs)\n";
  return kExitOk;
}

int replay_check(const std::string& scenario, const std::string& golden_path) {
  const auto config = cdl_sentinel::load_scenario(scenario);
  std::ifstream in(golden_path, std::ios::binary);
  if (!in) {
    std::cerr << "cannot open golden log " << golden_path << "\n";
    return kExitFailure;
  }
  std::stringstream golden;
  golden << in.rdbuf();
  cdl_sentinel::ScenarioConfig replay = config;
  replay.attack.enabled = false;  // the log does not depend on the attack
  const auto report = cdl_sentinel::run_scenario(replay);
  const auto cmp = cdl_sentinel::compare_logs(golden.str(), report.event_log_text());
  if (!cmp.match) {
    std::cerr << "golden mismatch at line " << cmp.first_mismatch << "\n"
              << "  expected: " << cmp.expected << "\n"
              << "  actual:   " << cmp.actual << "\n";
    return kExitGolden;
  }
  std::cout << "replay ok: " << report.event_log.size() << " events match\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative-learning adversary detection simulator"};
  app.require_subcommand(1);

  std::string scenario;
  std::string out_dir;
  std::string golden;
  bool timing = false;

  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write artifacts");
  run_cmd->add_option("scenario", scenario, "Scenario JSON file")->required();
  run_cmd->add_option("-o,--out", out_dir, "Output directory")->required();
  run_cmd->add_flag("--timing", timing, "Also write wall-clock timing.json");

  auto* validate_cmd = app.add_subcommand("validate", "Check a scenario file");
  validate_cmd->add_option("scenario", scenario, "Scenario JSON file")->required();

  auto* replay_cmd =
      app.add_subcommand("replay-check", "Re-run a scenario against a golden log");
  replay_cmd->add_option("scenario", scenario, "Scenario JSON file")->required();
  replay_cmd->add_option("golden", golden, "Golden event log")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    cdl_sentinel::kernels::apply_thread_cap_from_env();
    if (*run_cmd) return run(scenario, out_dir, timing);
    if (*validate_cmd) return validate(scenario);
    if (*replay_cmd) return replay_check(scenario, golden);
  } catch (const cdl_sentinel::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const cdl_sentinel::InvariantError& e) {
    std::cerr << "invariant breach: " << e.what() << "\n";
    return kExitInvariant;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

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

// Calibrates the attack-distinction thresholds.
//
// tau_succ is the 90th percentile (nearest rank) of rich-access
// reconstruction errors; tau_fail is the 10th percentile of the error of
// uniform-noise images scored against the same class mean. Both come from
// the same seeded draws, which are recorded next to the thresholds.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "cdl_sentinel/errors.h"
#include "cdl_sentinel/harness.h"
#include "cdl_sentinel/kernels.h"
#include "cdl_sentinel/scenario.h"

namespace {

double nearest_rank(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  size_t rank = static_cast<size_t>(std::ceil(p * n));
  rank = std::clamp<size_t>(rank, 1, values.size());
  return values[rank - 1];
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Calibrate attack success/failure thresholds"};
  std::string scenario;
  std::string out_path;
  uint64_t first_seed = 1001;
  size_t count = 20;
  app.add_option("scenario", scenario, "Victims-only scenario JSON")->required();
  app.add_option("-o,--out", out_path, "Threshold JSON to write")->required();
  app.add_option("--first-seed", first_seed, "First calibration seed");
  app.add_option("--count", count, "Number of calibration seeds");
  CLI11_PARSE(app, argc, argv);

  try {
    cdl_sentinel::kernels::apply_thread_cap_from_env();
    const auto base = cdl_sentinel::load_scenario(scenario);
    const cdl_sentinel::AttackConfig attack;

    std::vector<uint64_t> seeds;
    std::vector<double> rich, capped, noise, rich_hf, capped_hf, noise_hf;
    for (size_t i = 0; i < count; ++i) {
      const uint64_t seed = first_seed + i;
      const auto t = cdl_sentinel::run_attack_trial(base, seed, attack);
      seeds.push_back(seed);
      rich.push_back(t.rich.final_error);
      capped.push_back(t.capped.final_error);
      noise.push_back(t.noise_error);
      rich_hf.push_back(t.rich_hf);
      capped_hf.push_back(t.capped_hf);
      noise_hf.push_back(t.noise_hf);
      std::cerr << "seed " << seed << " rich " << t.rich.final_error << " capped "
                << t.capped.final_error << " noise " << t.noise_error << "\n";
    }

    nlohmann::ordered_json j;
    j["scenario"] = base.name;
    j["target_class"] = base.attack.target_class;
    j["budget"] = base.attack.budget;
    j["attack"] = {{"noise_dim", attack.noise_dim},
                   {"generator_hidden", attack.generator_hidden},
                   {"batch_size", attack.batch_size},
                   {"learning_rate", attack.learning_rate},
                   {"sample_count", attack.sample_count},
                   {"smoothness_weight", attack.smoothness_weight},
                   {"output_init_scale", attack.output_init_scale}};
    j["tau_succ"] = nearest_rank(rich, 0.9);
    j["tau_fail"] = nearest_rank(noise, 0.1);
    j["hf_noise_p10"] = nearest_rank(noise_hf, 0.1);
    j["calibration_seeds"] = seeds;
    j["rich_errors"] = rich;
    j["capped_errors"] = capped;
    j["noise_errors"] = noise;
    j["rich_hf"] = rich_hf;
    j["capped_hf"] = capped_hf;
    j["noise_hf"] = noise_hf;
    j["summary"] = {{"rich_mean", mean(rich)},
                    {"capped_mean", mean(capped)},
                    {"noise_mean", mean(noise)}};

    std::ofstream out(out_path);
    if (!out) {
      std::cerr << "cannot write " << out_path << "\n";
      return 1;
    }
    out << j.dump(2) << "\n";
    std::cout << "tau_succ " << j["tau_succ"] << " tau_fail " << j["tau_fail"] << "\n";
  } catch (const cdl_sentinel::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

const std::string kCli = CDL_CLI_PATH;
const std::string kSrc = CDL_SOURCE_DIR;

int run(const std::string& args) {
  const std::string cmd = kCli + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("cdl_sentinel_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

TEST(Cli, ValidateAcceptsShippedScenarios) {
  EXPECT_EQ(run("validate " + kSrc + "/scenarios/victims_only.json"), 0);
  EXPECT_EQ(run("validate " + kSrc + "/scenarios/mixed_attack.json"), 0);
}

TEST(Cli, ConfigErrorsExitTwo) {
  const auto dir = scratch("config");
  write(dir / "foo.json", R"({"foo": 1, "participants": [{"role": "victim"}]})");
  write(dir / "div.json",
        R"({"epochs": 10, "slot_length": 3, "participants": [{"role": "victim"}]})");
  EXPECT_EQ(run("validate " + (dir / "foo.json").string()), 2);
  EXPECT_EQ(run("validate " + (dir / "div.json").string()), 2);
  EXPECT_EQ(run("validate " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(run("run " + (dir / "foo.json").string() + " -o " + (dir / "out").string()), 2);
  EXPECT_EQ(run("no-such-verb"), 2);
  EXPECT_EQ(run(""), 2);
}

TEST(Cli, ReplayCheckPassesOnGoldenAndFailsOnTamperedCopy) {
  const std::string scenario = kSrc + "/scenarios/mixed_attack.json";
  const std::string golden = kSrc + "/tests/golden/mixed_attack.jsonl";
  EXPECT_EQ(run("replay-check " + scenario + " " + golden), 0);

  std::ifstream in(golden, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  const auto pos = text.find("version=1");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, 9, "version=9");
  const auto dir = scratch("replay");
  write(dir / "tampered.jsonl", text);
  EXPECT_EQ(run("replay-check " + scenario + " " + (dir / "tampered.jsonl").string()), 4);
}

TEST(Cli, RunWritesArtifacts) {
  const auto dir = scratch("run");
  write(dir / "tiny.json", R"({
    "epochs": 4, "slot_length": 2,
    "model": {"num_views": 2, "height": 8, "width": 8, "hidden_spec": [8]},
    "dataset": {"num_classes": 3, "samples_per_shard": 30},
    "participants": [{"role": "victim"}, {"role": "victim"}]})");
  EXPECT_EQ(run("run " + (dir / "tiny.json").string() + " -o " + (dir / "out").string() +
                " --timing"),
            0);
  for (const char* f : {"events.jsonl", "metrics.csv", "confusion.csv", "detection.csv",
                        "versions.csv", "attacks.csv", "timing.json"}) {
    EXPECT_TRUE(fs::exists(dir / "out" / f)) << f;
  }
}

}  // namespace

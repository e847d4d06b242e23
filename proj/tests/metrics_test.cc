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

#include <algorithm>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cdl_sentinel/errors.h"
#include "cdl_sentinel/metrics.h"
#include "cdl_sentinel/protocol.h"
#include "cdl_sentinel/rng.h"

namespace cdl_sentinel {
namespace {

TEST(Confusion, DiagonalWhenPerfect) {
  const std::vector<size_t> y{0, 1, 2, 2, 1};
  const auto cm = confusion_matrix(y, y, 3);
  EXPECT_EQ(cm.total(), 5u);
  for (size_t t = 0; t < 3; ++t) {
    for (size_t p = 0; p < 3; ++p) {
      if (t != p) EXPECT_EQ(cm.at(t, p), 0u);
    }
  }
  EXPECT_EQ(cm.at(2, 2), 2u);
}

TEST(Confusion, EmptyInputAllZero) {
  const auto cm = confusion_matrix({}, {}, 4);
  EXPECT_EQ(cm.total(), 0u);
  EXPECT_EQ(cm.counts, std::vector<uint64_t>(16, 0));
}

TEST(Confusion, TwelveHandListedPairs) {
  // (truth, pred) pairs, tallied by hand:
  //            pred 0  1  2
  //   truth 0       2  1  0
  //   truth 1       0  3  1
  //   truth 2       1  1  3
  const std::vector<size_t> truth{0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 2};
  const std::vector<size_t> pred{0, 1, 0, 1, 1, 2, 1, 2, 0, 2, 1, 2};
  const auto cm = confusion_matrix(pred, truth, 3);
  EXPECT_EQ(cm.counts, (std::vector<uint64_t>{2, 1, 0, 0, 3, 1, 1, 1, 3}));
}

TEST(Confusion, ContractViolations) {
  const std::vector<size_t> a{0, 1};
  const std::vector<size_t> b{0};
  const std::vector<size_t> c{0, 5};
  EXPECT_THROW(confusion_matrix(a, b, 2), ContractError);
  EXPECT_THROW(confusion_matrix(c, a, 2), ContractError);
}

TEST(Prf, KnownClassValues) {
  // Class 0: TP 9, FN 3 (truth 0 predicted 1), FP 1 (truth 1 predicted 0).
  ConfusionMatrix cm(2);
  cm.at(0, 0) = 9;
  cm.at(0, 1) = 3;
  cm.at(1, 0) = 1;
  cm.at(1, 1) = 7;
  const auto r = precision_recall_f1(cm);
  EXPECT_DOUBLE_EQ(r.per_class[0].precision, 0.9);
  EXPECT_DOUBLE_EQ(r.per_class[0].recall, 0.75);
  EXPECT_NEAR(r.per_class[0].f1, 2 * 0.9 * 0.75 / 1.65, 1e-15);
  EXPECT_NEAR(r.per_class[0].f1, 0.8182, 1e-4);
  EXPECT_DOUBLE_EQ(r.accuracy, 16.0 / 20.0);
  EXPECT_DOUBLE_EQ(r.macro.precision,
                   (r.per_class[0].precision + r.per_class[1].precision) / 2);
}

TEST(Prf, F1Basics) {
  EXPECT_DOUBLE_EQ(f1_score(0.5, 0.5), 0.5);
  EXPECT_EQ(f1_score(0.0, 0.0), 0.0);
  EXPECT_NEAR(f1_score(0.915, 0.925), 0.921, 0.002);
}

TEST(Prf, EmptyClassGivesZeros) {
  ConfusionMatrix cm(3);
  cm.at(0, 0) = 4;
  const auto r = precision_recall_f1(cm);
  EXPECT_EQ(r.per_class[2].precision, 0.0);
  EXPECT_EQ(r.per_class[2].recall, 0.0);
  EXPECT_EQ(r.per_class[2].f1, 0.0);
}

TEST(Prf, PropertyBoundedAndMacroIsMean) {
  Rng rng(61);
  for (int t = 0; t < 200; ++t) {
    const size_t n = 2 + rng.below(6);
    ConfusionMatrix cm(n);
    for (auto& c : cm.counts) c = rng.below(20);
    const auto r = precision_recall_f1(cm);
    double sp = 0, sr = 0, sf = 0;
    for (const auto& c : r.per_class) {
      for (double v : {c.precision, c.recall, c.f1}) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
      }
      sp += c.precision;
      sr += c.recall;
      sf += c.f1;
    }
    EXPECT_NEAR(r.macro.precision, sp / n, 1e-15);
    EXPECT_NEAR(r.macro.recall, sr / n, 1e-15);
    EXPECT_NEAR(r.macro.f1, sf / n, 1e-15);
    EXPECT_GE(r.accuracy, 0.0);
    EXPECT_LE(r.accuracy, 1.0);
  }
}

std::vector<std::string> review_log(const std::vector<std::string>& confirmed) {
  EventLog log;
  log.append(0, "server", "server_init", "", 1);
  for (const auto& id : confirmed) log.append(1, id, "review", "confirm_adversary");
  log.append(2, "v0", "review", "restore");
  return log.lines();
}

TEST(Detection, AllAdversariesCaughtNoFalseAlarms) {
  const std::map<std::string, std::string> roles{
      {"v0", "victim"}, {"v1", "victim"}, {"a", "adv_type2_gan"}, {"b", "adv_type3_poison"}};
  const auto r = detection_report(review_log({"a", "b"}), roles);
  EXPECT_EQ(r.detection_rate, 1.0);
  EXPECT_EQ(r.false_alarm_rate, 0.0);
  EXPECT_EQ(r.per_type.at("adv_type2_gan").confirmed, 1u);
  EXPECT_EQ(r.per_type.at("adv_type2_gan").total, 1u);
}

TEST(Detection, NoAdversariesIsNotApplicable) {
  const std::map<std::string, std::string> roles{{"v0", "victim"}};
  const auto r = detection_report(review_log({}), roles);
  EXPECT_FALSE(r.detection_rate.has_value());
  EXPECT_EQ(r.false_alarm_rate, 0.0);
  std::ostringstream out;
  write_detection_csv(out, r);
  EXPECT_NE(out.str().find("n/a"), std::string::npos);
}

TEST(Detection, InnocentConfirmedCountsAsFalseAlarm) {
  const std::map<std::string, std::string> roles{
      {"v0", "victim"}, {"v1", "victim"}, {"a", "adv_type5_param_tamper"}};
  const auto r = detection_report(review_log({"v1"}), roles);
  EXPECT_EQ(r.detection_rate, 0.0);
  EXPECT_EQ(r.false_alarm_rate, 0.5);
}

TEST(Csv, MetricsAndConfusionLayout) {
  ConfusionMatrix cm(2);
  cm.at(0, 0) = 1;
  cm.at(1, 0) = 1;
  std::ostringstream m;
  write_metrics_csv(m, precision_recall_f1(cm));
  const std::string text = m.str();
  EXPECT_EQ(text.rfind("class,precision,recall,f1\n", 0), 0u);
  EXPECT_NE(text.find("0,0.500000,1.000000,0.666667\n"), std::string::npos);
  EXPECT_NE(text.find("macro,"), std::string::npos);
  std::ostringstream c;
  write_confusion_csv(c, cm);
  const std::string table = c.str();
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
}

}  // namespace
}  // namespace cdl_sentinel

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

#include "cdl_sentinel/metrics.h"

#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "cdl_sentinel/errors.h"

namespace cdl_sentinel {
namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string opt_num(const std::optional<double>& v) {
  return v ? num(*v) : "n/a";
}

double ratio(uint64_t a, uint64_t b) {
  return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b);
}

}  // namespace

uint64_t ConfusionMatrix::total() const {
  uint64_t t = 0;
  for (uint64_t c : counts) t += c;
  return t;
}

ConfusionMatrix confusion_matrix(std::span<const size_t> predictions,
                                 std::span<const size_t> truths,
                                 size_t num_classes) {
  if (predictions.size() != truths.size()) {
    throw ContractError("predictions and truths differ in length");
  }
  ConfusionMatrix cm(num_classes);
  for (size_t i = 0; i < truths.size(); ++i) {
    if (truths[i] >= num_classes || predictions[i] >= num_classes) {
      throw ContractError("class index out of range at position " +
                          std::to_string(i));
    }
    ++cm.at(truths[i], predictions[i]);
  }
  return cm;
}

double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

MetricReport precision_recall_f1(const ConfusionMatrix& cm) {
  const size_t n = cm.num_classes;
  MetricReport report;
  uint64_t diag = 0;
  for (size_t c = 0; c < n; ++c) {
    const uint64_t tp = cm.at(c, c);
    uint64_t col = 0;
    uint64_t row = 0;
    for (size_t k = 0; k < n; ++k) {
      col += cm.at(k, c);
      row += cm.at(c, k);
    }
    ClassMetrics m;
    m.precision = ratio(tp, col);
    m.recall = ratio(tp, row);
    m.f1 = f1_score(m.precision, m.recall);
    report.per_class.push_back(m);
    report.macro.precision += m.precision;
    report.macro.recall += m.recall;
    report.macro.f1 += m.f1;
    diag += tp;
  }
  if (n > 0) {
    report.macro.precision /= static_cast<double>(n);
    report.macro.recall /= static_cast<double>(n);
    report.macro.f1 /= static_cast<double>(n);
  }
  report.accuracy = ratio(diag, cm.total());
  return report;
}

DetectionReport detection_report(std::span<const std::string> event_log,
                                 const std::map<std::string, std::string>& roles) {
  std::set<std::string> confirmed;
  for (const auto& line : event_log) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("event") == "review" && j.at("reason") == "confirm_adversary") {
      confirmed.insert(j.at("actor").get<std::string>());
    }
  }
  DetectionReport report;
  size_t adversaries = 0;
  size_t adversaries_caught = 0;
  size_t innocents = 0;
  size_t innocents_confirmed = 0;
  for (const auto& [id, role] : roles) {
    const bool caught = confirmed.count(id) > 0;
    TypeDetection& t = report.per_type[role];
    ++t.total;
    t.confirmed += caught;
    if (role == "victim") {
      ++innocents;
      innocents_confirmed += caught;
    } else {
      ++adversaries;
      adversaries_caught += caught;
    }
  }
  if (adversaries > 0) report.detection_rate = ratio(adversaries_caught, adversaries);
  if (innocents > 0) report.false_alarm_rate = ratio(innocents_confirmed, innocents);
  return report;
}

void write_metrics_csv(std::ostream& out, const MetricReport& report) {
  out << "class,precision,recall,f1\n";
  for (size_t c = 0; c < report.per_class.size(); ++c) {
    const auto& m = report.per_class[c];
    out << c << ',' << num(m.precision) << ',' << num(m.recall) << ','
        << num(m.f1) << '\n';
  }
  out << "macro," << num(report.macro.precision) << ','
      << num(report.macro.recall) << ',' << num(report.macro.f1) << '\n';
  out << "accuracy," << num(report.accuracy) << ",,\n";
}

void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm) {
  out << "truth\\pred";
  for (size_t p = 0; p < cm.num_classes; ++p) out << ',' << p;
  out << '\n';
  for (size_t t = 0; t < cm.num_classes; ++t) {
    out << t;
    for (size_t p = 0; p < cm.num_classes; ++p) out << ',' << cm.at(t, p);
    out << '\n';
  }
}

void write_detection_csv(std::ostream& out, const DetectionReport& report) {
  out << "scope,confirmed,total,rate\n";
  for (const auto& [role, t] : report.per_type) {
    out << role << ',' << t.confirmed << ',' << t.total << ','
        << num(ratio(t.confirmed, t.total)) << '\n';
  }
  out << "detection_rate,,," << opt_num(report.detection_rate) << '\n';
  out << "false_alarm_rate,,," << opt_num(report.false_alarm_rate) << '\n';
}

}  // namespace cdl_sentinel

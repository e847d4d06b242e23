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

#ifndef CDL_SENTINEL_METRICS_H_
#define CDL_SENTINEL_METRICS_H_

// Classification metrics and protocol-level detection rates.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace cdl_sentinel {

struct ConfusionMatrix {
  size_t num_classes = 0;
  std::vector<uint64_t> counts;  // rows = truth, columns = prediction

  explicit ConfusionMatrix(size_t n = 0) : num_classes(n), counts(n * n, 0) {}

  uint64_t at(size_t truth, size_t pred) const {
    return counts[truth * num_classes + pred];
  }
  uint64_t& at(size_t truth, size_t pred) {
    return counts[truth * num_classes + pred];
  }
  uint64_t total() const;

  bool operator==(const ConfusionMatrix&) const = default;
};

// Throws ContractError on length mismatch or out-of-range indices.
ConfusionMatrix confusion_matrix(std::span<const size_t> predictions,
                                 std::span<const size_t> truths,
                                 size_t num_classes);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricReport {
  std::vector<ClassMetrics> per_class;
  ClassMetrics macro;  // unweighted means of the per-class values
  double accuracy = 0.0;
};

// Harmonic mean; 0 when p + r == 0.
double f1_score(double precision, double recall);

// A zero denominator yields 0 for that quantity.
MetricReport precision_recall_f1(const ConfusionMatrix& cm);

struct TypeDetection {
  size_t confirmed = 0;
  size_t total = 0;
};

struct DetectionReport {
  std::optional<double> detection_rate;    // empty without adversaries
  std::optional<double> false_alarm_rate;  // empty without innocents
  std::map<std::string, TypeDetection> per_type;  // keyed by role name
};

// `roles` maps participant id to role name; "victim" marks innocents.
// Counts "review" events with reason "confirm_adversary" in a JSON-lines log.
DetectionReport detection_report(std::span<const std::string> event_log,
                                 const std::map<std::string, std::string>& roles);

// class,precision,recall,f1 rows, then a macro row and an accuracy row.
void write_metrics_csv(std::ostream& out, const MetricReport& report);
// Header row of predicted classes; one row per true class.
void write_confusion_csv(std::ostream& out, const ConfusionMatrix& cm);
void write_detection_csv(std::ostream& out, const DetectionReport& report);

}  // namespace cdl_sentinel

#endif  // CDL_SENTINEL_METRICS_H_

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

#ifndef CDL_SENTINEL_PROTOCOL_H_
#define CDL_SENTINEL_PROTOCOL_H_

// Server side of the collaborative training protocol: credentials and epoch
// slots on the download path; check node, blank-model probe, single-branch
// fast-check and the firewall gate on the upload path; review tickets,
// confidence rating and weighted aggregation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cdl_sentinel/multiview.h"
#include "cdl_sentinel/numeric.h"
#include "cdl_sentinel/snapshot.h"

namespace cdl_sentinel {

// ---------------------------------------------------------------------------
// Event log.

// Append-only JSON-lines log. seq restarts at 0 in every epoch.
class EventLog {
 public:
  void append(int epoch, std::string_view actor, std::string_view event,
              std::string_view reason,
              std::optional<uint64_t> payload_digest = std::nullopt);

  const std::vector<std::string>& lines() const { return lines_; }
  std::string text() const;  // lines joined, each terminated by '\n'

 private:
  std::vector<std::string> lines_;
  int epoch_ = -1;
  uint64_t seq_ = 0;
};

// 16 lowercase hex digits.
std::string digest_hex(uint64_t digest);

// ---------------------------------------------------------------------------
// Credentials and slots.

struct Credential {
  std::string participant_id;
  int trials_remaining = 0;
  int issued_at_epoch = 0;
  bool revoked = false;
};

struct EpochSlot {
  std::string participant_id;
  int start_epoch = 0;
  int end_epoch = 0;  // exclusive

  bool contains(int epoch) const {
    return epoch >= start_epoch && epoch < end_epoch;
  }
};

// Consecutive slots of `slot_length` epochs handed out in participant order.
// With `cyclic` the rotation repeats until `epochs` is covered; otherwise each
// participant owns exactly one slot and later epochs have no owner.
// Throws ConfigError on non-positive lengths or epochs % slot_length != 0.
std::vector<EpochSlot> make_schedule(const std::vector<std::string>& participants,
                                     int epochs, int slot_length, bool cyclic);

// ---------------------------------------------------------------------------
// Packets and the check node.

struct ShapeSignature {
  size_t num_classes = 0;
  size_t channels = 0;
  size_t height = 0;
  size_t width = 0;
  // (out_dim, in_dim) per layer, canonical order.
  std::vector<std::array<size_t, 2>> per_layer_shapes;

  bool operator==(const ShapeSignature&) const = default;
};

ShapeSignature signature_of(const MultiViewModel& model);

enum class PayloadKind {
  kGradient,
  kOverwrite,  // raw parameters rather than a gradient
};

struct GradientPacket {
  std::string participant_id;
  int epoch = 0;
  ShapeSignature declared_signature;
  GradientSet gradients;  // parameters when kind == kOverwrite
  uint64_t nonce = 0;
  PayloadKind kind = PayloadKind::kGradient;
};

std::vector<unsigned char> serialize_packet(const GradientPacket& packet);
uint64_t packet_digest(const GradientPacket& packet);

struct CheckVerdict {
  bool pass = true;
  std::string reason;  // first mismatching field, empty on pass

  bool operator==(const CheckVerdict&) const = default;
};

// Compares num_classes, channels, height, width, layer count and each layer
// shape in that order, then confirms the payload matches what it declares.
CheckVerdict check_node_verify(const ShapeSignature& signature,
                               const GradientPacket& packet);

// ---------------------------------------------------------------------------
// Firewall gate.

struct FirewallGate {
  std::vector<double> pass_weights;  // all ones
  std::vector<double> pass_biases;   // all zeros
  double dropout_rate = 0.0;
  bool engaged = false;

  // Engaged: an all-zero set of the same shape. Disengaged: g * w + b per
  // element, which with the identity weights returns g bit for bit.
  GradientSet apply(const GradientSet& grads) const;
};

FirewallGate make_firewall(size_t parameter_count);

// A failing verdict engages the gate (dropout 1.0); a pass disengages it.
FirewallGate firewall_decide(FirewallGate gate, bool verdict_pass);

// ---------------------------------------------------------------------------
// Upload probes.

struct ProbeThresholds {
  double explode = 1e3;
  double vanish = 1e-8;
};

enum class ProbeVerdict { kPass, kVanish, kExplode, kNonFinite };

std::string_view probe_verdict_name(ProbeVerdict verdict);

// One sgd step of `grads` on a copy of `probe_model`, then inspection of the
// gradient norm. `probe_model` is never modified.
ProbeVerdict blank_model_probe(const GradientSet& grads,
                               const MultiViewModel& probe_model,
                               const ProbeThresholds& thresholds, double mu);

struct FastCheckResult {
  bool deteriorated = false;
  double benchmark = 0.0;
  double accuracy = 0.0;
  double drop = 0.0;  // benchmark - accuracy
};

// Applies the branch-restricted part of `grads` to the single-branch
// sub-model of `live` and scores it on `validation`. Throws ConfigError when
// no benchmark is given and NumericError on non-finite gradients.
FastCheckResult fast_check(const MultiViewModel& live, const GradientSet& grads,
                           size_t branch, const MultiViewBatch& validation,
                           std::optional<double> benchmark, double mu,
                           double delta_det);

// Accuracy of the single-branch sub-model on `validation`.
double single_branch_accuracy(const MultiViewModel& model, size_t branch,
                              const MultiViewBatch& validation);

// ---------------------------------------------------------------------------
// Ratings and aggregation.

inline constexpr double kInitialConfidence = 0.5;

// +0.05 on pass, -0.25 otherwise, clamped to [0, 1]; 0 once blacklisted.
double rate_confidence(double confidence, bool pass, bool blacklisted = false);

// sum(conf_i * g_i) / sum(conf_i). Throws ContractError on an empty list, a
// zero confidence sum or a negative confidence.
GradientSet weighted_mean(const std::vector<const GradientSet*>& grads,
                          const std::vector<double>& confidences);

// ---------------------------------------------------------------------------
// Server.

struct ParticipantRecord {
  std::string participant_id;
  double confidence = kInitialConfidence;
  double base_rate = 1.0;
  double transmission_rate = 1.0;  // uploads per slot
  bool blacklisted = false;
  int download_count_window = 0;   // requests in the current slot
  int uploads_in_window = 0;
  bool scan_flagged_in_window = false;
  Credential credential;
};

enum class ReviewDecision { kConfirmAdversary, kRestore };

struct ReviewTicket {
  uint64_t id = 0;
  std::string participant_id;
  int epoch = 0;
  std::string reason;
  bool open = true;
  std::optional<ReviewDecision> decision;
};

// Stand-in for the human specialists who settle tickets.
using ReviewOracle = std::function<ReviewDecision(const ReviewTicket&)>;

struct ServerConfig {
  int credential_trials = 3;
  double delta_det = 0.05;
  ProbeThresholds probe;
  Hyperparams hyperparams;
  size_t fast_check_branch = 0;
  uint64_t probe_seed = 0;
};

// Outcome of one upload's trip through the checks.
struct PacketReview {
  GradientPacket packet;
  GradientSet effective;  // implied gradient for overwrite packets
  CheckVerdict check;
  std::optional<ProbeVerdict> probe;
  std::optional<FastCheckResult> fast;
  bool pass = false;
};

struct DownloadResult {
  std::optional<ParameterSnapshot> snapshot;
  std::string denial;  // empty when granted
};

// Single-writer state machine. Callers drive each epoch in order:
// begin_epoch, handle_download*, submit_upload*, run_checks, run_review,
// aggregate.
class Server {
 public:
  Server(MultiViewModel initial, MultiViewBatch validation, ServerConfig config,
         std::vector<EpochSlot> schedule, EventLog* log);

  // Throws ContractError on a duplicate id.
  void register_participant(const std::string& id);

  // Throws DeniedError for blacklisted participants or trials < 1.
  Credential issue_credential(const std::string& id, int trials, int epoch);

  void begin_epoch(int epoch);
  DownloadResult handle_download(const std::string& id, int epoch);
  // Returns false when the upload is refused before any check runs.
  bool submit_upload(GradientPacket packet);
  void run_checks(int epoch);
  void run_review(int epoch, const ReviewOracle& oracle);
  // Returns true when the live parameters changed.
  bool aggregate(int epoch);

  const ParameterSnapshot& live() const { return live_; }
  const FirewallGate& firewall() const { return gate_; }
  const ShapeSignature& signature() const { return signature_; }
  std::optional<double> benchmark() const { return benchmark_; }
  double learning_rate(int epoch) const;
  const ParticipantRecord& record(const std::string& id) const;
  const std::vector<ReviewTicket>& tickets() const { return tickets_; }
  const std::vector<PacketReview>& epoch_reviews() const { return reviews_; }
  const std::vector<EpochSlot>& schedule() const { return schedule_; }
  // Participant owning `epoch`, if any.
  const EpochSlot* slot_at(int epoch) const;

 private:
  ParticipantRecord& mutable_record(const std::string& id);
  void raise_warning(ParticipantRecord& rec, int epoch, const std::string& reason);
  void refresh_benchmark();
  PacketReview review_packet(const GradientPacket& packet, int epoch);

  ParameterSnapshot live_;
  MultiViewModel probe_model_;
  MultiViewBatch validation_;
  ServerConfig config_;
  std::vector<EpochSlot> schedule_;
  EventLog* log_;
  ShapeSignature signature_;
  FirewallGate gate_;
  std::optional<double> benchmark_;
  std::map<std::string, ParticipantRecord> records_;
  std::vector<ReviewTicket> tickets_;
  std::vector<GradientPacket> inbox_;
  std::vector<PacketReview> reviews_;
};

}  // namespace cdl_sentinel

#endif  // CDL_SENTINEL_PROTOCOL_H_

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

#include "cdl_sentinel/protocol.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <utility>

#include <nlohmann/json.hpp>

#include "cdl_sentinel/errors.h"
#include "cdl_sentinel/rng.h"

namespace cdl_sentinel {
namespace {

constexpr std::string_view kServerActor = "server";

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------

void EventLog::append(int epoch, std::string_view actor, std::string_view event,
                      std::string_view reason,
                      std::optional<uint64_t> payload_digest) {
  if (epoch != epoch_) {
    epoch_ = epoch;
    seq_ = 0;
  }
  nlohmann::ordered_json j;
  j["epoch"] = epoch;
  j["seq"] = seq_++;
  j["actor"] = actor;
  j["event"] = event;
  j["reason"] = reason;
  if (payload_digest) {
    j["payload_digest"] = digest_hex(*payload_digest);
  } else {
    j["payload_digest"] = nullptr;
  }
  lines_.push_back(j.dump());
}

std::string EventLog::text() const {
  std::string out;
  for (const auto& line : lines_) {
    out += line;
    out += '\n';
  }
  return out;
}

std::string digest_hex(uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(digest));
  return buf;
}

// ---------------------------------------------------------------------------

std::vector<EpochSlot> make_schedule(const std::vector<std::string>& participants,
                                     int epochs, int slot_length, bool cyclic) {
  if (slot_length <= 0) throw ConfigError("slot_length", "must be positive");
  if (epochs < 0) throw ConfigError("epochs", "must be non-negative");
  if (epochs % slot_length != 0) {
    throw ConfigError("epochs", "must be divisible by slot_length");
  }
  if (participants.empty()) throw ConfigError("participants", "empty roster");
  std::vector<EpochSlot> slots;
  const int count = epochs / slot_length;
  for (int k = 0; k < count; ++k) {
    const size_t who = static_cast<size_t>(k) % participants.size();
    if (!cyclic && static_cast<size_t>(k) >= participants.size()) break;
    slots.push_back({participants[who], k * slot_length, (k + 1) * slot_length});
  }
  return slots;
}

// ---------------------------------------------------------------------------

ShapeSignature signature_of(const MultiViewModel& model) {
  ShapeSignature sig;
  sig.num_classes = model.num_classes;
  sig.channels = model.input_shape.channels;
  sig.height = model.input_shape.height;
  sig.width = model.input_shape.width;
  for (const auto& layer : flat_layers(model)) {
    sig.per_layer_shapes.push_back({layer.weights.rows, layer.weights.cols});
  }
  return sig;
}

std::vector<unsigned char> serialize_packet(const GradientPacket& packet) {
  std::vector<unsigned char> out;
  put_u32(out, static_cast<uint32_t>(packet.participant_id.size()));
  out.insert(out.end(), packet.participant_id.begin(), packet.participant_id.end());
  put_u64(out, static_cast<uint64_t>(static_cast<int64_t>(packet.epoch)));
  put_u64(out, packet.nonce);
  put_u32(out, packet.kind == PayloadKind::kOverwrite ? 1u : 0u);
  const ShapeSignature& s = packet.declared_signature;
  put_u64(out, s.num_classes);
  put_u64(out, s.channels);
  put_u64(out, s.height);
  put_u64(out, s.width);
  put_u64(out, s.per_layer_shapes.size());
  for (const auto& shape : s.per_layer_shapes) {
    put_u64(out, shape[0]);
    put_u64(out, shape[1]);
  }
  put_u64(out, packet.gradients.size());
  for (const auto& layer : packet.gradients) {
    put_u64(out, layer.weights.rows);
    put_u64(out, layer.weights.cols);
    put_u64(out, layer.biases.size());
    for (double w : layer.weights.data) put_f64(out, w);
    for (double b : layer.biases) put_f64(out, b);
  }
  return out;
}

uint64_t packet_digest(const GradientPacket& packet) {
  return fnv1a64(serialize_packet(packet));
}

CheckVerdict check_node_verify(const ShapeSignature& signature,
                               const GradientPacket& packet) {
  const ShapeSignature& d = packet.declared_signature;
  if (d.num_classes != signature.num_classes) return {false, "num_classes"};
  if (d.channels != signature.channels) return {false, "channels"};
  if (d.height != signature.height) return {false, "height"};
  if (d.width != signature.width) return {false, "width"};
  if (d.per_layer_shapes.size() != signature.per_layer_shapes.size()) {
    return {false, "layer_count"};
  }
  for (size_t i = 0; i < d.per_layer_shapes.size(); ++i) {
    if (d.per_layer_shapes[i] != signature.per_layer_shapes[i]) {
      return {false, "layer_shape[" + std::to_string(i) + "]"};
    }
  }
  // The declaration has to describe the payload it travels with.
  if (packet.gradients.size() != d.per_layer_shapes.size()) {
    return {false, "payload"};
  }
  for (size_t i = 0; i < packet.gradients.size(); ++i) {
    const LayerGradient& g = packet.gradients[i];
    const auto& shape = d.per_layer_shapes[i];
    if (g.weights.rows != shape[0] || g.weights.cols != shape[1] ||
        g.weights.data.size() != shape[0] * shape[1] ||
        g.biases.size() != shape[0]) {
      return {false, "payload"};
    }
  }
  return {true, ""};
}

// ---------------------------------------------------------------------------

GradientSet FirewallGate::apply(const GradientSet& grads) const {
  GradientSet out = grads;
  size_t k = 0;
  for (auto& layer : out) {
    auto gate = [&](double& x) {
      if (engaged) {
        x = 0.0;
      } else {
        const double w = k < pass_weights.size() ? pass_weights[k] : 1.0;
        const double b = k < pass_biases.size() ? pass_biases[k] : 0.0;
        x *= w;
        if (b != 0.0) x += b;
      }
      ++k;
    };
    for (double& w : layer.weights.data) gate(w);
    for (double& b : layer.biases) gate(b);
  }
  return out;
}

FirewallGate make_firewall(size_t parameter_count) {
  FirewallGate gate;
  gate.pass_weights.assign(parameter_count, 1.0);
  gate.pass_biases.assign(parameter_count, 0.0);
  return gate;
}

FirewallGate firewall_decide(FirewallGate gate, bool verdict_pass) {
  gate.dropout_rate = verdict_pass ? 0.0 : 1.0;
  gate.engaged = !verdict_pass;
  return gate;
}

// ---------------------------------------------------------------------------

std::string_view probe_verdict_name(ProbeVerdict verdict) {
  switch (verdict) {
    case ProbeVerdict::kPass: return "pass";
    case ProbeVerdict::kVanish: return "vanish";
    case ProbeVerdict::kExplode: return "explode";
    case ProbeVerdict::kNonFinite: return "non_finite";
  }
  return "unknown";
}

ProbeVerdict blank_model_probe(const GradientSet& grads,
                               const MultiViewModel& probe_model,
                               const ProbeThresholds& thresholds, double mu) {
  if (!all_finite(grads)) return ProbeVerdict::kNonFinite;
  MultiViewModel probe = probe_model;
  try {
    apply_sgd(probe, grads, mu);
  } catch (const NumericError&) {
    return ProbeVerdict::kNonFinite;
  }
  const double norm = l2_norm(grads);
  if (!std::isfinite(norm)) return ProbeVerdict::kNonFinite;
  if (norm > thresholds.explode) return ProbeVerdict::kExplode;
  if (norm < thresholds.vanish) return ProbeVerdict::kVanish;
  return ProbeVerdict::kPass;
}

double single_branch_accuracy(const MultiViewModel& model, size_t branch,
                              const MultiViewBatch& validation) {
  return accuracy(activate_single_branch(model, branch), validation);
}

FastCheckResult fast_check(const MultiViewModel& live, const GradientSet& grads,
                           size_t branch, const MultiViewBatch& validation,
                           std::optional<double> benchmark, double mu,
                           double delta_det) {
  if (!benchmark) throw ConfigError("benchmark", "fast-check needs a benchmark");
  MultiViewModel sub = activate_single_branch(live, branch);
  apply_sgd(sub, restrict_gradients_to_branch(live, grads, branch), mu);
  FastCheckResult r;
  r.benchmark = *benchmark;
  r.accuracy = accuracy(sub, validation);
  r.drop = r.benchmark - r.accuracy;
  r.deteriorated = r.drop > delta_det;
  return r;
}

// ---------------------------------------------------------------------------

double rate_confidence(double confidence, bool pass, bool blacklisted) {
  if (blacklisted) return 0.0;
  return pass ? std::min(1.0, confidence + 0.05)
              : std::max(0.0, confidence - 0.25);
}

GradientSet weighted_mean(const std::vector<const GradientSet*>& grads,
                          const std::vector<double>& confidences) {
  if (grads.empty()) throw ContractError("no gradients to aggregate");
  if (grads.size() != confidences.size()) {
    throw ContractError("one confidence per gradient set required");
  }
  double total = 0.0;
  for (double c : confidences) {
    if (!(c >= 0.0)) throw ContractError("negative confidence");
    total += c;
  }
  if (total <= 0.0) throw ContractError("confidence sum is zero");
  // Normalized weights keep a lone contributor (weight exactly 1) and equal
  // duplicates (weights 1/2) bit-identical to the plain gradient.
  GradientSet acc;
  for (const auto& layer : *grads.front()) {
    LayerGradient z;
    z.weights = Matrix(layer.weights.rows, layer.weights.cols);
    z.biases.assign(layer.biases.size(), 0.0);
    acc.push_back(std::move(z));
  }
  for (size_t i = 0; i < grads.size(); ++i) {
    const GradientSet& g = *grads[i];
    if (g.size() != acc.size()) throw ShapeError("gradient sets differ in depth");
    for (size_t l = 0; l < g.size(); ++l) {
      if (g[l].weights.rows != acc[l].weights.rows ||
          g[l].weights.cols != acc[l].weights.cols ||
          g[l].biases.size() != acc[l].biases.size()) {
        throw ShapeError("gradient sets differ in layer shape");
      }
    }
    if (confidences[i] == 0.0) continue;
    accumulate(acc, g, confidences[i] / total);
  }
  return acc;
}

// ---------------------------------------------------------------------------

Server::Server(MultiViewModel initial, MultiViewBatch validation,
               ServerConfig config, std::vector<EpochSlot> schedule, EventLog* log)
    : live_{0, std::move(initial)},
      validation_(std::move(validation)),
      config_(config),
      schedule_(std::move(schedule)),
      log_(log) {
  if (log_ == nullptr) throw ContractError("server needs an event log");
  if (config_.credential_trials < 1) {
    throw ConfigError("credential_trials", "must be >= 1");
  }
  const MultiViewModel& m = live_.model;
  probe_model_ = build_model(m.num_views(), m.num_classes, m.input_shape,
                             m.hidden_spec, config_.probe_seed);
  probe_model_.view_indices = m.view_indices;
  signature_ = signature_of(m);
  gate_ = make_firewall(param_count(m));
  if (config_.fast_check_branch >= m.num_views()) {
    throw ConfigError("fast_check_branch", "branch out of range");
  }
  refresh_benchmark();
  log_->append(0, kServerActor, "server_init", "", snapshot_digest(live_));
}

void Server::register_participant(const std::string& id) {
  if (records_.count(id)) throw ContractError("duplicate participant " + id);
  ParticipantRecord rec;
  rec.participant_id = id;
  rec.credential.participant_id = id;
  records_.emplace(id, std::move(rec));
}

ParticipantRecord& Server::mutable_record(const std::string& id) {
  auto it = records_.find(id);
  if (it == records_.end()) throw ContractError("unknown participant " + id);
  return it->second;
}

const ParticipantRecord& Server::record(const std::string& id) const {
  auto it = records_.find(id);
  if (it == records_.end()) throw ContractError("unknown participant " + id);
  return it->second;
}

const EpochSlot* Server::slot_at(int epoch) const {
  for (const auto& slot : schedule_) {
    if (slot.contains(epoch)) return &slot;
  }
  return nullptr;
}

double Server::learning_rate(int epoch) const {
  return decay_lr(config_.hyperparams, epoch);
}

Credential Server::issue_credential(const std::string& id, int trials, int epoch) {
  ParticipantRecord& rec = mutable_record(id);
  if (rec.blacklisted) throw DeniedError("participant " + id + " is blacklisted");
  if (trials < 1) throw ContractError("credential needs at least one trial");
  rec.credential = Credential{id, trials, epoch, false};
  log_->append(epoch, id, "credential_issued", std::to_string(trials));
  return rec.credential;
}

void Server::begin_epoch(int epoch) {
  inbox_.clear();
  reviews_.clear();
  const EpochSlot* slot = slot_at(epoch);
  if (slot == nullptr || slot->start_epoch != epoch) return;
  ParticipantRecord& rec = mutable_record(slot->participant_id);
  rec.download_count_window = 0;
  rec.uploads_in_window = 0;
  rec.scan_flagged_in_window = false;
  const bool ticket_open = std::any_of(
      tickets_.begin(), tickets_.end(), [&](const ReviewTicket& t) {
        return t.open && t.participant_id == rec.participant_id;
      });
  if (!rec.blacklisted && !ticket_open) {
    issue_credential(rec.participant_id, config_.credential_trials, epoch);
  }
}

void Server::raise_warning(ParticipantRecord& rec, int epoch,
                           const std::string& reason) {
  rec.transmission_rate *= 0.5;
  ReviewTicket ticket;
  ticket.id = tickets_.size();
  ticket.participant_id = rec.participant_id;
  ticket.epoch = epoch;
  ticket.reason = reason;
  tickets_.push_back(ticket);
  log_->append(epoch, rec.participant_id, "warning", reason);
  rec.confidence = rate_confidence(rec.confidence, false, rec.blacklisted);
  log_->append(epoch, rec.participant_id, "confidence", fixed4(rec.confidence));
}

DownloadResult Server::handle_download(const std::string& id, int epoch) {
  ParticipantRecord& rec = mutable_record(id);
  auto deny = [&](std::string reason) {
    log_->append(epoch, id, "download_denied", reason);
    return DownloadResult{std::nullopt, std::move(reason)};
  };
  if (rec.blacklisted) return deny("blacklisted");
  const EpochSlot* slot = slot_at(epoch);
  if (slot == nullptr || slot->participant_id != id) return deny("out_of_slot");
  ++rec.download_count_window;
  if (rec.credential.revoked) return deny("revoked");
  if (rec.credential.trials_remaining <= 0) {
    DownloadResult r = deny("credential_exhausted");
    // Heuristic scan: asking past the allowance within one slot.
    if (rec.download_count_window > config_.credential_trials &&
        !rec.scan_flagged_in_window) {
      rec.scan_flagged_in_window = true;
      raise_warning(rec, epoch, "heuristic_scan");
    }
    return r;
  }
  --rec.credential.trials_remaining;
  log_->append(epoch, id, "download_granted",
               std::to_string(rec.credential.trials_remaining),
               snapshot_digest(live_));
  return DownloadResult{live_, ""};
}

bool Server::submit_upload(GradientPacket packet) {
  const int epoch = packet.epoch;
  ParticipantRecord& rec = mutable_record(packet.participant_id);
  const uint64_t digest = packet_digest(packet);
  auto deny = [&](std::string_view reason) {
    log_->append(epoch, rec.participant_id, "upload_denied", reason, digest);
    return false;
  };
  if (rec.blacklisted) return deny("blacklisted");
  const EpochSlot* slot = slot_at(epoch);
  if (slot == nullptr || slot->participant_id != rec.participant_id) {
    return deny("out_of_slot");
  }
  const int allowance = static_cast<int>(std::floor(rec.transmission_rate));
  if (rec.uploads_in_window >= allowance) return deny("rate_limited");
  ++rec.uploads_in_window;
  log_->append(epoch, rec.participant_id, "upload_received", "", digest);
  inbox_.push_back(std::move(packet));
  return true;
}

PacketReview Server::review_packet(const GradientPacket& packet, int epoch) {
  PacketReview r;
  r.packet = packet;
  const std::string& id = packet.participant_id;
  r.check = check_node_verify(signature_, packet);
  log_->append(epoch, id, "check_node",
               r.check.pass ? "pass" : "reject:" + r.check.reason);
  if (!r.check.pass) return r;

  const double mu = learning_rate(epoch);
  if (packet.kind == PayloadKind::kOverwrite) {
    // A parameter write is judged by the gradient that would produce it.
    const Network current = flat_layers(live_.model);
    r.effective = packet.gradients;
    for (size_t l = 0; l < current.size(); ++l) {
      auto& g = r.effective[l];
      for (size_t i = 0; i < g.weights.data.size(); ++i) {
        g.weights.data[i] = (current[l].weights.data[i] - g.weights.data[i]) / mu;
      }
      for (size_t i = 0; i < g.biases.size(); ++i) {
        g.biases[i] = (current[l].biases[i] - g.biases[i]) / mu;
      }
    }
  } else {
    r.effective = packet.gradients;
  }

  r.probe = blank_model_probe(r.effective, probe_model_, config_.probe, mu);
  log_->append(epoch, id, "blank_probe", probe_verdict_name(*r.probe));
  if (*r.probe == ProbeVerdict::kNonFinite) return r;

  try {
    r.fast = fast_check(live_.model, r.effective, config_.fast_check_branch,
                        validation_, benchmark_, mu, config_.delta_det);
    log_->append(epoch, id, "fast_check",
                 r.fast->deteriorated ? "deteriorated(" + fixed4(r.fast->drop) + ")"
                                      : "pass(" + fixed4(r.fast->drop) + ")");
  } catch (const NumericError&) {
    FastCheckResult bad;
    bad.deteriorated = true;
    bad.benchmark = benchmark_.value_or(0.0);
    bad.drop = bad.benchmark;
    r.fast = bad;
    log_->append(epoch, id, "fast_check", "deteriorated(non_finite)");
  }
  r.pass = *r.probe == ProbeVerdict::kPass && !r.fast->deteriorated;
  return r;
}

void Server::run_checks(int epoch) {
  reviews_.clear();
  if (inbox_.empty()) return;
  bool all_pass = true;
  for (const auto& packet : inbox_) {
    PacketReview r = review_packet(packet, epoch);
    ParticipantRecord& rec = mutable_record(packet.participant_id);
    if (r.pass) {
      rec.confidence = rate_confidence(rec.confidence, true, rec.blacklisted);
      log_->append(epoch, rec.participant_id, "confidence", fixed4(rec.confidence));
    } else {
      all_pass = false;
      std::string reason;
      if (!r.check.pass) {
        reason = "check_node:" + r.check.reason;
      } else if (*r.probe != ProbeVerdict::kPass) {
        reason = "blank_probe:" + std::string(probe_verdict_name(*r.probe));
      } else {
        reason = "fast_check:deteriorated";
      }
      raise_warning(rec, epoch, reason);
    }
    reviews_.push_back(std::move(r));
  }
  inbox_.clear();
  gate_ = firewall_decide(gate_, all_pass);
  log_->append(epoch, kServerActor, "firewall",
               gate_.engaged ? "engaged" : "disengaged");
}

void Server::run_review(int epoch, const ReviewOracle& oracle) {
  for (auto& ticket : tickets_) {
    if (!ticket.open) continue;
    ParticipantRecord& rec = mutable_record(ticket.participant_id);
    const ReviewDecision decision = oracle(ticket);
    ticket.open = false;
    ticket.decision = decision;
    if (decision == ReviewDecision::kConfirmAdversary) {
      rec.blacklisted = true;
      rec.confidence = 0.0;
      rec.credential.revoked = true;
      rec.credential.trials_remaining = 0;
      log_->append(epoch, rec.participant_id, "review", "confirm_adversary");
    } else {
      rec.transmission_rate = rec.base_rate;
      log_->append(epoch, rec.participant_id, "review", "restore");
    }
  }
}

bool Server::aggregate(int epoch) {
  if (reviews_.empty()) return false;
  if (gate_.engaged) {
    log_->append(epoch, kServerActor, "aggregate", "skipped_firewall");
    return false;
  }
  std::vector<const GradientSet*> grads;
  std::vector<double> confs;
  for (const auto& r : reviews_) {
    const ParticipantRecord& rec = record(r.packet.participant_id);
    if (!r.pass || rec.blacklisted) continue;
    grads.push_back(&r.effective);
    confs.push_back(rec.confidence);
  }
  if (grads.empty()) {
    log_->append(epoch, kServerActor, "aggregate", "skipped_no_packets");
    return false;
  }
  double total = 0.0;
  for (double c : confs) total += c;
  if (total <= 0.0) {
    log_->append(epoch, kServerActor, "aggregate", "skipped_zero_confidence");
    return false;
  }
  const GradientSet effective = gate_.apply(weighted_mean(grads, confs));
  try {
    apply_sgd(live_.model, effective, learning_rate(epoch));
  } catch (const NumericError&) {
    log_->append(epoch, kServerActor, "aggregate", "rejected_non_finite");
    return false;
  }
  ++live_.version;
  refresh_benchmark();
  log_->append(epoch, kServerActor, "aggregate",
               "version=" + std::to_string(live_.version), snapshot_digest(live_));
  return true;
}

void Server::refresh_benchmark() {
  if (validation_.batch_size == 0) {
    benchmark_.reset();
    return;
  }
  benchmark_ = single_branch_accuracy(live_.model, config_.fast_check_branch,
                                      validation_);
}

}  // namespace cdl_sentinel

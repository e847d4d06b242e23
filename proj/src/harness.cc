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

#include "cdl_sentinel/harness.h"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cdl_sentinel/actors.h"
#include "cdl_sentinel/dataset.h"
#include "cdl_sentinel/errors.h"
#include "cdl_sentinel/kernels.h"
#include "cdl_sentinel/protocol.h"
#include "cdl_sentinel/rng.h"

namespace cdl_sentinel {
namespace {

using Clock = std::chrono::steady_clock;

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

ReviewOracle make_oracle(OracleMode mode,
                         const std::map<std::string, Role>& ground_truth) {
  switch (mode) {
    case OracleMode::kAlwaysConfirm:
      return [](const ReviewTicket&) { return ReviewDecision::kConfirmAdversary; };
    case OracleMode::kNeverConfirm:
      return [](const ReviewTicket&) { return ReviewDecision::kRestore; };
    case OracleMode::kGroundTruth:
      break;
  }
  return [&ground_truth](const ReviewTicket& t) {
    return is_adversary(ground_truth.at(t.participant_id))
               ? ReviewDecision::kConfirmAdversary
               : ReviewDecision::kRestore;
  };
}

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << body;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

template <typename Fn>
void write_with(const std::filesystem::path& path, Fn&& fn) {
  std::ostringstream ss;
  fn(ss);
  write_file(path, ss.str());
}

}  // namespace

std::string RunReport::event_log_text() const {
  std::string out;
  for (const auto& line : event_log) {
    out += line;
    out += '\n';
  }
  return out;
}

RunReport run_scenario(const ScenarioConfig& config, const RunOptions& options) {
  validate_scenario(config);
  const auto t0 = Clock::now();
  const uint64_t seed = config.seed;

  DatasetSpec spec;
  spec.num_classes = config.dataset.num_classes;
  spec.num_views = config.model.num_views;
  spec.shape = config.model.shape;
  spec.noise_sigma = config.dataset.noise_sigma;
  const SyntheticSource source(
      spec, config.dataset.template_seed.value_or(derive_seed(seed, "templates")));

  std::vector<Actor> actors;
  std::vector<std::string> ids;
  std::map<std::string, Role> ground_truth;
  std::map<std::string, size_t> index_of;
  RunReport report;
  report.scenario_name = config.name;
  report.shape = spec.shape;
  for (size_t i = 0; i < config.participants.size(); ++i) {
    const ActorConfig& ac = config.participants[i];
    actors.emplace_back(ac, source, config.dataset.samples_per_shard);
    ids.push_back(ac.id);
    ground_truth[ac.id] = ac.role;
    index_of[ac.id] = i;
    report.roles[ac.id] = std::string(role_name(ac.role));
  }

  MultiViewModel initial =
      build_model(config.model.num_views, config.dataset.num_classes,
                  config.model.shape, config.model.hidden_spec,
                  derive_seed(seed, "model"));
  MultiViewBatch validation = form_batch(
      make_samples(source, config.validation_samples, derive_seed(seed, "server-validation")),
      spec.shape);

  ServerConfig sc;
  sc.credential_trials = config.credential_trials;
  sc.delta_det = config.thresholds.delta_det;
  sc.probe.explode = config.thresholds.theta_explode;
  sc.probe.vanish = config.thresholds.theta_vanish;
  sc.hyperparams.learning_rate = config.learning_rate;
  sc.hyperparams.decay_factor = config.decay_factor;
  sc.fast_check_branch = config.fast_check_branch;
  sc.probe_seed = derive_seed(seed, "probe");

  EventLog log;
  Server server(initial, std::move(validation), sc,
                make_schedule(ids, config.epochs, config.slot_length, config.repeat_slots),
                &log);
  for (const auto& id : ids) server.register_participant(id);
  const ReviewOracle oracle = make_oracle(config.oracle_mode, ground_truth);
  report.initial_snapshot = server.live();
  if (options.keep_snapshots) report.snapshot_history.push_back(server.live());

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    const std::vector<unsigned char> bytes_before = serialize_snapshot(server.live());
    rec.digest_before = fnv1a64(bytes_before);
    const uint64_t version_before = server.live().version;

    server.begin_epoch(epoch);
    const EpochSlot* slot = server.slot_at(epoch);
    if (slot != nullptr) {
      rec.owner = slot->participant_id;
      const size_t idx = index_of.at(slot->participant_id);
      Actor& actor = actors[idx];
      const size_t requests = actor.download_requests(epoch, slot->start_epoch);
      for (size_t k = 0; k < requests; ++k) {
        DownloadResult r = server.handle_download(actor.config().id, epoch);
        if (r.snapshot) actor.receive(*r.snapshot);
      }
      if (epoch == slot->end_epoch - 1) {
        const uint64_t actor_seed = derive_seed(seed, "actor", idx);
        auto packet = actor.upload(epoch, server.learning_rate(epoch),
                                   derive_seed(actor_seed, "epoch",
                                               static_cast<uint64_t>(epoch)));
        if (packet) server.submit_upload(std::move(*packet));
      }
    }
    server.run_checks(epoch);
    const std::vector<PacketReview> reviews = server.epoch_reviews();
    server.run_review(epoch, oracle);
    server.aggregate(epoch);

    const std::vector<unsigned char> bytes_after = serialize_snapshot(server.live());
    rec.digest_after = fnv1a64(bytes_after);
    rec.live_unchanged = bytes_after == bytes_before;
    rec.version = server.live().version;
    rec.firewall_engaged = !reviews.empty() && server.firewall().engaged;

    if (rec.firewall_engaged && !rec.live_unchanged) {
      throw InvariantError("epoch " + std::to_string(epoch) +
                           ": live parameters changed with the firewall engaged");
    }
    bool any_fail = false;
    for (const auto& r : reviews) any_fail = any_fail || !r.pass;
    if (any_fail && rec.version != version_before) {
      throw InvariantError("epoch " + std::to_string(epoch) +
                           ": aggregation ran beside a quarantined packet");
    }
    if (rec.version < version_before) {
      throw InvariantError("snapshot version went backwards");
    }
    if (options.keep_snapshots && rec.version != version_before) {
      report.snapshot_history.push_back(server.live());
    }
    report.epochs.push_back(rec);
  }
  report.event_log = log.lines();
  check_log_invariants(report.event_log, config);
  report.final_snapshot = server.live();

  // Held-out evaluation on the innocents' test splits (every participant's
  // when there are none).
  std::vector<MultiViewSample> test;
  std::vector<MultiViewSample> victim_train;
  for (const auto& actor : actors) {
    if (actor.config().role != Role::kVictim) continue;
    test.insert(test.end(), actor.shard().test.begin(), actor.shard().test.end());
    victim_train.insert(victim_train.end(), actor.shard().train.begin(),
                        actor.shard().train.end());
  }
  if (test.empty()) {
    for (const auto& actor : actors) {
      test.insert(test.end(), actor.shard().test.begin(), actor.shard().test.end());
    }
  }
  const MultiViewBatch test_batch = form_batch(test, spec.shape);
  const std::vector<size_t> pred = predict(report.final_snapshot.model, test_batch);
  report.confusion = confusion_matrix(pred, test_batch.labels, spec.num_classes);
  report.metrics = precision_recall_f1(report.confusion);
  report.detection = detection_report(report.event_log, report.roles);
  const auto t1 = Clock::now();

  if (!victim_train.empty()) {
    report.target_class_mean = class_mean_image(victim_train, config.attack.target_class);
  }
  if (config.attack.enabled && !victim_train.empty()) {
    const std::vector<double>& target = report.target_class_mean;
    for (size_t i = 0; i < actors.size(); ++i) {
      const Actor& actor = actors[i];
      if (actor.config().role != Role::kAdvType2Gan || actor.harvested().empty()) {
        continue;
      }
      AttackReport ar;
      ar.participant_id = actor.config().id;
      for (const auto& s : actor.harvested()) ar.snapshot_versions.push_back(s.version);
      ar.result = reconstruct_from_params(actor.harvested(), config.attack.target_class,
                                          config.attack.budget,
                                          derive_seed(seed, "attack", i), target);
      double hf = 0.0;
      for (const auto& s : ar.result.generated_samples) {
        hf += high_frequency_energy(s, spec.shape);
      }
      ar.high_frequency_energy =
          hf / static_cast<double>(ar.result.generated_samples.size());
      report.attacks.push_back(std::move(ar));
    }
  }
  if (options.record_timing) {
    RunTiming timing;
    timing.protocol_seconds = std::chrono::duration<double>(t1 - t0).count();
    timing.attack_seconds = std::chrono::duration<double>(Clock::now() - t1).count();
    timing.threads = kernels::thread_cap();
    report.timing = timing;
  }
  return report;
}

void check_log_invariants(const std::vector<std::string>& event_log,
                          const ScenarioConfig& config) {
  std::vector<std::string> ids;
  for (const auto& p : config.participants) ids.push_back(p.id);
  const std::vector<EpochSlot> schedule =
      make_schedule(ids, config.epochs, config.slot_length, config.repeat_slots);
  auto owner = [&](int epoch) -> const EpochSlot* {
    for (const auto& s : schedule) {
      if (s.contains(epoch)) return &s;
    }
    return nullptr;
  };
  std::set<std::string> confirmed;
  std::map<std::pair<std::string, int>, int> grants;  // (id, slot start)
  for (const auto& line : event_log) {
    const auto j = nlohmann::json::parse(line);
    const std::string event = j.at("event");
    const std::string actor = j.at("actor");
    const int epoch = j.at("epoch");
    if (event == "review" && j.at("reason") == "confirm_adversary") {
      confirmed.insert(actor);
    }
    if (event != "download_granted" && event != "upload_received") continue;
    if (confirmed.count(actor)) {
      throw InvariantError(actor + " served after being confirmed as an adversary");
    }
    const EpochSlot* slot = owner(epoch);
    if (slot == nullptr || slot->participant_id != actor) {
      throw InvariantError(actor + " served outside its slot at epoch " +
                           std::to_string(epoch));
    }
    if (event == "download_granted" &&
        ++grants[{actor, slot->start_epoch}] > config.credential_trials) {
      throw InvariantError(actor + " granted more downloads than its credential allows");
    }
  }
}

void emit_report(const RunReport& report, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "snapshots", ec);
  if (ec) {
    throw std::runtime_error("cannot create " + (out_dir / "snapshots").string() +
                             ": " + ec.message());
  }
  write_file(out_dir / "events.jsonl", report.event_log_text());
  write_with(out_dir / "metrics.csv",
             [&](std::ostream& o) { write_metrics_csv(o, report.metrics); });
  write_with(out_dir / "confusion.csv",
             [&](std::ostream& o) { write_confusion_csv(o, report.confusion); });
  write_with(out_dir / "detection.csv",
             [&](std::ostream& o) { write_detection_csv(o, report.detection); });
  write_with(out_dir / "versions.csv", [&](std::ostream& o) {
    o << "epoch,owner,version,digest,firewall\n";
    for (const auto& e : report.epochs) {
      o << e.epoch << ',' << e.owner << ',' << e.version << ','
        << digest_hex(e.digest_after) << ','
        << (e.firewall_engaged ? "engaged" : "disengaged") << '\n';
    }
  });
  write_with(out_dir / "attacks.csv", [&](std::ostream& o) {
    o << "participant,target_class,snapshots_used,final_error,high_frequency_energy\n";
    for (const auto& a : report.attacks) {
      o << a.participant_id << ',' << a.result.target_class << ','
        << a.result.snapshots_used << ',' << num(a.result.final_error) << ','
        << num(a.high_frequency_energy) << '\n';
    }
  });
  write_snapshot_file(out_dir / "snapshots" / "initial.snap", report.initial_snapshot);
  write_snapshot_file(out_dir / "snapshots" / "final.snap", report.final_snapshot);
  for (const auto& a : report.attacks) {
    write_pgm_grid(out_dir / ("attack_" + a.participant_id + ".pgm"),
                   a.result.generated_samples, report.shape);
  }
  if (report.timing) {
    nlohmann::ordered_json t;
    t["protocol_seconds"] = report.timing->protocol_seconds;
    t["attack_seconds"] = report.timing->attack_seconds;
    t["threads"] = report.timing->threads;
    write_file(out_dir / "timing.json", t.dump(2) + "\n");
  }
}

std::string summarize(const RunReport& report) {
  std::ostringstream o;
  o << "scenario        " << report.scenario_name << '\n';
  o << "epochs          " << report.epochs.size() << '\n';
  o << "final version   " << report.final_snapshot.version << '\n';
  o << "events          " << report.event_log.size() << '\n';
  size_t engaged = 0;
  for (const auto& e : report.epochs) engaged += e.firewall_engaged;
  o << "firewall epochs " << engaged << '\n';
  o << "accuracy        " << num(report.metrics.accuracy) << '\n';
  o << "macro P/R/F1    " << num(report.metrics.macro.precision) << " / "
    << num(report.metrics.macro.recall) << " / " << num(report.metrics.macro.f1) << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? num(*v) : "n/a"; };
  o << "detection rate  " << opt(report.detection.detection_rate) << '\n';
  o << "false alarms    " << opt(report.detection.false_alarm_rate) << '\n';
  for (const auto& a : report.attacks) {
    o << "attack " << a.participant_id << "  snapshots " << a.result.snapshots_used
      << "  error " << num(a.result.final_error) << "  hf "
      << num(a.high_frequency_energy) << '\n';
  }
  return o.str();
}

namespace {

double mean_hf(const ReconstructionResult& r, InputShape shape) {
  double hf = 0.0;
  for (const auto& s : r.generated_samples) hf += high_frequency_energy(s, shape);
  return hf / static_cast<double>(r.generated_samples.size());
}

}  // namespace

AttackTrial run_attack_trial(const ScenarioConfig& base, uint64_t seed,
                             const AttackConfig& attack) {
  ScenarioConfig config = base;
  if (!config.dataset.template_seed) {
    config.dataset.template_seed = derive_seed(base.seed, "templates");
  }
  config.seed = seed;
  config.attack.enabled = false;
  for (const auto& p : config.participants) {
    if (p.role != Role::kVictim) {
      throw ConfigError("participants", "attack trials need a victims-only scenario");
    }
  }
  RunOptions options;
  options.keep_snapshots = true;
  const RunReport run = run_scenario(config, options);
  if (run.snapshot_history.size() < 2) {
    throw ConfigError("epochs", "attack trials need at least one aggregation");
  }
  const size_t target = config.attack.target_class;
  const size_t budget = config.attack.budget;
  const std::vector<ParameterSnapshot> rich(run.snapshot_history.begin() + 1,
                                            run.snapshot_history.end());
  const std::vector<ParameterSnapshot> capped(3, run.snapshot_history.front());

  AttackTrial t;
  t.seed = seed;
  t.rich_snapshots = rich.size();
  const uint64_t attack_seed = derive_seed(seed, "attack-trial");
  t.rich = reconstruct_from_params(rich, target, budget, attack_seed,
                                   run.target_class_mean, attack);
  t.capped = reconstruct_from_params(capped, target, budget, attack_seed,
                                     run.target_class_mean, attack);
  t.rich_hf = mean_hf(t.rich, run.shape);
  t.capped_hf = mean_hf(t.capped, run.shape);

  Rng rng(derive_seed(seed, "noise-images"));
  std::vector<std::vector<double>> noise(attack.sample_count);
  for (auto& img : noise) {
    img.resize(run.target_class_mean.size());
    for (double& px : img) px = rng.uniform();
  }
  t.noise_error = reconstruction_error(noise, run.target_class_mean);
  double hf = 0.0;
  for (const auto& img : noise) hf += high_frequency_energy(img, run.shape);
  t.noise_hf = hf / static_cast<double>(noise.size());
  return t;
}

LogComparison compare_logs(std::string_view expected, std::string_view actual) {
  LogComparison c;
  if (expected == actual) return c;
  c.match = false;
  size_t line = 1;
  size_t a = 0;
  size_t b = 0;
  while (true) {
    const size_t ea = expected.find('\n', a);
    const size_t eb = actual.find('\n', b);
    const std::string_view la = expected.substr(a, ea == std::string_view::npos ? ea : ea - a);
    const std::string_view lb = actual.substr(b, eb == std::string_view::npos ? eb : eb - b);
    if (la != lb || (ea == std::string_view::npos) != (eb == std::string_view::npos)) {
      c.first_mismatch = line;
      c.expected = std::string(la);
      c.actual = std::string(lb);
      return c;
    }
    if (ea == std::string_view::npos) break;
    a = ea + 1;
    b = eb + 1;
    ++line;
  }
  c.first_mismatch = line;
  return c;
}

}  // namespace cdl_sentinel

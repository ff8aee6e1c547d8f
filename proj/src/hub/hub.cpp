// SPDX-License-Identifier: Apache-2.0
#include "ssiot/hub/hub.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <stdexcept>

#include "ssiot/envelope/codec.hpp"
#include "ssiot/faas/package.hpp"

namespace ssiot::hub {

using nlohmann::json;

std::string_view to_string(Terminal t) {
  switch (t) {
    case Terminal::kPending: return "Pending";
    case Terminal::kLocalDone: return "LocalDone";
    case Terminal::kRemoteDone: return "RemoteDone";
    case Terminal::kErrored: return "Errored";
  }
  return "Pending";
}

void to_json(json& j, const RequestRecord& r) {
  j = {{"request_id", r.request_id},
       {"app_id", r.app_id},
       {"device_id", r.device_id},
       {"terminal", to_string(r.terminal)},
       {"target", to_string(r.target)},
       {"reason", r.reason},
       {"enqueued_at_ms", to_ms(r.enqueued_at)},
       {"decided_at_ms", to_ms(r.decided_at)},
       {"completed_at_ms", to_ms(r.completed_at)},
       {"e2e_ms", r.e2e_ms},
       {"queue_wait_ms", r.queue_wait_ms},
       {"encryption_ms", r.encryption_ms},
       {"transfer_ms", r.transfer_ms},
       {"kms_ms", r.kms_ms},
       {"exec_ms", r.exec_ms},
       {"remote_e2e_ms", r.remote_e2e_ms},
       {"cloud_cost_usd", r.cloud_cost.to_string()},
       {"energy_cost_usd", r.energy_cost.to_string()},
       {"error", r.error},
       {"late_result_dropped", r.late_result_dropped},
       {"admission_failed", r.admission_failed}};
  if (r.served_state) j["served_state"] = faas::to_string(*r.served_state);
  if (!r.invocation_id.empty()) j["invocation_id"] = r.invocation_id;
}

HubConfig HubConfig::from_json(const json& j) {
  HubConfig c;
  if (j.contains("device") && j["device"].is_string()) {
    c.device = DeviceSpec::from_json({{"device_class", j["device"]}});
  } else if (j.contains("device")) {
    c.device = DeviceSpec::from_json(j["device"]);
  } else if (j.contains("device_class")) {
    c.device = DeviceSpec::from_json({{"device_class", j["device_class"]}});
  }
  if (j.contains("policy")) {
    auto kind = parse_policy_kind(j["policy"].get<std::string>());
    if (!kind) throw std::invalid_argument("unknown policy " + j["policy"].dump());
    c.policy.kind = *kind;
  }
  if (j.contains("monthly_budget_usd")) {
    const auto& b = j["monthly_budget_usd"];
    c.policy.monthly_budget =
        b.is_string() ? faas::Usd::parse(b.get<std::string>()) : faas::Usd::from_double(b.get<double>());
  }
  c.policy.balance_weight = j.value("balance_weight", c.policy.balance_weight);
  if (j.contains("max_local")) c.max_local = j["max_local"].get<std::size_t>();
  c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
  if (j.contains("keep_alive_period_min")) {
    c.keep_alive_period_ms = j["keep_alive_period_min"].get<double>() * 60'000.0;
  }
  c.uplink_mbps = j.value("uplink_mbps", c.uplink_mbps);
  c.timeout_factor = j.value("timeout_factor", c.timeout_factor);
  c.network_overhead_ms = j.value("network_overhead_ms", c.network_overhead_ms);
  c.event_log_path = j.value("event_log", c.event_log_path);
  c.policy.validate();
  if (c.queue_capacity == 0) throw std::invalid_argument("queue_capacity must be > 0");
  if (c.uplink_mbps <= 0) throw std::invalid_argument("uplink_mbps must be > 0");
  return c;
}

struct Hub::Flight {
  std::size_t index;  // into records_
  Request request;
  const AppBinding* binding = nullptr;
  const faas::WorkloadProfile* profile = nullptr;
  OffloadDecision decision;
  std::optional<envelope::DataKey> key;
  std::optional<faas::InvocationRequest> sealed;
  std::optional<Bytes> result;
  SimTime exec_started;
  bool done = false;
};

Hub::Hub(HubConfig config, faas::FaasEndpoint& faas, faas::ProfileCatalog profiles,
         std::shared_ptr<faas::KmsDirectory> kms)
    : config_(std::move(config)),
      faas_(faas),
      profiles_(std::move(profiles)),
      kms_(std::move(kms)),
      monitor_(config_.device.device_class,
               std::min(config_.device.slots, config_.max_local.value_or(config_.device.slots)),
               config_.device.mem_gb),
      queue_(config_.queue_capacity) {
  config_.policy.validate();
  if (!kms_) throw std::invalid_argument("hub needs a KMS directory");
  if (!config_.event_log_path.empty()) {
    log_file_ = std::fopen(config_.event_log_path.c_str(), "w");
    if (!log_file_) throw std::runtime_error("cannot open event log " + config_.event_log_path);
  }
}

Hub::~Hub() {
  if (log_file_) std::fclose(log_file_);
}

void Hub::bind_app(AppBinding b) {
  if (b.app_id.empty() || b.item_id.empty()) {
    throw std::invalid_argument("binding needs app_id and item_id");
  }
  if (!b.profile.empty() && !profiles_.find(b.profile)) {
    throw std::invalid_argument("unknown profile " + b.profile);
  }
  if (b.keys.app_id != b.app_id) throw std::invalid_argument("key pair belongs to another app");
  kms_latency_[b.app_id] = kms_->resolve(b.kms_url).response_latency_ms();
  bindings_[b.app_id] = std::move(b);
}

void Hub::attach_rules(rules::RuleEngine& engine) {
  rules_ = &engine;
  engine.set_target(this);
}

const AppBinding& Hub::binding(const std::string& app_id) const {
  auto it = bindings_.find(app_id);
  if (it == bindings_.end()) throw std::invalid_argument("no binding for app " + app_id);
  return it->second;
}

const RequestRecord& Hub::record(const std::string& request_id) const {
  return records_.at(by_id_.at(request_id));
}

void Hub::schedule(SimTime at, std::function<void()> fn) {
  events_.push(Event{std::max(at, now_), next_seq_++, std::move(fn)});
}

void Hub::emit(json line) {
  if (log_file_) {
    const std::string text = line.dump() + "\n";
    std::fwrite(text.data(), 1, text.size(), log_file_);
  }
  if (config_.keep_event_log) log_.push_back(std::move(line));
}

Request Hub::ingest(const DeviceEvent& event) {
  for (const auto& [app_id, b] : bindings_) {
    if (b.source_device == event.device_id) return ingest_app(app_id, event);
  }
  throw std::invalid_argument("no app bound to device " + event.device_id);
}

Request Hub::ingest_app(const std::string& app_id, const DeviceEvent& event) {
  if (event.payload.size() > config_.max_payload_bytes) {
    throw std::invalid_argument("payload of " + std::to_string(event.payload.size()) +
                                " bytes exceeds the " + std::to_string(config_.max_payload_bytes) +
                                " byte limit");
  }
  const AppBinding& b = binding(app_id);
  Request req;
  req.request_id = "req-" + std::to_string(next_request_++);
  req.app_id = app_id;
  req.payload = event.payload;
  // FIFO order must match time order.
  req.enqueued_at = std::max({event.arrived_at, now_, last_enqueued_});
  queue_.push(req);
  last_enqueued_ = req.enqueued_at;

  RequestRecord rec;
  rec.request_id = req.request_id;
  rec.app_id = app_id;
  rec.device_id = event.device_id;
  rec.enqueued_at = req.enqueued_at;
  const std::size_t index = records_.size();
  records_.push_back(rec);
  by_id_[req.request_id] = index;
  auto flight = std::make_unique<Flight>();
  flight->index = index;
  flight->request = req;
  flight->binding = &b;
  flight->profile = b.profile.empty() ? nullptr : profiles_.find(b.profile);
  flights_.push_back(std::move(flight));
  ++stats_.ingested;

  schedule(req.enqueued_at, [this] { pump(); });
  schedule(req.enqueued_at + sim_ms(deadline_ms(b)), [this, index] { timeout(index); });
  return req;
}

double Hub::deadline_ms(const AppBinding& b) const {
  const faas::WorkloadProfile* p = b.profile.empty() ? nullptr : profiles_.find(b.profile);
  if (!p) return config_.native_timeout_ms;
  return config_.timeout_factor *
         p->nominal_cold_e2e_ms(kms_latency_.at(b.app_id), config_.network_overhead_ms);
}

double Hub::encryption_estimate_ms(std::size_t bytes) const {
  return config_.device.enc_base_ms +
         config_.device.enc_ms_per_mib * static_cast<double>(bytes) / (1024.0 * 1024.0);
}

double Hub::transfer_ms(std::size_t bytes) const {
  return static_cast<double>(bytes) * 8.0 / (config_.uplink_mbps * 1000.0);
}

AllocationInput Hub::estimate(const std::string& app_id, std::size_t payload_bytes) const {
  const AppBinding& b = binding(app_id);
  const faas::WorkloadProfile* p = b.profile.empty() ? nullptr : profiles_.find(b.profile);
  const double kms = kms_latency_.at(app_id);
  const double enc = encryption_estimate_ms(payload_bytes) *
                     (1.0 + config_.device.enc_contention * static_cast<double>(active_encryptions_));
  AllocationInput in;
  if (p) {
    if (auto base = p->local_exec_on(config_.device.device_class)) {
      const double stretched =
          *base * (1.0 + config_.device.contention * static_cast<double>(monitor_.in_use_slots()));
      in.local_expected_ms = enc + kms + stretched;
      in.local_expected_cost =
          energy_cost(config_.device.power_watts, stretched, config_.electricity_usd_per_kwh);
      in.local_possible = p->local_mem_gb <= monitor_.total_mem_gb() && monitor_.total_slots() > 0;
    }
    in.local_mem_gb = p->local_mem_gb;
  }
  if (!b.function_id.empty()) {
    in.function_id = b.function_id;
    if (auto it = remote_ewma_.find(app_id); it != remote_ewma_.end()) {
      in.remote_expected_ms = it->second;
    } else {
      // Sealing adds a few hundred bytes of framing; close enough here.
      const double warm = p ? p->nominal_warm_e2e_ms(kms, config_.network_overhead_ms)
                            : config_.network_overhead_ms + kms;
      in.remote_expected_ms = enc + transfer_ms(payload_bytes * 4 / 3 + 512) + warm;
    }
    in.remote_expected_cost =
        p ? faas::invocation_cost(p->billed_warm)
          : faas::invocation_cost(faas::billed_for(1.0, faas::kBillingQuantumMs));
  }
  return in;
}

void Hub::pump() {
  while (true) {
    auto head = queue_.pop();
    if (!head) return;
    Flight& f = *flights_[by_id_.at(head->request_id)];
    if (f.done) continue;  // timed out while waiting
    if (head->enqueued_at > now_) {
      queue_.push_front(std::move(*head));
      return;
    }
    RequestRecord& rec = records_[f.index];
    const AllocationInput in = estimate(head->app_id, head->payload.size());
    const bool blocked = in.local_expected_ms && !monitor_.fits(in.local_mem_gb);
    if (blocked && !rec.admission_failed) {
      rec.admission_failed = true;
      ++stats_.local_admission_failures;
    }
    OffloadDecision d = allocate(in, monitor_, config_.policy, ledger_, now_);
    if (d.target == TargetKind::kQueued) {
      queue_.push_front(std::move(*head));
      return;
    }
    emit({{"event", "decision"},
          {"at_ms", to_ms(now_)},
          {"request_id", head->request_id},
          {"app_id", head->app_id},
          {"target", to_string(d.target)},
          {"policy", to_string(d.policy_kind)},
          {"reason", d.reason}});
    if (d.target == TargetKind::kRejected) {
      rec.target = d.target;
      rec.reason = d.reason;
      rec.decided_at = now_;
      finish(f.index, Terminal::kErrored, d.reason);
      continue;
    }
    start(std::move(*head), std::move(d));
  }
}

void Hub::start(Request req, OffloadDecision decision) {
  const std::size_t idx = by_id_.at(req.request_id);
  Flight& f = *flights_[idx];
  RequestRecord& rec = records_[idx];
  rec.target = decision.target;
  rec.reason = decision.reason;
  rec.decided_at = now_;
  rec.queue_wait_ms = to_ms(now_ - rec.enqueued_at);
  f.decision = std::move(decision);

  // Same envelope steps on both paths: the KMS gates local runs too.
  try {
    const AppBinding& b = *f.binding;
    envelope::DataKey key = envelope::generate_data_key();
    faas::InvocationRequest sealed;
    sealed.app_id = b.app_id;
    sealed.request_id = req.request_id;
    sealed.encrypted_data =
        envelope::seal_data(req.payload, b.keys.public_key, key, config_.max_payload_bytes);
    sealed.encrypted_key = envelope::wrap_data_key(key, b.keys, b.kms);
    f.key = key;
    f.sealed = std::move(sealed);
  } catch (const std::exception& e) {
    if (f.decision.slot) monitor_.release(*f.decision.slot);
    finish(idx, Terminal::kErrored, std::string("encryption-failed: ") + e.what());
    return;
  }
  secure_wipe(f.request.payload);
  const std::size_t payload_bytes = req.payload.size();
  secure_wipe(req.payload);

  const double enc = encryption_estimate_ms(payload_bytes) *
                     (1.0 + config_.device.enc_contention * static_cast<double>(active_encryptions_));
  ++active_encryptions_;
  rec.encryption_ms = enc;
  schedule(now_ + sim_ms(enc), [this, idx] { encryption_done(idx); });
}

void Hub::encryption_done(std::size_t idx) {
  --active_encryptions_;
  Flight& f = *flights_[idx];
  RequestRecord& rec = records_[idx];
  if (f.decision.target == TargetKind::kRemote) {
    if (f.done) return;  // timed out; never leaves the hub
    rec.transfer_ms = transfer_ms(faas::encode(*f.sealed).size());
    schedule(now_ + sim_ms(rec.transfer_ms), [this, idx] { remote_send(idx); });
    return;
  }

  const AppBinding& b = *f.binding;
  rec.kms_ms = kms_latency_.at(b.app_id);
  kms::DecryptResult res;
  try {
    res = kms_->resolve(b.kms_url)
              .decrypt_data_key(b.app_id, f.request.request_id, f.sealed->encrypted_key);
  } catch (const std::exception& e) {
    res.decision = kms::Decision::kDeniedCryptoError;
    res.cause = std::string("kms unreachable: ") + e.what();
  }
  if (!res.granted()) {
    std::string error = "kms-denied: " + res.cause;
    schedule(now_ + sim_ms(rec.kms_ms), [this, idx, error] {
      Flight& fl = *flights_[idx];
      monitor_.release(*fl.decision.slot);
      finish(idx, Terminal::kErrored, error);
      pump();
    });
    return;
  }
  f.key = *res.key;
  schedule(now_ + sim_ms(rec.kms_ms), [this, idx] { local_kms_done(idx); });
}

void Hub::local_kms_done(std::size_t idx) {
  Flight& f = *flights_[idx];
  const AppBinding& b = *f.binding;
  try {
    Bytes plaintext = envelope::open_data(f.sealed->encrypted_data, *f.key, b.keys.private_key);
    Bytes output = faas::synthetic_inference(f.profile->name, plaintext);
    secure_wipe(plaintext);
    const envelope::SealedData sealed = envelope::seal_result(output, *f.key);
    secure_wipe(output);
    f.result = envelope::open_result(sealed, *f.key);
  } catch (const std::exception& e) {
    monitor_.release(*f.decision.slot);
    finish(idx, Terminal::kErrored, std::string("local-executor-failed: ") + e.what());
    pump();
    return;
  }
  exec_started(idx, *f.profile->local_exec_on(config_.device.device_class));
}

void Hub::exec_started(std::size_t idx, double work_ms) {
  exec_advance();
  flights_[idx]->exec_started = now_;
  running_.push_back({idx, work_ms});
  peak_exec_ = std::max(peak_exec_, running_.size());
  exec_reschedule();
}

void Hub::exec_advance() {
  if (!running_.empty()) {
    const double k = static_cast<double>(running_.size());
    const double rate = 1.0 / (1.0 + config_.device.contention * (k - 1.0));
    const double elapsed = to_ms(now_ - exec_updated_);
    for (auto& r : running_) r.remaining_ms -= elapsed * rate;
  }
  exec_updated_ = now_;
}

void Hub::exec_reschedule() {
  const std::uint64_t gen = ++exec_generation_;
  if (running_.empty()) return;
  const double k = static_cast<double>(running_.size());
  const double rate = 1.0 / (1.0 + config_.device.contention * (k - 1.0));
  double next = running_.front().remaining_ms;
  for (const auto& r : running_) next = std::min(next, r.remaining_ms);
  schedule(now_ + sim_ms(std::max(0.0, next) / rate), [this, gen] {
    if (gen != exec_generation_) return;
    exec_advance();
    std::vector<std::size_t> done;
    std::erase_if(running_, [&](const Running& r) {
      if (r.remaining_ms > 1e-6) return false;
      done.push_back(r.flight);
      return true;
    });
    exec_reschedule();
    for (std::size_t idx : done) exec_finished(idx);
  });
}

void Hub::exec_finished(std::size_t idx) {
  Flight& f = *flights_[idx];
  RequestRecord& rec = records_[idx];
  monitor_.release(*f.decision.slot);
  if (f.done) {
    rec.late_result_dropped = true;
    ++stats_.late_dropped;
    emit({{"event", "late-result-dropped"}, {"at_ms", to_ms(now_)}, {"request_id", rec.request_id}});
  } else {
    rec.exec_ms = to_ms(now_ - f.exec_started);
    rec.energy_cost =
        energy_cost(config_.device.power_watts, rec.exec_ms, config_.electricity_usd_per_kwh);
    finish(idx, Terminal::kLocalDone);
  }
  pump();
}

void Hub::remote_send(std::size_t idx) {
  Flight& f = *flights_[idx];
  if (f.done) return;
  const std::string& fid = f.decision.function_id;
  faas::InvocationRecord rec;
  try {
    rec = faas_.invoke(fid, *f.sealed, now_);
  } catch (const std::exception& e) {
    finish(idx, Terminal::kErrored, std::string("faas-error: ") + e.what());
    return;
  }
  if (rec.cost.atto() > 0) ledger_.record(now_, rec.cost);
  auto& last = last_remote_activity_[fid];
  last = std::max(last, rec.completed_at);
  const SimTime at = rec.completed_at;
  schedule(at, [this, idx, rec = std::move(rec)]() mutable { remote_done(idx, std::move(rec)); });
}

void Hub::remote_done(std::size_t idx, faas::InvocationRecord inv) {
  Flight& f = *flights_[idx];
  RequestRecord& rec = records_[idx];
  rec.remote_e2e_ms = inv.e2e_ms;
  rec.served_state = inv.served_state;
  rec.invocation_id = inv.invocation_id;
  rec.kms_ms = inv.kms_ms;
  rec.exec_ms = inv.exec_ms + inv.jitter_ms;
  rec.cloud_cost = inv.cost;
  if (f.done) {
    rec.late_result_dropped = true;
    ++stats_.late_dropped;
    emit({{"event", "late-result-dropped"}, {"at_ms", to_ms(now_)}, {"request_id", rec.request_id}});
    return;
  }
  if (!inv.ok()) {
    finish(idx, Terminal::kErrored, inv.error + (inv.detail.empty() ? "" : ": " + inv.detail));
    return;
  }
  try {
    f.result = envelope::open_result(*inv.response, *f.key);
  } catch (const std::exception& e) {
    finish(idx, Terminal::kErrored, std::string("result-authentication-failed: ") + e.what());
    return;
  }
  if (inv.served_state == faas::ServedState::kWarm) {
    const double sample = to_ms(now_ - rec.decided_at);
    auto [it, fresh] = remote_ewma_.try_emplace(f.request.app_id, sample);
    if (!fresh) it->second = config_.ewma_alpha * sample + (1 - config_.ewma_alpha) * it->second;
  }
  finish(idx, Terminal::kRemoteDone);
}

void Hub::timeout(std::size_t idx) {
  if (flights_[idx]->done) return;
  finish(idx, Terminal::kErrored, "timeout");
}

void Hub::finish(std::size_t idx, Terminal terminal, std::string error) {
  Flight& f = *flights_[idx];
  if (f.done) return;
  f.done = true;
  RequestRecord& rec = records_[idx];
  rec.terminal = terminal;
  rec.error = std::move(error);
  rec.completed_at = now_;
  rec.e2e_ms = to_ms(now_ - rec.enqueued_at);
  switch (terminal) {
    case Terminal::kLocalDone: ++stats_.local_done; break;
    case Terminal::kRemoteDone: ++stats_.remote_done; break;
    case Terminal::kErrored: ++stats_.errored; break;
    case Terminal::kPending: break;
  }
  if (terminal != Terminal::kErrored && f.result) {
    rec.result = ssiot::to_string(*f.result);
    results_.push_back({idx, f.binding->item_id, now_});
  }
  f.key.reset();
  json line = rec;
  line["event"] = "complete";
  emit(std::move(line));
}

std::size_t Hub::handle_results() {
  std::size_t n = 0;
  while (!results_.empty()) {
    Completed c = std::move(results_.front());
    results_.pop_front();
    ++n;
    if (!rules_) continue;
    rules::ItemUpdate update{c.item_id, std::nullopt};
    auto parsed = json::parse(*records_[c.index].result, nullptr, false);
    if (parsed.is_object() && parsed.contains("label") && parsed.contains("score")) {
      update.result = rules::ResultFields{parsed["label"].get<std::string>(),
                                         parsed["score"].get<double>()};
    }
    try {
      rules_->on_event(update, c.at);
    } catch (const rules::UnknownItem& e) {
      spdlog::warn("result for undeclared item {}: {}", c.item_id, e.what());
    }
  }
  stats_.results_dispatched += n;
  return n;
}

void Hub::thing_changed(const std::string& thing_id, const std::string& from,
                        const std::string& to, SimTime at) {
  schedule(at, [this, thing_id, from, to] {
    if (rules_) rules_->on_event(rules::ThingChange{thing_id, from, to}, now_);
  });
}

void Hub::observe_frame(const std::string& device_id, Bytes payload) {
  frames_[device_id] = std::move(payload);
}

void Hub::submit_command(const std::string& item_id, const std::string& command, SimTime at) {
  for (const auto& [app_id, b] : bindings_) {
    if (b.item_id != item_id) continue;
    auto frame = frames_.find(b.source_device);
    if (frame == frames_.end()) {
      throw rules::UnknownBinding("no frame from " + b.source_device + " for " + item_id);
    }
    emit({{"event", "command"}, {"at_ms", to_ms(at)}, {"item_id", item_id}, {"command", command}});
    ingest_app(app_id, DeviceEvent{b.source_device, "image", frame->second, at});
    return;
  }
  throw rules::UnknownBinding("no app bound to item " + item_id);
}

void Hub::schedule_keep_alive(SimTime from, SimTime until) {
  if (config_.keep_alive_period_ms <= 0 || from >= until) return;
  schedule(from, [this, until] { keep_alive_tick(until); });
}

void Hub::keep_alive_tick(SimTime until) {
  const double period = config_.keep_alive_period_ms;
  std::set<std::string> functions;
  for (const auto& [_, b] : bindings_) {
    if (!b.function_id.empty()) functions.insert(b.function_id);
  }
  for (const auto& fid : functions) {
    auto last = last_remote_activity_.find(fid);
    const bool due = last == last_remote_activity_.end() ||
                     to_ms(now_ - last->second) + period > config_.idle_threshold_ms;
    if (!due) continue;
    faas::InvocationRecord rec;
    try {
      rec = faas_.keep_alive(fid, now_);
    } catch (const std::exception& e) {
      spdlog::warn("keep-alive for {} failed: {}", fid, e.what());
      continue;
    }
    if (rec.cost.atto() > 0) ledger_.record(now_, rec.cost);
    auto& l = last_remote_activity_[fid];
    l = std::max(l, rec.completed_at);
    ++stats_.keep_alives;
    emit({{"event", "keep-alive"},
          {"at_ms", to_ms(now_)},
          {"function_id", fid},
          {"served_state", faas::to_string(rec.served_state)},
          {"cost_usd", rec.cost.to_string()}});
    keep_alive_.push_back(std::move(rec));
  }
  const SimTime next = now_ + sim_ms(period);
  if (next < until) schedule(next, [this, until] { keep_alive_tick(until); });
}

void Hub::run_until(SimTime horizon) {
  while (!events_.empty() && events_.top().at <= horizon) {
    Event ev = events_.top();
    events_.pop();
    now_ = std::max(now_, ev.at);
    ev.fn();
    if (rules_) handle_results();
  }
  now_ = std::max(now_, horizon);
}

void Hub::drain() {
  while (!events_.empty()) {
    Event ev = events_.top();
    events_.pop();
    now_ = std::max(now_, ev.at);
    ev.fn();
    if (rules_) handle_results();
  }
  while (auto left = queue_.pop()) {
    const std::size_t idx = by_id_.at(left->request_id);
    if (!flights_[idx]->done) finish(idx, Terminal::kErrored, "not-served");
  }
}

}  // namespace ssiot::hub

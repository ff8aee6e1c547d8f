// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "ssiot/envelope/envelope.hpp"
#include "ssiot/faas/emulator.hpp"
#include "ssiot/hub/allocator.hpp"
#include "ssiot/hub/types.hpp"
#include "ssiot/rules/engine.hpp"

namespace ssiot::hub {

struct HubConfig {
  DeviceSpec device = DeviceSpec::defaults(DeviceClass::kJetsonNano);
  OffloadPolicy policy;
  std::size_t queue_capacity = 1024;
  // Caps concurrently running local instances below the device slot count.
  std::optional<std::size_t> max_local;
  std::size_t max_payload_bytes = envelope::kDefaultMaxPayload;
  double uplink_mbps = 50.0;
  // Per-request deadline = factor x nominal cold end-to-end latency.
  double timeout_factor = 5.0;
  double native_timeout_ms = 60'000.0;
  double ewma_alpha = 0.2;
  // Must match the FaaS platform's network overhead for seeded estimates.
  double network_overhead_ms = faas::kDefaultNetworkOverheadMs;
  // Keep-alive: 0 disables. Pings a function when its projected idle time
  // would pass the idle threshold before the next tick.
  double keep_alive_period_ms = 15 * 60 * 1000.0;
  double idle_threshold_ms = 26 * 60 * 1000.0;
  double electricity_usd_per_kwh = kElectricityUsdPerKwh;
  // JSON-lines event log; empty keeps it in memory only.
  std::string event_log_path;
  bool keep_event_log = true;

  // Keys: device_class, device{...}, policy, monthly_budget_usd,
  // balance_weight, max_local, queue_capacity, keep_alive_period_min,
  // uplink_mbps, timeout_factor, event_log.
  static HubConfig from_json(const nlohmann::json& j);
};

// One deployed (or local-only) application and the item it feeds.
struct AppBinding {
  std::string app_id;
  std::string item_id;
  // Empty when the app is not deployed remotely.
  std::string function_id;
  // Workload profile name; empty for native apps without a local model.
  std::string profile;
  envelope::AppKeyPair keys;
  envelope::KmsIdentity kms;
  std::string kms_url;
  // Device whose latest frame is sent when the item receives a command.
  std::string source_device;
};

enum class Terminal { kPending, kLocalDone, kRemoteDone, kErrored };
std::string_view to_string(Terminal t);

struct RequestRecord {
  std::string request_id;
  std::string app_id;
  std::string device_id;
  Terminal terminal = Terminal::kPending;
  TargetKind target = TargetKind::kQueued;
  std::string reason;

  SimTime enqueued_at;
  SimTime decided_at;
  SimTime completed_at;
  double e2e_ms = 0;
  double queue_wait_ms = 0;
  double encryption_ms = 0;
  double transfer_ms = 0;
  double kms_ms = 0;
  double exec_ms = 0;
  // Remote only: the platform-side record.
  double remote_e2e_ms = 0;
  std::optional<faas::ServedState> served_state;
  std::string invocation_id;
  faas::Usd cloud_cost;
  faas::Usd energy_cost;

  std::optional<std::string> result;  // plaintext result JSON
  std::string error;
  bool late_result_dropped = false;
  // Could have run locally but no slot or memory was free when first tried.
  bool admission_failed = false;
};

void to_json(nlohmann::json& j, const RequestRecord& r);

struct HubStats {
  std::size_t ingested = 0;
  std::size_t local_done = 0;
  std::size_t remote_done = 0;
  std::size_t errored = 0;
  std::size_t late_dropped = 0;
  std::size_t keep_alives = 0;
  std::size_t results_dispatched = 0;
  std::size_t local_admission_failures = 0;
};

// Local hub runtime. Time is virtual: work is scheduled on an internal
// event queue and advanced with run_until/drain. Real envelope crypto and
// KMS calls happen when the simulated step does.
class Hub final : public rules::ActionTarget {
 public:
  Hub(HubConfig config, faas::FaasEndpoint& faas, faas::ProfileCatalog profiles,
      std::shared_ptr<faas::KmsDirectory> kms);
  ~Hub() override;
  Hub(const Hub&) = delete;
  Hub& operator=(const Hub&) = delete;

  void bind_app(AppBinding binding);
  // Rule engine that receives result item updates. Sets itself as the
  // engine's command target.
  void attach_rules(rules::RuleEngine& engine);

  // Throws std::invalid_argument for oversize payloads or unknown devices,
  // QueueFull when the data queue is at capacity.
  Request ingest(const DeviceEvent& event);
  // Feeds a Thing change into the rule engine at `at`.
  void thing_changed(const std::string& thing_id, const std::string& from, const std::string& to,
                     SimTime at);
  // Latest frame of a device, used by sendCommand("REFRESH").
  void observe_frame(const std::string& device_id, Bytes payload);
  void submit_command(const std::string& item_id, const std::string& command,
                      SimTime at) override;

  // Keep-alive ticks at from + k*period for every bound remote function.
  void schedule_keep_alive(SimTime from, SimTime until);

  // Processes events up to and including `horizon`.
  void run_until(SimTime horizon);
  // Runs to quiescence; requests still waiting afterwards are errored.
  void drain();
  // Hands completed results to the rule engine; returns how many.
  std::size_t handle_results();

  SimTime now() const { return now_; }
  const std::vector<RequestRecord>& records() const { return records_; }
  const RequestRecord& record(const std::string& request_id) const;
  const HubStats& stats() const { return stats_; }
  const std::vector<faas::InvocationRecord>& keep_alive_records() const { return keep_alive_; }
  const std::vector<nlohmann::json>& event_log() const { return log_; }
  const ResourceMonitor& monitor() const { return monitor_; }
  const DataQueue& data_queue() const { return queue_; }
  const CostLedger& ledger() const { return ledger_; }
  const HubConfig& config() const { return config_; }
  // Largest number of local jobs executing at once so far.
  std::size_t peak_local_concurrency() const { return peak_exec_; }

  // Estimates the allocator would use right now.
  AllocationInput estimate(const std::string& app_id, std::size_t payload_bytes = 0) const;

 private:
  struct Flight;
  struct Completed {
    std::size_t index;
    std::string item_id;
    SimTime at;
  };

  void schedule(SimTime at, std::function<void()> fn);
  void pump();
  Request ingest_app(const std::string& app_id, const DeviceEvent& event);
  void start(Request req, OffloadDecision decision);
  void encryption_done(std::size_t flight);
  void local_kms_done(std::size_t flight);
  void remote_send(std::size_t flight);
  void remote_done(std::size_t flight, faas::InvocationRecord rec);
  void exec_started(std::size_t flight, double work_ms);
  void exec_advance();
  void exec_reschedule();
  void exec_finished(std::size_t flight);
  void finish(std::size_t flight, Terminal terminal, std::string error = {});
  void timeout(std::size_t flight);
  void keep_alive_tick(SimTime until);
  void emit(nlohmann::json line);
  double deadline_ms(const AppBinding& b) const;
  double encryption_estimate_ms(std::size_t bytes) const;
  double transfer_ms(std::size_t bytes) const;
  const AppBinding& binding(const std::string& app_id) const;

  HubConfig config_;
  faas::FaasEndpoint& faas_;
  faas::ProfileCatalog profiles_;
  std::shared_ptr<faas::KmsDirectory> kms_;
  ResourceMonitor monitor_;
  DataQueue queue_;
  CostLedger ledger_;
  std::map<std::string, AppBinding> bindings_;
  std::map<std::string, double> kms_latency_;
  std::map<std::string, Bytes> frames_;
  rules::RuleEngine* rules_ = nullptr;

  struct Event {
    SimTime at;
    std::uint64_t seq;
    std::function<void()> fn;
    bool operator>(const Event& o) const {
      return at != o.at ? at > o.at : seq > o.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t next_seq_ = 0;
  SimTime now_{};

  std::vector<std::unique_ptr<Flight>> flights_;
  std::vector<RequestRecord> records_;
  std::map<std::string, std::size_t> by_id_;
  std::uint64_t next_request_ = 1;
  SimTime last_enqueued_{};
  std::size_t active_encryptions_ = 0;

  // Local execution under processor sharing.
  struct Running {
    std::size_t flight;
    double remaining_ms;  // baseline work left
  };
  std::vector<Running> running_;
  SimTime exec_updated_{};
  std::uint64_t exec_generation_ = 0;
  std::size_t peak_exec_ = 0;

  // Estimators, per app.
  std::map<std::string, double> remote_ewma_;
  std::map<std::string, SimTime> last_remote_activity_;

  std::deque<Completed> results_;
  std::vector<faas::InvocationRecord> keep_alive_;
  HubStats stats_;
  std::vector<nlohmann::json> log_;
  std::FILE* log_file_ = nullptr;
};

}  // namespace ssiot::hub

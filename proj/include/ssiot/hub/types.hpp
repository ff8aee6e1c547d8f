// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssiot/common/bytes.hpp"
#include "ssiot/common/device.hpp"
#include "ssiot/common/sim_clock.hpp"
#include "ssiot/faas/money.hpp"

namespace ssiot::hub {

struct DeviceEvent {
  std::string device_id;
  std::string kind;  // e.g. "image"
  Bytes payload;
  SimTime arrived_at;
};

struct Request {
  std::string request_id;
  std::string app_id;
  Bytes payload;
  SimTime enqueued_at;
  std::optional<SimTime> deadline_hint;
};

class QueueFull : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bounded FIFO, safe for concurrent producers and consumers.
class DataQueue {
 public:
  explicit DataQueue(std::size_t capacity = 1024) : capacity_(capacity) {}

  // Throws QueueFull at capacity.
  void push(Request r);
  std::optional<Request> pop();
  // Puts a request back at the head (it could not be placed yet).
  void push_front(Request r);
  std::size_t size() const;
  std::size_t capacity() const { return capacity_; }
  std::vector<std::string> ids() const;

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::deque<Request> items_;
};

// Hardware description of the hub device.
struct DeviceSpec {
  DeviceClass device_class = DeviceClass::kJetsonNano;
  std::size_t slots = 4;
  double mem_gb = 4.0;
  // Local execution slows to 1 + c(k-1) times baseline with k jobs running.
  double contention = 1.233;
  // Envelope encryption time: base + per MiB of payload, stretched by
  // (1 + enc_contention x other encryptions in progress).
  double enc_base_ms = 45;
  double enc_ms_per_mib = 30;
  double enc_contention = 0.08;
  double power_watts = 10;

  static DeviceSpec defaults(DeviceClass device);
  static DeviceSpec from_json(const nlohmann::json& j);
};

struct Reservation {
  std::size_t slot;
  double mem_gb;
};

// Local slots and memory. try_reserve/release are atomic.
class ResourceMonitor {
 public:
  ResourceMonitor(DeviceClass device, std::size_t total_slots, double total_mem_gb);

  std::optional<Reservation> try_reserve(double mem_gb);
  void release(const Reservation& r);
  bool fits(double mem_gb) const;

  DeviceClass device_class() const { return device_; }
  std::size_t total_slots() const { return total_slots_; }
  double total_mem_gb() const { return total_mem_; }
  std::size_t in_use_slots() const;
  double in_use_mem_gb() const;

 private:
  DeviceClass device_;
  std::size_t total_slots_;
  double total_mem_;
  mutable std::mutex mu_;
  std::vector<bool> busy_;
  std::size_t in_use_ = 0;
  double mem_used_ = 0;
};

// LocalOnly and RemoteOnly are the static assignments used as baselines.
enum class PolicyKind { kLatencyMin, kBudgetCap, kBalanced, kLocalOnly, kRemoteOnly };

std::string_view to_string(PolicyKind k);
std::optional<PolicyKind> parse_policy_kind(std::string_view s);

struct OffloadPolicy {
  PolicyKind kind = PolicyKind::kLatencyMin;
  std::optional<faas::Usd> monthly_budget;  // required for BudgetCap
  double balance_weight = 0.5;              // latency weight for Balanced

  // Throws std::invalid_argument.
  void validate() const;
};

enum class TargetKind { kLocal, kRemote, kQueued, kRejected };
std::string_view to_string(TargetKind k);

struct OffloadDecision {
  TargetKind target = TargetKind::kQueued;
  std::optional<Reservation> slot;  // set for Local
  std::string function_id;          // set for Remote
  PolicyKind policy_kind = PolicyKind::kLatencyMin;
  SimTime decided_at;
  std::string reason;
};

}  // namespace ssiot::hub

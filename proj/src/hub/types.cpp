// SPDX-License-Identifier: Apache-2.0
#include "ssiot/hub/types.hpp"

namespace ssiot::hub {

void DataQueue::push(Request r) {
  std::lock_guard lock(mu_);
  if (items_.size() >= capacity_) {
    throw QueueFull("data queue full (" + std::to_string(capacity_) + " requests)");
  }
  items_.push_back(std::move(r));
}

void DataQueue::push_front(Request r) {
  std::lock_guard lock(mu_);
  items_.push_front(std::move(r));
}

std::optional<Request> DataQueue::pop() {
  std::lock_guard lock(mu_);
  if (items_.empty()) return std::nullopt;
  Request r = std::move(items_.front());
  items_.pop_front();
  return r;
}

std::size_t DataQueue::size() const {
  std::lock_guard lock(mu_);
  return items_.size();
}

std::vector<std::string> DataQueue::ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& r : items_) out.push_back(r.request_id);
  return out;
}

DeviceSpec DeviceSpec::defaults(DeviceClass device) {
  DeviceSpec s;
  s.device_class = device;
  switch (device) {
    case DeviceClass::kRPi:
      s.slots = 4;
      s.mem_gb = 1.0;
      s.enc_base_ms = 140;
      s.enc_ms_per_mib = 120;
      break;
    case DeviceClass::kJetsonNano:
    case DeviceClass::kCustom:
      break;
  }
  return s;
}

DeviceSpec DeviceSpec::from_json(const nlohmann::json& j) {
  auto device = parse_device_class(j.value("device_class", "jetson"));
  if (!device) throw std::invalid_argument("unknown device_class");
  DeviceSpec s = defaults(*device);
  s.slots = j.value("slots", s.slots);
  s.mem_gb = j.value("mem_gb", s.mem_gb);
  s.contention = j.value("contention", s.contention);
  s.enc_base_ms = j.value("enc_base_ms", s.enc_base_ms);
  s.enc_ms_per_mib = j.value("enc_ms_per_mib", s.enc_ms_per_mib);
  s.enc_contention = j.value("enc_contention", s.enc_contention);
  s.power_watts = j.value("power_watts", s.power_watts);
  if (s.contention < 0 || s.mem_gb < 0 || s.enc_base_ms < 0 || s.enc_ms_per_mib < 0) {
    throw std::invalid_argument("device spec values must be >= 0");
  }
  return s;
}

ResourceMonitor::ResourceMonitor(DeviceClass device, std::size_t total_slots, double total_mem_gb)
    : device_(device), total_slots_(total_slots), total_mem_(total_mem_gb), busy_(total_slots, false) {}

std::optional<Reservation> ResourceMonitor::try_reserve(double mem_gb) {
  std::lock_guard lock(mu_);
  if (in_use_ >= total_slots_ || mem_used_ + mem_gb > total_mem_ + 1e-9) return std::nullopt;
  for (std::size_t i = 0; i < busy_.size(); ++i) {
    if (!busy_[i]) {
      busy_[i] = true;
      ++in_use_;
      mem_used_ += mem_gb;
      return Reservation{i, mem_gb};
    }
  }
  return std::nullopt;
}

void ResourceMonitor::release(const Reservation& r) {
  std::lock_guard lock(mu_);
  if (r.slot >= busy_.size() || !busy_[r.slot]) throw std::logic_error("release of a free slot");
  busy_[r.slot] = false;
  --in_use_;
  mem_used_ -= r.mem_gb;
  if (mem_used_ < 1e-9) mem_used_ = 0;
}

bool ResourceMonitor::fits(double mem_gb) const {
  std::lock_guard lock(mu_);
  return in_use_ < total_slots_ && mem_used_ + mem_gb <= total_mem_ + 1e-9;
}

std::size_t ResourceMonitor::in_use_slots() const {
  std::lock_guard lock(mu_);
  return in_use_;
}

double ResourceMonitor::in_use_mem_gb() const {
  std::lock_guard lock(mu_);
  return mem_used_;
}

std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::kLatencyMin: return "latency-min";
    case PolicyKind::kBudgetCap: return "budget-cap";
    case PolicyKind::kBalanced: return "balanced";
    case PolicyKind::kLocalOnly: return "local-only";
    case PolicyKind::kRemoteOnly: return "remote-only";
  }
  return "latency-min";
}

std::optional<PolicyKind> parse_policy_kind(std::string_view s) {
  for (auto k : {PolicyKind::kLatencyMin, PolicyKind::kBudgetCap, PolicyKind::kBalanced,
                 PolicyKind::kLocalOnly, PolicyKind::kRemoteOnly}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

void OffloadPolicy::validate() const {
  if (kind == PolicyKind::kBudgetCap && (!monthly_budget || monthly_budget->atto() <= 0)) {
    throw std::invalid_argument("budget-cap policy needs a positive monthly budget");
  }
  if (kind == PolicyKind::kBalanced && !(balance_weight >= 0 && balance_weight <= 1)) {
    throw std::invalid_argument("balance_weight must be in [0, 1]");
  }
}

std::string_view to_string(TargetKind k) {
  switch (k) {
    case TargetKind::kLocal: return "Local";
    case TargetKind::kRemote: return "Remote";
    case TargetKind::kQueued: return "Queued";
    case TargetKind::kRejected: return "Rejected";
  }
  return "Queued";
}

}  // namespace ssiot::hub

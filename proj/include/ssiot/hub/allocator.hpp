// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ssiot/faas/money.hpp"
#include "ssiot/hub/types.hpp"

namespace ssiot::hub {

inline constexpr double kBillingMonthMs = 720.0 * 3600.0 * 1000.0;
inline constexpr double kElectricityUsdPerKwh = 0.12;

// Cloud spend seen by the hub, bucketed into 720 h billing months.
class CostLedger {
 public:
  void record(SimTime at, faas::Usd amount);
  faas::Usd month_to_date(SimTime now) const;
  faas::Usd total() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::pair<SimTime, faas::Usd>> entries_;
  faas::Usd total_;
};

// Electricity cost of keeping a device of `watts` busy for `ms`.
faas::Usd energy_cost(double watts, double ms, double usd_per_kwh = kElectricityUsdPerKwh);

// Everything the allocator needs to know about one request.
struct AllocationInput {
  // Absent when the profile cannot run on this device.
  std::optional<double> local_expected_ms;
  double local_mem_gb = 0;
  faas::Usd local_expected_cost;
  // Absent when the app has no deployed function.
  std::optional<double> remote_expected_ms;
  std::string function_id;
  faas::Usd remote_expected_cost;
  // Whether the request could ever run locally (device and memory permit).
  bool local_possible = false;
};

// Picks Local / Remote / Queued / Rejected. On Local the slot is already
// reserved in `monitor` when this returns.
OffloadDecision allocate(const AllocationInput& in, ResourceMonitor& monitor,
                         const OffloadPolicy& policy, const CostLedger& ledger, SimTime now);

}  // namespace ssiot::hub

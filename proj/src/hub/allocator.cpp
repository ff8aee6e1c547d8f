// SPDX-License-Identifier: Apache-2.0
#include "ssiot/hub/allocator.hpp"

#include <algorithm>
#include <cmath>

namespace ssiot::hub {

void CostLedger::record(SimTime at, faas::Usd amount) {
  std::lock_guard lock(mu_);
  entries_.emplace_back(at, amount);
  total_ += amount;
}

faas::Usd CostLedger::month_to_date(SimTime now) const {
  const double month = std::floor(to_ms(now) / kBillingMonthMs);
  const SimTime start = at_ms(month * kBillingMonthMs);
  std::lock_guard lock(mu_);
  faas::Usd sum;
  for (const auto& [at, amount] : entries_) {
    if (at >= start && at <= now) sum += amount;
  }
  return sum;
}

faas::Usd CostLedger::total() const {
  std::lock_guard lock(mu_);
  return total_;
}

faas::Usd energy_cost(double watts, double ms, double usd_per_kwh) {
  const double kwh = watts / 1000.0 * (ms / 3'600'000.0);
  return faas::Usd::from_double(kwh * usd_per_kwh);
}

namespace {

OffloadDecision local(ResourceMonitor& monitor, const AllocationInput& in, std::string reason) {
  OffloadDecision d;
  d.slot = monitor.try_reserve(in.local_mem_gb);
  if (!d.slot) return d;  // lost the race; caller sees Queued
  d.target = TargetKind::kLocal;
  d.reason = std::move(reason);
  return d;
}

OffloadDecision remote(const AllocationInput& in, std::string reason) {
  OffloadDecision d;
  d.target = TargetKind::kRemote;
  d.function_id = in.function_id;
  d.reason = std::move(reason);
  return d;
}

OffloadDecision wait_or_reject(const AllocationInput& in, std::string why_reject) {
  OffloadDecision d;
  if (in.local_possible) {
    d.target = TargetKind::kQueued;
    d.reason = "waiting for a local slot";
  } else {
    d.target = TargetKind::kRejected;
    d.reason = std::move(why_reject);
  }
  return d;
}

double share(double v, double a, double b) {
  const double m = std::max(a, b);
  return m > 0 ? v / m : 0.0;
}

OffloadDecision decide(const AllocationInput& in, ResourceMonitor& monitor,
                       const OffloadPolicy& policy, const CostLedger& ledger, SimTime now) {
  const bool local_fits = in.local_expected_ms && monitor.fits(in.local_mem_gb);
  const bool can_remote = in.remote_expected_ms.has_value();

  switch (policy.kind) {
    case PolicyKind::kLocalOnly:
      if (local_fits) return local(monitor, in, "static local");
      return wait_or_reject(in, "profile cannot run on this device");

    case PolicyKind::kRemoteOnly:
      if (can_remote) return remote(in, "static remote");
      return wait_or_reject(in, "no deployed function");

    case PolicyKind::kLatencyMin:
      if (local_fits && (!can_remote || *in.local_expected_ms <= *in.remote_expected_ms)) {
        return local(monitor, in, "local expected faster");
      }
      if (can_remote) return remote(in, local_fits ? "remote expected faster" : "no local capacity");
      return wait_or_reject(in, "no deployed function and cannot run locally");

    case PolicyKind::kBudgetCap: {
      if (local_fits && (!can_remote || *in.local_expected_ms <= *in.remote_expected_ms)) {
        return local(monitor, in, "local expected faster");
      }
      const bool affordable =
          can_remote &&
          ledger.month_to_date(now) + in.remote_expected_cost <= *policy.monthly_budget;
      if (affordable) return remote(in, local_fits ? "remote expected faster" : "no local capacity");
      if (local_fits) return local(monitor, in, "budget exhausted, running locally");
      return wait_or_reject(in, "budget-exhausted");
    }

    case PolicyKind::kBalanced: {
      if (!local_fits) {
        if (can_remote) return remote(in, "no local capacity");
        return wait_or_reject(in, "no deployed function and cannot run locally");
      }
      if (!can_remote) return local(monitor, in, "only local available");
      const double ll = *in.local_expected_ms, rl = *in.remote_expected_ms;
      const double lc = in.local_expected_cost.to_double();
      const double rc = in.remote_expected_cost.to_double();
      const double w = policy.balance_weight;
      const double local_score = w * share(ll, ll, rl) + (1 - w) * share(lc, lc, rc);
      const double remote_score = w * share(rl, ll, rl) + (1 - w) * share(rc, lc, rc);
      if (local_score <= remote_score) return local(monitor, in, "lower weighted score");
      return remote(in, "lower weighted score");
    }
  }
  return wait_or_reject(in, "unknown policy");
}

}  // namespace

OffloadDecision allocate(const AllocationInput& in, ResourceMonitor& monitor,
                         const OffloadPolicy& policy, const CostLedger& ledger, SimTime now) {
  OffloadDecision d = decide(in, monitor, policy, ledger, now);
  if (d.target == TargetKind::kQueued && d.reason.empty()) d.reason = "waiting for a local slot";
  d.policy_kind = policy.kind;
  d.decided_at = now;
  return d;
}

}  // namespace ssiot::hub

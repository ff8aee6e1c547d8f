// SPDX-License-Identifier: Apache-2.0
#include "ssiot/faas/money.hpp"

#include <cmath>
#include <stdexcept>

namespace ssiot::faas {

Usd Usd::parse(std::string_view text) {
  auto fail = [&] { throw std::invalid_argument("not a decimal amount: '" + std::string(text) + "'"); };
  if (text.empty()) fail();
  bool negative = false;
  if (text.front() == '-' || text.front() == '+') {
    negative = text.front() == '-';
    text.remove_prefix(1);
  }
  Rep whole = 0;
  Rep frac = 0;
  int frac_digits = 0;
  bool seen_dot = false;
  bool any_digit = false;
  for (char ch : text) {
    if (ch == '.') {
      if (seen_dot) fail();
      seen_dot = true;
      continue;
    }
    if (ch < '0' || ch > '9') fail();
    any_digit = true;
    if (seen_dot) {
      if (++frac_digits > 18) fail();
      frac = frac * 10 + (ch - '0');
    } else {
      whole = whole * 10 + (ch - '0');
      if (whole > Rep(1'000'000'000'000'000'000)) fail();
    }
  }
  if (!any_digit) fail();
  for (int i = frac_digits; i < 18; ++i) frac *= 10;
  Rep atto = whole * kAttoPerUsd + frac;
  return Usd(negative ? -atto : atto);
}

Usd Usd::from_double(double usd) {
  if (!std::isfinite(usd)) throw std::invalid_argument("non-finite amount");
  return Usd(static_cast<Rep>(std::llround(usd * 1e9)) * 1'000'000'000);
}

std::string Usd::to_string() const {
  Rep v = atto_;
  std::string sign;
  if (v < 0) {
    sign = "-";
    v = -v;
  }
  Rep whole = v / kAttoPerUsd;
  Rep frac = v % kAttoPerUsd;
  std::string w;
  do {
    w.insert(w.begin(), static_cast<char>('0' + static_cast<int>(whole % 10)));
    whole /= 10;
  } while (whole > 0);
  if (frac == 0) return sign + w;
  std::string f(18, '0');
  for (int i = 17; i >= 0; --i) {
    f[static_cast<std::size_t>(i)] = static_cast<char>('0' + static_cast<int>(frac % 10));
    frac /= 10;
  }
  while (f.back() == '0') f.pop_back();
  return sign + w + "." + f;
}

GbSeconds GbSeconds::from_double(double gbs) {
  if (!std::isfinite(gbs)) throw std::invalid_argument("non-finite GB-seconds");
  return GbSeconds(std::llround(gbs * 1e6));
}

Usd invocation_cost(GbSeconds billed, const PricingRates& rates) {
  if (billed.micro() < 0) throw std::invalid_argument("billed GB-seconds must be >= 0");
  return rates.per_request + rates.per_micro_gbs * billed.micro();
}

Usd invocation_cost(double billed_gbs, const PricingRates& rates) {
  if (!(billed_gbs >= 0)) throw std::invalid_argument("billed GB-seconds must be >= 0");
  return invocation_cost(GbSeconds::from_double(billed_gbs), rates);
}

std::int64_t requests_per_dollar(GbSeconds billed, const PricingRates& rates) {
  const Usd cost = invocation_cost(billed, rates);
  if (cost.atto() <= 0) throw std::invalid_argument("invocation cost must be positive");
  return static_cast<std::int64_t>(Usd::kAttoPerUsd / cost.atto());
}

GbSeconds billed_for(double memory_gb, double duration_ms) {
  if (!(memory_gb >= 0) || !(duration_ms >= 0)) {
    throw std::invalid_argument("memory and duration must be >= 0");
  }
  // Tolerate float noise just above a quantum boundary (e.g. 300.0000001).
  const double quanta = std::ceil(duration_ms / kBillingQuantumMs - 1e-9);
  const std::int64_t billed_ms = static_cast<std::int64_t>(quanta) * 100;
  const std::int64_t memory_mgb = std::llround(memory_gb * 1000.0);  // milli-GB
  return GbSeconds::from_micro(memory_mgb * billed_ms);
}

Usd CostMeter::record(std::string invocation_id, std::string function_id, GbSeconds billed,
                      bool keep_alive) {
  const Usd cost = invocation_cost(billed, rates_);
  entries_.push_back({std::move(invocation_id), std::move(function_id), billed, cost, keep_alive});
  total_ += cost;
  return cost;
}

Usd CostMeter::total_for(std::string_view function_id) const {
  Usd sum;
  for (const auto& e : entries_) {
    if (e.function_id == function_id) sum += e.cost;
  }
  return sum;
}

Usd CostMeter::keep_alive_total() const {
  Usd sum;
  for (const auto& e : entries_) {
    if (e.keep_alive) sum += e.cost;
  }
  return sum;
}

}  // namespace ssiot::faas

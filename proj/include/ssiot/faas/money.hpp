// SPDX-License-Identifier: Apache-2.0
#pragma once

// Exact money and billing units.
//
// Usd holds atto-dollars (1e-18 USD) in a 128-bit integer, GbSeconds holds
// micro-GB-seconds. The per-GB-second rate 1.66667e-5 USD is exactly
// 16'666'700 atto-dollars per micro-GB-second, so metering never rounds.

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace ssiot::faas {

class Usd {
 public:
  using Rep = __int128;
  static constexpr std::int64_t kAttoPerUsd = 1'000'000'000'000'000'000;

  constexpr Usd() = default;
  static constexpr Usd from_atto(Rep atto) { return Usd(atto); }
  // Exact decimal parse, e.g. "0.0000502" or "5". At most 18 fraction digits.
  static Usd parse(std::string_view text);
  // Nearest atto-dollar; for config values and display only.
  static Usd from_double(double usd);

  constexpr Rep atto() const { return atto_; }
  double to_double() const { return static_cast<double>(atto_) / 1e18; }
  // Exact decimal form without trailing zeros, e.g. "0.0000502".
  std::string to_string() const;

  constexpr Usd& operator+=(Usd o) {
    atto_ += o.atto_;
    return *this;
  }
  constexpr Usd& operator-=(Usd o) {
    atto_ -= o.atto_;
    return *this;
  }
  friend constexpr Usd operator+(Usd a, Usd b) { return a += b; }
  friend constexpr Usd operator-(Usd a, Usd b) { return a -= b; }
  friend constexpr Usd operator*(Usd a, std::int64_t n) { return Usd(a.atto_ * n); }
  friend constexpr auto operator<=>(Usd, Usd) = default;

 private:
  constexpr explicit Usd(Rep atto) : atto_(atto) {}
  Rep atto_ = 0;
};

class GbSeconds {
 public:
  constexpr GbSeconds() = default;
  static constexpr GbSeconds from_micro(std::int64_t micro) { return GbSeconds(micro); }
  // Rounded to the nearest micro-GB-second.
  static GbSeconds from_double(double gbs);

  constexpr std::int64_t micro() const { return micro_; }
  double to_double() const { return static_cast<double>(micro_) / 1e6; }

  constexpr GbSeconds& operator+=(GbSeconds o) {
    micro_ += o.micro_;
    return *this;
  }
  friend constexpr GbSeconds operator+(GbSeconds a, GbSeconds b) { return a += b; }
  friend constexpr auto operator<=>(GbSeconds, GbSeconds) = default;

 private:
  constexpr explicit GbSeconds(std::int64_t micro) : micro_(micro) {}
  std::int64_t micro_ = 0;
};

struct PricingRates {
  Usd per_request = Usd::from_atto(200'000'000'000);  // 2.0e-7
  Usd per_micro_gbs = Usd::from_atto(16'666'700);     // 1.66667e-5 per GB-s
};

inline constexpr PricingRates kLambdaRates{};

// Billing granularity for durations.
inline constexpr double kBillingQuantumMs = 100.0;

// request fee + rate x billed. Throws std::invalid_argument on negative input.
Usd invocation_cost(GbSeconds billed, const PricingRates& rates = kLambdaRates);
Usd invocation_cost(double billed_gbs, const PricingRates& rates = kLambdaRates);

// floor(1 USD / invocation_cost(billed)).
std::int64_t requests_per_dollar(GbSeconds billed, const PricingRates& rates = kLambdaRates);

// memory x duration, with the duration rounded up to the billing quantum.
GbSeconds billed_for(double memory_gb, double duration_ms);

struct MeterEntry {
  std::string invocation_id;
  std::string function_id;
  GbSeconds billed;
  Usd cost;
  bool keep_alive = false;
};

// Per-run ledger. Rates are fixed at construction.
class CostMeter {
 public:
  explicit CostMeter(PricingRates rates = kLambdaRates) : rates_(rates) {}

  Usd record(std::string invocation_id, std::string function_id, GbSeconds billed,
             bool keep_alive = false);

  Usd total() const { return total_; }
  Usd total_for(std::string_view function_id) const;
  Usd keep_alive_total() const;
  const std::vector<MeterEntry>& entries() const { return entries_; }
  const PricingRates& rates() const { return rates_; }

 private:
  PricingRates rates_;
  std::vector<MeterEntry> entries_;
  Usd total_;
};

}  // namespace ssiot::faas

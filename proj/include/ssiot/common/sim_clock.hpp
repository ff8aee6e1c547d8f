// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>

namespace ssiot {

// Virtual clock used by the emulator, hub and benchmarks. Time points are
// milliseconds since the start of a run, stored as double so calibrated
// latencies (e.g. 851 ms) compose without rounding.
struct SimClock {
  using rep = double;
  using period = std::milli;
  using duration = std::chrono::duration<rep, period>;
  using time_point = std::chrono::time_point<SimClock>;
  static constexpr bool is_steady = true;
};

using SimDuration = SimClock::duration;
using SimTime = SimClock::time_point;

constexpr SimDuration sim_ms(double v) { return SimDuration(v); }
constexpr SimTime at_ms(double v) { return SimTime(SimDuration(v)); }
constexpr double to_ms(SimDuration d) { return d.count(); }
constexpr double to_ms(SimTime t) { return t.time_since_epoch().count(); }

}  // namespace ssiot

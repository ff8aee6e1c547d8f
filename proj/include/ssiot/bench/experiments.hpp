// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <string>
#include <vector>

#include "ssiot/bench/report.hpp"
#include "ssiot/common/sim_clock.hpp"

namespace ssiot::bench {

// Request arrivals for the offload experiment.
struct TraceSpec {
  enum class Arrival { kFixedInterval, kBurst, kScripted };
  Arrival arrival = Arrival::kBurst;
  double interval_ms = 1000;      // fixed-interval
  std::size_t burst_size = 8;     // burst
  double inter_burst_ms = 60'000; // burst
  std::vector<double> scripted_ms;
  double duration_ms = 100 * 60'000.0;
  // Profile name -> weight.
  std::map<std::string, double> mix{{"DenseNet", 0.8}, {"MobileNet", 0.2}};
  std::uint64_t seed = 7;
  std::size_t payload_bytes = 100'000;

  static TraceSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct Arrival {
  double at_ms;
  std::string profile;
  std::uint64_t payload_seed;
};

// Same spec, same arrivals.
std::vector<Arrival> generate(const TraceSpec& spec);

// Every runner takes a JSON config (missing keys use defaults), echoes the
// effective config into the report and never touches wall-clock time.
Report run_coldwarm(const nlohmann::json& config = {});
Report run_latency_matrix(const nlohmann::json& config = {});
Report run_scalability(const nlohmann::json& config = {});
Report run_offload(const nlohmann::json& config = {});
Report run_cost_report(const nlohmann::json& config = {});
Report run_doorbell(const nlohmann::json& config = {});

std::vector<std::string> experiment_names();
// Throws std::invalid_argument for unknown names.
Report run_experiment(const std::string& name, const nlohmann::json& config = {});

}  // namespace ssiot::bench

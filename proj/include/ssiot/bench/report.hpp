// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace ssiot::bench {

inline constexpr const char* kReportSchema = "ssiot-bench-report/1";

// Count, mean, population stddev, min, max and nearest-rank percentiles.
nlohmann::json summarize(std::vector<double> values);

// Experiment output. Aggregates are derived from `records` through named
// queries, so any consumer can recompute them (see verify_report).
class Report {
 public:
  explicit Report(std::string experiment) : experiment_(std::move(experiment)) {}

  void set_config(nlohmann::json config) { config_ = std::move(config); }
  void set_calibration(nlohmann::json calibration) { calibration_ = std::move(calibration); }
  void add_record(nlohmann::json record) { records_.push_back(std::move(record)); }

  // Statistics of numeric `field` over records matching every key in `where`.
  const nlohmann::json& add_stats(const std::string& name, nlohmann::json where,
                                  const std::string& field);
  // Exact sum of a decimal-string USD field.
  const nlohmann::json& add_usd_sum(const std::string& name, nlohmann::json where,
                                    const std::string& field);
  // `hard` checks are gates; soft ones are reported only.
  void add_check(const std::string& name, bool pass, nlohmann::json value, nlohmann::json target,
                 bool hard = true);
  void add_note(const std::string& key, nlohmann::json value) { notes_[key] = std::move(value); }

  const std::vector<nlohmann::json>& records() const { return records_; }
  const nlohmann::json& aggregate(const std::string& name) const { return aggregates_.at(name); }
  bool hard_checks_pass() const;

  nlohmann::json to_json() const;
  // Pretty JSON with a trailing newline; byte-stable for equal inputs.
  std::string dump() const;
  // One row per record, columns = sorted union of record keys.
  std::string csv() const;

 private:
  std::string experiment_;
  nlohmann::json config_ = nlohmann::json::object();
  nlohmann::json calibration_ = nlohmann::json::object();
  std::vector<nlohmann::json> records_;
  nlohmann::json aggregates_ = nlohmann::json::object();
  nlohmann::json checks_ = nlohmann::json::array();
  nlohmann::json notes_ = nlohmann::json::object();
};

// Recomputes every aggregate from the records. Returns the names whose
// stored value differs (empty when the report is consistent).
std::vector<std::string> verify_report(const nlohmann::json& report);

}  // namespace ssiot::bench

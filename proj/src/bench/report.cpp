// SPDX-License-Identifier: Apache-2.0
#include "ssiot/bench/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "ssiot/faas/money.hpp"

namespace ssiot::bench {

using nlohmann::json;

namespace {

bool matches(const json& record, const json& where) {
  for (const auto& [k, v] : where.items()) {
    auto it = record.find(k);
    if (it == record.end() || *it != v) return false;
  }
  return true;
}

json compute(const json& spec, const std::vector<json>& records) {
  const json& where = spec.at("where");
  const std::string field = spec.at("field").get<std::string>();
  const std::string kind = spec.at("kind").get<std::string>();
  if (kind == "stats") {
    std::vector<double> values;
    for (const auto& r : records) {
      if (matches(r, where) && r.contains(field)) values.push_back(r[field].get<double>());
    }
    return summarize(std::move(values));
  }
  faas::Usd sum;
  std::size_t n = 0;
  for (const auto& r : records) {
    if (matches(r, where) && r.contains(field)) {
      sum += faas::Usd::parse(r[field].get<std::string>());
      ++n;
    }
  }
  return {{"count", n}, {"sum_usd", sum.to_string()}};
}

double percentile(const std::vector<double>& sorted, double q) {
  // Nearest rank.
  const auto n = sorted.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
  return sorted[std::clamp<std::size_t>(rank, 1, n) - 1];
}

std::string csv_cell(const json& v) {
  std::string s = v.is_string() ? v.get<std::string>() : v.dump();
  if (s.find_first_of(",\"\n") != std::string::npos) {
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  }
  return s;
}

}  // namespace

json summarize(std::vector<double> values) {
  json out{{"count", values.size()}};
  if (values.empty()) return out;
  std::sort(values.begin(), values.end());
  double sum = 0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double var = 0;
  for (double v : values) var += (v - mean) * (v - mean);
  out["mean"] = mean;
  out["stddev"] = std::sqrt(var / static_cast<double>(values.size()));
  out["min"] = values.front();
  out["max"] = values.back();
  out["p50"] = percentile(values, 0.50);
  out["p90"] = percentile(values, 0.90);
  out["p99"] = percentile(values, 0.99);
  return out;
}

const json& Report::add_stats(const std::string& name, json where, const std::string& field) {
  json spec{{"kind", "stats"}, {"where", std::move(where)}, {"field", field}};
  spec["value"] = compute(spec, records_);
  aggregates_[name] = std::move(spec);
  return aggregates_[name]["value"];
}

const json& Report::add_usd_sum(const std::string& name, json where, const std::string& field) {
  json spec{{"kind", "usd_sum"}, {"where", std::move(where)}, {"field", field}};
  spec["value"] = compute(spec, records_);
  aggregates_[name] = std::move(spec);
  return aggregates_[name]["value"];
}

void Report::add_check(const std::string& name, bool pass, json value, json target, bool hard) {
  checks_.push_back({{"name", name},
                     {"pass", pass},
                     {"value", std::move(value)},
                     {"target", std::move(target)},
                     {"hard", hard}});
}

bool Report::hard_checks_pass() const {
  for (const auto& c : checks_) {
    if (c["hard"].get<bool>() && !c["pass"].get<bool>()) return false;
  }
  return true;
}

json Report::to_json() const {
  return {{"schema", kReportSchema},
          {"experiment", experiment_},
          {"mode", "virtual-time"},
          {"config", config_},
          {"calibration", calibration_},
          {"records", records_},
          {"aggregates", aggregates_},
          {"checks", checks_},
          {"notes", notes_}};
}

std::string Report::dump() const {
  // Pretty-printed, except records: one compact line each keeps large
  // reports readable and diffable.
  const json doc = to_json();
  std::string out = "{\n";
  bool first = true;
  for (const auto& [key, value] : doc.items()) {
    out += first ? "" : ",\n";
    first = false;
    out += "  " + json(key).dump() + ": ";
    if (key == "records") {
      out += "[";
      for (std::size_t i = 0; i < value.size(); ++i) {
        out += (i ? ",\n    " : "\n    ") + value[i].dump();
      }
      out += value.empty() ? "]" : "\n  ]";
    } else {
      std::string nested = value.dump(2);
      std::string indented;
      for (char c : nested) {
        indented += c;
        if (c == '\n') indented += "  ";
      }
      out += indented;
    }
  }
  return out + "\n}\n";
}

std::string Report::csv() const {
  std::set<std::string> keys;
  for (const auto& r : records_) {
    for (const auto& [k, _] : r.items()) keys.insert(k);
  }
  std::ostringstream out;
  bool first = true;
  for (const auto& k : keys) {
    out << (first ? "" : ",") << csv_cell(k);
    first = false;
  }
  out << "\n";
  for (const auto& r : records_) {
    first = true;
    for (const auto& k : keys) {
      out << (first ? "" : ",");
      if (r.contains(k)) out << csv_cell(r[k]);
      first = false;
    }
    out << "\n";
  }
  return out.str();
}

std::vector<std::string> verify_report(const json& report) {
  std::vector<std::string> bad;
  if (report.value("schema", "") != kReportSchema) bad.push_back("schema");
  std::vector<json> records = report.at("records").get<std::vector<json>>();
  for (const auto& [name, spec] : report.at("aggregates").items()) {
    if (compute(spec, records) != spec.at("value")) bad.push_back(name);
  }
  return bad;
}

}  // namespace ssiot::bench

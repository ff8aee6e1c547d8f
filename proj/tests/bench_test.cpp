// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "ssiot/bench/experiments.hpp"

namespace ssiot::bench {
namespace {

using nlohmann::json;

void expect_hard_checks_pass(const Report& r) {
  const json j = r.to_json();
  for (const auto& c : j["checks"]) {
    if (c["hard"].get<bool>()) EXPECT_TRUE(c["pass"].get<bool>()) << c.dump();
  }
  EXPECT_TRUE(r.hard_checks_pass());
  EXPECT_TRUE(verify_report(r.to_json()).empty());
}

const json& check(const json& report, const std::string& name) {
  for (const auto& c : report["checks"]) {
    if (c["name"] == name) return c;
  }
  throw std::out_of_range(name);
}

TEST(Summary, MomentsAndNearestRankPercentiles) {
  const json s = summarize({4, 1, 3, 2});
  EXPECT_EQ(s["count"], 4);
  EXPECT_DOUBLE_EQ(s["mean"].get<double>(), 2.5);
  EXPECT_NEAR(s["stddev"].get<double>(), std::sqrt(1.25), 1e-12);
  EXPECT_EQ(s["min"], 1.0);
  EXPECT_EQ(s["max"], 4.0);
  EXPECT_EQ(s["p50"], 2.0);
  EXPECT_EQ(s["p90"], 4.0);
  EXPECT_EQ(summarize({})["count"], 0);
  EXPECT_FALSE(summarize({}).contains("mean"));
}

TEST(Report, VerifyDetectsTamperedAggregate) {
  Report r("t");
  r.add_record({{"kind", "a"}, {"x", 1.0}, {"usd", "0.1"}});
  r.add_record({{"kind", "a"}, {"x", 3.0}, {"usd", "0.2"}});
  r.add_record({{"kind", "b"}, {"x", 100.0}, {"usd", "5"}});
  EXPECT_EQ(r.add_stats("a.x", {{"kind", "a"}}, "x")["mean"], 2.0);
  EXPECT_EQ(r.add_usd_sum("a.usd", {{"kind", "a"}}, "usd")["sum_usd"], "0.3");
  json j = r.to_json();
  EXPECT_EQ(j["schema"], kReportSchema);
  EXPECT_TRUE(verify_report(j).empty());
  j["aggregates"]["a.x"]["value"]["mean"] = 2.5;
  EXPECT_EQ(verify_report(j), std::vector<std::string>{"a.x"});
  j = r.to_json();
  j["records"][0]["x"] = 7.0;
  EXPECT_EQ(verify_report(j), std::vector<std::string>{"a.x"});
}

TEST(Report, HardAndSoftChecks) {
  Report r("t");
  r.add_check("soft", false, 1, 2, false);
  EXPECT_TRUE(r.hard_checks_pass());
  r.add_check("hard", false, 1, 2);
  EXPECT_FALSE(r.hard_checks_pass());
}

TEST(Report, CsvUnionOfKeysAndQuoting) {
  Report r("t");
  r.add_record({{"b", 1}, {"a", "x,y"}});
  r.add_record({{"c", "say \"hi\""}});
  EXPECT_EQ(r.csv(), "a,b,c\n\"x,y\",1,\n,,\"say \"\"hi\"\"\"\n");
}

TEST(Report, DumpIsParseableAndOneLinePerRecord) {
  Report r("t");
  r.add_record({{"a", 1}});
  r.add_record({{"a", 2}});
  const std::string text = r.dump();
  EXPECT_EQ(json::parse(text), r.to_json());
  EXPECT_NE(text.find("\n    {\"a\":1},\n    {\"a\":2}\n"), std::string::npos);
}

TEST(Trace, BurstShapeAndDeterminism) {
  TraceSpec spec;
  spec.duration_ms = 10 * 60'000.0;
  const auto a = generate(spec);
  ASSERT_EQ(a.size(), 80u);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].at_ms, (i / 8) * 60'000.0);
  const auto b = generate(spec);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].profile, b[i].profile);
    EXPECT_EQ(a[i].payload_seed, b[i].payload_seed);
  }
  spec.seed = 8;
  const auto c = generate(spec);
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) differs |= a[i].payload_seed != c[i].payload_seed;
  EXPECT_TRUE(differs);
}

TEST(Trace, MixFrequenciesFollowWeights) {
  TraceSpec spec;
  spec.arrival = TraceSpec::Arrival::kFixedInterval;
  spec.interval_ms = 1;
  spec.duration_ms = 20'000;
  spec.mix = {{"A", 3}, {"B", 1}};
  std::map<std::string, int> n;
  for (const auto& a : generate(spec)) ++n[a.profile];
  EXPECT_NEAR(n["A"] / 20'000.0, 0.75, 0.02);
}

TEST(Trace, JsonRoundTripAndValidation) {
  TraceSpec spec;
  spec.arrival = TraceSpec::Arrival::kScripted;
  spec.scripted_ms = {5, 1, 3};
  const auto back = TraceSpec::from_json(spec.to_json());
  EXPECT_EQ(back.to_json(), spec.to_json());
  const auto a = generate(back);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[0].at_ms, 1);
  EXPECT_EQ(a[2].at_ms, 5);
  EXPECT_THROW(TraceSpec::from_json({{"arrival", "poisson"}}), std::invalid_argument);
  EXPECT_THROW(TraceSpec::from_json({{"mix", json::object()}}), std::invalid_argument);
  EXPECT_THROW(TraceSpec::from_json({{"mix", {{"A", 0}}}}), std::invalid_argument);
}

TEST(Experiments, CostTablesMatchIndependentArithmetic) {
  const Report r = run_cost_report();
  expect_hard_checks_pass(r);
  std::map<std::string, double> monthly;
  std::map<std::string, std::int64_t> rpd;
  for (const auto& rec : r.records()) {
    if (rec["table"] == "baseline") monthly[rec["name"]] = rec["monthly_usd"];
    if (rec["table"] == "requests_per_dollar") {
      rpd[rec["profile"].get<std::string>() + "." + rec["state"].get<std::string>()] =
          rec["requests_per_dollar"];
    }
  }
  // 10 W for 720 h at $0.12/kWh.
  EXPECT_NEAR(monthly["Raspberry Pi"], 0.864, 1e-9);
  EXPECT_NEAR(monthly["Local Desktop"], 8.64, 1e-9);
  EXPECT_NEAR(monthly["VM reserved"], 5.04, 1e-9);
  EXPECT_EQ(rpd.size(), 8u);
  EXPECT_NEAR(rpd["MobileNet.warm"], 65789, 658);
  EXPECT_NEAR(rpd["Darknet.cold"], 1851, 19);
}

TEST(Experiments, ColdWarmMeansWithoutJitterAreNominal) {
  const Report r = run_coldwarm({{"invocations", 5}, {"jitter_ms", 0.0}});
  expect_hard_checks_pass(r);
  EXPECT_NEAR(r.aggregate("DenseNet.cold")["value"]["mean"].get<double>(), 9153, 1);
  EXPECT_NEAR(r.aggregate("DenseNet.warm")["value"]["mean"].get<double>(), 851, 1);
  EXPECT_NEAR(r.aggregate("Darknet.cold")["value"]["mean"].get<double>(), 35959, 1);
  EXPECT_NEAR(r.aggregate("Darknet.warm")["value"]["mean"].get<double>(), 7092, 1);
  EXPECT_EQ(r.to_json()["config"]["invocations"], 5);
}

TEST(Experiments, LatencyMatrixMarksUnsupportedCells) {
  const Report r = run_latency_matrix({{"samples", 3}});
  expect_hard_checks_pass(r);
  int unsupported = 0;
  for (const auto& rec : r.records()) {
    if (!rec["supported"].get<bool>()) {
      ++unsupported;
      EXPECT_EQ(rec["platform"], "rpi");
    }
  }
  EXPECT_EQ(unsupported, 2);
  EXPECT_EQ(r.aggregate("DenseNet.jetson")["value"]["mean"], 587.0);
  EXPECT_EQ(r.aggregate("MobileNet.rpi")["value"]["mean"], 620.0);
}

TEST(Experiments, ScalabilityCeilingsOnJetson) {
  const Report r = run_scalability({{"max_concurrency", 6}});
  expect_hard_checks_pass(r);
  const json j = r.to_json();
  EXPECT_EQ(check(j, "DenseNet.jetson.local_ceiling")["value"], 4);
  EXPECT_EQ(check(j, "Darknet.jetson.local_ceiling")["value"], 2);
  EXPECT_EQ(r.aggregate("DenseNet.jetson.c6.lambda.e2e")["value"]["count"], 6);
}

TEST(Experiments, OffloadHybridDominates) {
  const json cfg{{"max_local", {1, 4}}, {"trace", {{"duration_ms", 15 * 60'000.0}}}};
  const Report r = run_offload(cfg);
  expect_hard_checks_pass(r);
  EXPECT_EQ(r.aggregate("remote-only.cap4.local_fraction")["value"]["mean"], 0.0);
  EXPECT_EQ(r.aggregate("local-only.cap4.local_fraction")["value"]["mean"], 1.0);
  EXPECT_EQ(r.aggregate("local-only.cap1.cloud_cost")["value"]["sum_usd"], "0");
}

TEST(Experiments, RerunIsByteIdentical) {
  const json cfg{{"max_local", {2}}, {"trace", {{"duration_ms", 5 * 60'000.0}}}};
  EXPECT_EQ(run_offload(cfg).dump(), run_offload(cfg).dump());
  EXPECT_EQ(run_doorbell({{"days", 2}}).dump(), run_doorbell({{"days", 2}}).dump());
}

TEST(Experiments, DoorbellWeekIsCheapAndNotifies) {
  const Report r = run_doorbell({{"days", 7}});
  expect_hard_checks_pass(r);
  const json j = r.to_json();
  EXPECT_EQ(j["notes"]["notifications"], 7 * 50);
  // Warm SSD detection buys about 7133 requests per dollar.
  const double per_inference = 1.0 / 7133;
  EXPECT_NEAR(j["notes"]["annualized_inference_usd"].get<double>(), 365 * 50 * per_inference,
              0.05 * 365 * 50 * per_inference);
  EXPECT_LT(j["notes"]["annualized_total_usd"].get<double>(), 10.0);
}

TEST(Experiments, DoorbellLowScoreNeverNotifies) {
  const Report r = run_doorbell({{"days", 1}, {"stub_score", 0.5}});
  expect_hard_checks_pass(r);
  EXPECT_EQ(r.to_json()["notes"]["notifications"], 0);
}

TEST(Experiments, DoorbellWithoutKeepAliveGoesCold) {
  const Report r = run_doorbell({{"days", 2}, {"keep_alive", false}, {"sessions_per_day", 4}});
  const json j = r.to_json();
  EXPECT_GT(j["notes"]["cold_served"].get<int>(), 1);
  EXPECT_EQ(j["notes"]["annualized_keep_alive_usd"], 0.0);
}

TEST(Experiments, DoorbellRulesFileOverride) {
  const Report r =
      run_doorbell({{"days", 1}, {"rules_file", std::string(SSIOT_CONFIG_DIR) + "/doorbell.rules"}});
  expect_hard_checks_pass(r);
  EXPECT_EQ(r.to_json()["notes"]["notifications"], 50);
}

TEST(Experiments, UnknownNameThrows) {
  EXPECT_THROW(run_experiment("nope"), std::invalid_argument);
  EXPECT_EQ(experiment_names().size(), 6u);
}

}  // namespace
}  // namespace ssiot::bench

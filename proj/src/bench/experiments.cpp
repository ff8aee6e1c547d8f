// SPDX-License-Identifier: Apache-2.0
#include "ssiot/bench/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "ssiot/hub/hub.hpp"
#include "ssiot/kms/service.hpp"
#include "ssiot/rules/ast.hpp"
#include "ssiot/toolchain/toolchain.hpp"

namespace ssiot::bench {

using nlohmann::json;

namespace {

constexpr double kMinuteMs = 60'000.0;
constexpr double kHourMs = 60 * kMinuteMs;
constexpr double kDayMs = 24 * kHourMs;

// Default doorbell automation: notify when the detector sees a person.
constexpr const char* kDoorbellRules = R"(rule "Rule#1"
when
    Thing "sensor_1" changed from "off" to "on"
then
    ssiot_object_detection.sendCommand("REFRESH")
end

rule "Rule#2"
when
    Item "ssiot_object_detection" received update
then
    if label == "person" && score > 0.80 {
        sendNotification("detected a person")
    }
end
)";

// Config value with default; the effective value is written back so the
// report echoes exactly what ran.
template <typename T>
T opt(json& cfg, const char* key, T fallback) {
  if (!cfg.contains(key)) cfg[key] = fallback;
  return cfg[key].get<T>();
}

Bytes synthetic_frame(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Bytes b(n);
  for (std::size_t i = 0; i < n; i += 8) {
    const std::uint64_t v = rng();
    for (std::size_t k = 0; k < 8 && i + k < n; ++k) b[i + k] = static_cast<std::uint8_t>(v >> (8 * k));
  }
  return b;
}

double rel_err(double got, double want) { return std::abs(got - want) / want; }

// One isolated platform: KMS, emulator and provisioned apps.
struct Env {
  std::shared_ptr<kms::KeyManagementService> kms;
  std::shared_ptr<faas::KmsDirectory> directory = std::make_shared<faas::KmsDirectory>();
  std::unique_ptr<faas::FaasEmulator> emu;
  toolchain::HubKeyStore keys{"", "bench"};
  toolchain::BehaviorCatalog behaviors;
  double kms_latency_ms;

  Env(std::uint64_t seed, double jitter_ms, double kms_latency = kms::kCloudAdjacentLatencyMs)
      : kms_latency_ms(kms_latency) {
    kms = std::make_shared<kms::KeyManagementService>(kms::KmsConfig{
        .simulated_response_latency_ms = kms_latency, .kms_id = "kms-bench"});
    directory->add("inproc://kms", kms);
    faas::EmulatorConfig cfg;
    cfg.seed = seed;
    cfg.jitter_ms = jitter_ms;
    emu = std::make_unique<faas::FaasEmulator>(cfg, faas::ProfileCatalog{}, directory);
  }

  hub::AppBinding app(const std::string& profile, const std::string& device,
                      const std::string& item, bool deploy = true) {
    const std::string app_id = "app." + profile;
    auto p = toolchain::provision_app(app_id, *kms, keys);
    hub::AppBinding b;
    b.app_id = app_id;
    b.item_id = item;
    b.profile = profile;
    b.keys = p.keys;
    b.kms = p.kms;
    b.kms_url = "inproc://kms";
    b.source_device = device;
    if (deploy) {
      auto pkg = toolchain::package_app(app_id, profile, {p.kms.kms_id, "inproc://kms"},
                                        p.keys.private_key, faas::kMaxMemoryGb, behaviors);
      b.function_id = toolchain::deploy_app(pkg, *emu, {}, [] { return 0; }).function_id;
    }
    return b;
  }

  std::unique_ptr<hub::Hub> hub(hub::HubConfig cfg) {
    cfg.keep_event_log = false;
    return std::make_unique<hub::Hub>(cfg, *emu, faas::ProfileCatalog{}, directory);
  }
};

hub::HubConfig hub_config(DeviceClass device, hub::PolicyKind policy,
                          std::optional<std::size_t> max_local = std::nullopt) {
  hub::HubConfig c;
  c.device = hub::DeviceSpec::defaults(device);
  c.policy.kind = policy;
  c.max_local = max_local;
  return c;
}

DeviceClass device_of(const std::string& name) {
  auto d = parse_device_class(name);
  if (!d) throw std::invalid_argument("unknown device class " + name);
  return *d;
}

json calibration(double kms_latency_ms, double jitter_ms) {
  json profiles = json::array();
  const faas::ProfileCatalog cat;
  for (const auto& [_, p] : cat.all()) profiles.push_back(p);
  json devices = json::object();
  for (auto d : {DeviceClass::kRPi, DeviceClass::kJetsonNano}) {
    const auto s = hub::DeviceSpec::defaults(d);
    devices[std::string(to_string(d))] = {{"slots", s.slots},
                                          {"mem_gb", s.mem_gb},
                                          {"contention", s.contention},
                                          {"enc_base_ms", s.enc_base_ms},
                                          {"enc_ms_per_mib", s.enc_ms_per_mib},
                                          {"enc_contention", s.enc_contention},
                                          {"power_watts", s.power_watts}};
  }
  return {{"source",
           "latencies are emulated from calibrated workload profiles, not measured on hardware"},
          {"profiles", profiles},
          {"devices", devices},
          {"network_overhead_ms", faas::kDefaultNetworkOverheadMs},
          {"kms_latency_ms", kms_latency_ms},
          {"jitter_ms", jitter_ms},
          {"idle_threshold_min", 26},
          {"uplink_mbps", hub::HubConfig{}.uplink_mbps}};
}

json slim(const hub::RequestRecord& r) {
  json j{{"request_id", r.request_id},
         {"app_id", r.app_id},
         {"terminal", to_string(r.terminal)},
         {"enqueued_at_ms", to_ms(r.enqueued_at)},
         {"e2e_ms", r.e2e_ms},
         {"queue_wait_ms", r.queue_wait_ms},
         {"encryption_ms", r.encryption_ms},
         {"transfer_ms", r.transfer_ms},
         {"kms_ms", r.kms_ms},
         {"exec_ms", r.exec_ms},
         {"cloud_cost_usd", r.cloud_cost.to_string()},
         {"local", r.terminal == hub::Terminal::kLocalDone ? 1 : 0},
         {"admission_failed", r.admission_failed ? 1 : 0}};
  if (r.served_state) {
    j["served_state"] = faas::to_string(*r.served_state);
    j["platform_e2e_ms"] = r.remote_e2e_ms;
  }
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

std::vector<std::string> string_list(json& cfg, const char* key, std::vector<std::string> fallback) {
  return opt(cfg, key, fallback);
}

}  // namespace

// ------------------------------------------------------------------ trace

TraceSpec TraceSpec::from_json(const json& j) {
  TraceSpec t;
  const std::string arrival = j.value("arrival", "burst");
  if (arrival == "fixed-interval") {
    t.arrival = Arrival::kFixedInterval;
  } else if (arrival == "burst") {
    t.arrival = Arrival::kBurst;
  } else if (arrival == "scripted") {
    t.arrival = Arrival::kScripted;
  } else {
    throw std::invalid_argument("unknown arrival process " + arrival);
  }
  t.interval_ms = j.value("interval_ms", t.interval_ms);
  t.burst_size = j.value("burst_size", t.burst_size);
  t.inter_burst_ms = j.value("inter_burst_ms", t.inter_burst_ms);
  t.scripted_ms = j.value("scripted_ms", t.scripted_ms);
  t.duration_ms = j.value("duration_ms", t.duration_ms);
  if (j.contains("mix")) t.mix = j["mix"].get<std::map<std::string, double>>();
  t.seed = j.value("seed", t.seed);
  t.payload_bytes = j.value("payload_bytes", t.payload_bytes);
  if (t.mix.empty()) throw std::invalid_argument("trace mix is empty");
  for (const auto& [name, w] : t.mix) {
    if (!(w > 0)) throw std::invalid_argument("mix weight for " + name + " must be > 0");
  }
  if (t.interval_ms <= 0 || t.inter_burst_ms <= 0 || t.burst_size == 0) {
    throw std::invalid_argument("trace intervals and burst size must be positive");
  }
  return t;
}

json TraceSpec::to_json() const {
  static constexpr const char* kNames[] = {"fixed-interval", "burst", "scripted"};
  return {{"arrival", kNames[static_cast<int>(arrival)]},
          {"interval_ms", interval_ms},
          {"burst_size", burst_size},
          {"inter_burst_ms", inter_burst_ms},
          {"scripted_ms", scripted_ms},
          {"duration_ms", duration_ms},
          {"mix", mix},
          {"seed", seed},
          {"payload_bytes", payload_bytes}};
}

std::vector<Arrival> generate(const TraceSpec& spec) {
  std::vector<double> times;
  switch (spec.arrival) {
    case TraceSpec::Arrival::kFixedInterval:
      for (double t = 0; t < spec.duration_ms; t += spec.interval_ms) times.push_back(t);
      break;
    case TraceSpec::Arrival::kBurst:
      for (double t = 0; t < spec.duration_ms; t += spec.inter_burst_ms) {
        for (std::size_t i = 0; i < spec.burst_size; ++i) times.push_back(t);
      }
      break;
    case TraceSpec::Arrival::kScripted:
      times = spec.scripted_ms;
      std::sort(times.begin(), times.end());
      break;
  }
  std::vector<std::string> names;
  std::vector<double> weights;
  for (const auto& [name, w] : spec.mix) {
    names.push_back(name);
    weights.push_back(w);
  }
  std::mt19937_64 rng(spec.seed);
  // discrete_distribution's draw sequence is implementation-defined; an
  // explicit cumulative walk keeps traces identical across toolchains.
  double total = 0;
  for (double w : weights) total += w;
  std::vector<Arrival> out;
  for (double t : times) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
    std::size_t k = 0;
    double acc = weights[0];
    while (u >= acc && k + 1 < weights.size()) acc += weights[++k];
    out.push_back({t, names[k], rng()});
  }
  return out;
}

// ------------------------------------------------------------------ cold/warm

Report run_coldwarm(const json& config) {
  json cfg = config.is_null() ? json::object() : config;
  const auto profiles = string_list(cfg, "profiles", {"DenseNet", "Darknet"});
  const auto n = opt<std::size_t>(cfg, "invocations", 100);
  const auto seed = opt<std::uint64_t>(cfg, "seed", 1);
  const auto jitter = opt<double>(cfg, "jitter_ms", 20.0);
  const auto cold_gap = opt<double>(cfg, "cold_gap_min", 27.0) * kMinuteMs;
  const auto warm_gap = opt<double>(cfg, "warm_gap_ms", 30'000.0);
  const auto settle = opt<double>(cfg, "warmup_settle_ms", 120'000.0);
  const auto bytes = opt<std::size_t>(cfg, "payload_bytes", 100'000);
  const auto tolerance = opt<double>(cfg, "tolerance", 0.05);

  Report report("coldwarm");
  report.set_calibration(calibration(kms::kCloudAdjacentLatencyMs, jitter));
  std::map<std::string, std::string> metered;
  for (const auto& name : profiles) {
    Env env(seed, jitter);
    auto hub = env.hub(hub_config(DeviceClass::kJetsonNano, hub::PolicyKind::kRemoteOnly));
    hub->bind_app(env.app(name, "cam", "item"));
    std::vector<std::string> phase;
    double t = 0;
    auto send = [&](const std::string& ph) {
      hub->run_until(at_ms(t));
      hub->ingest({"cam", "image", synthetic_frame(bytes, seed * 1000 + phase.size()), at_ms(t)});
      phase.push_back(ph);
    };
    for (std::size_t i = 0; i < n; ++i, t += cold_gap) send("cold");
    send("warmup");
    t += settle;
    for (std::size_t i = 0; i < n; ++i, t += warm_gap) send("warm");
    hub->drain();
    for (std::size_t i = 0; i < hub->records().size(); ++i) {
      json r = slim(hub->records()[i]);
      r["profile"] = name;
      r["phase"] = phase[i];
      report.add_record(std::move(r));
    }
    metered[name] = env.emu->meter().total().to_string();
  }

  faas::ProfileCatalog cat;
  for (const auto& name : profiles) {
    const auto& p = cat.at(name);
    const json cold = report.add_stats(name + ".cold", {{"profile", name}, {"phase", "cold"}},
                                       "platform_e2e_ms");
    const json warm = report.add_stats(name + ".warm", {{"profile", name}, {"phase", "warm"}},
                                       "platform_e2e_ms");
    const json cold_hits = report.add_stats(
        name + ".cold_served", {{"profile", name}, {"phase", "cold"}, {"served_state", "Cold"}},
        "platform_e2e_ms");
    const json warm_hits = report.add_stats(
        name + ".warm_served", {{"profile", name}, {"phase", "warm"}, {"served_state", "Warm"}},
        "platform_e2e_ms");
    const json cost = report.add_usd_sum(name + ".cost", {{"profile", name}}, "cloud_cost_usd");
    const double want_cold = p.nominal_cold_e2e_ms();
    const double want_warm = p.nominal_warm_e2e_ms();
    const double c = cold.value("mean", 0.0), w = warm.value("mean", 0.0);
    report.add_check(name + ".cold_mean_within_tolerance", rel_err(c, want_cold) <= tolerance, c,
                     want_cold);
    report.add_check(name + ".warm_mean_within_tolerance", rel_err(w, want_warm) <= tolerance, w,
                     want_warm);
    report.add_check(name + ".cold_phase_all_cold", cold_hits["count"] == n, cold_hits["count"], n);
    report.add_check(name + ".warm_phase_all_warm", warm_hits["count"] == n, warm_hits["count"], n);
    report.add_check(name + ".cold_warm_ratio", w > 0, w > 0 ? c / w : 0.0, want_cold / want_warm,
                     false);
    report.add_check(name + ".cost_matches_meter", cost["sum_usd"] == metered[name],
                     cost["sum_usd"], metered[name]);
  }
  report.set_config(cfg);
  return report;
}

// ------------------------------------------------------------------ latency matrix

Report run_latency_matrix(const json& config) {
  json cfg = config.is_null() ? json::object() : config;
  const auto profiles =
      string_list(cfg, "profiles", {"MobileNet", "DenseNet", "Darknet", "SSDMobilenet"});
  const auto platforms = string_list(cfg, "platforms", {"rpi", "jetson", "lambda"});
  const auto samples = opt<std::size_t>(cfg, "samples", 30);
  const auto gap = opt<double>(cfg, "gap_ms", 60'000.0);
  const auto seed = opt<std::uint64_t>(cfg, "seed", 1);
  const auto jitter = opt<double>(cfg, "jitter_ms", 20.0);
  const auto bytes = opt<std::size_t>(cfg, "payload_bytes", 100'000);

  Report report("latency");
  report.set_calibration(calibration(kms::kCloudAdjacentLatencyMs, jitter));
  faas::ProfileCatalog cat;
  for (const auto& name : profiles) {
    for (const auto& platform : platforms) {
      const bool cloud = platform == "lambda";
      const DeviceClass device = cloud ? DeviceClass::kJetsonNano : device_of(platform);
      if (!cloud && !cat.at(name).local_exec_on(device)) {
        report.add_record({{"profile", name}, {"platform", platform}, {"supported", false}});
        continue;
      }
      Env env(seed, jitter);
      auto hub = env.hub(hub_config(
          device, cloud ? hub::PolicyKind::kRemoteOnly : hub::PolicyKind::kLocalOnly));
      hub->bind_app(env.app(name, "cam", "item", cloud));
      const std::size_t total = samples + (cloud ? 1 : 0);
      for (std::size_t i = 0; i < total; ++i) {
        hub->run_until(at_ms(i * gap));
        hub->ingest({"cam", "image", synthetic_frame(bytes, seed + i), at_ms(i * gap)});
      }
      hub->drain();
      for (std::size_t i = 0; i < hub->records().size(); ++i) {
        const auto& rec = hub->records()[i];
        json r = slim(rec);
        r["profile"] = name;
        r["platform"] = platform;
        r["supported"] = true;
        r["warmup"] = cloud && i == 0;
        r["inference_ms"] = cloud ? rec.remote_e2e_ms : rec.exec_ms;
        report.add_record(std::move(r));
      }
    }
  }

  std::map<std::pair<std::string, std::string>, double> mean;
  for (const auto& name : profiles) {
    for (const auto& platform : platforms) {
      const json s = report.add_stats(
          name + "." + platform,
          {{"profile", name}, {"platform", platform}, {"supported", true}, {"warmup", false}},
          "inference_ms");
      if (s.value("count", 0) > 0) mean[{name, platform}] = s["mean"].get<double>();
    }
  }
  auto has = [&](const std::string& p, const std::string& pl) { return mean.count({p, pl}) > 0; };
  if (has("DenseNet", "rpi")) {
    const double v = mean[{"DenseNet", "rpi"}];
    report.add_check("DenseNet.rpi_about_4300ms", rel_err(v, 4300) <= 0.05, v, 4300, false);
  }
  if (has("DenseNet", "rpi") && has("DenseNet", "lambda")) {
    const double red = 1 - mean[{"DenseNet", "lambda"}] / mean[{"DenseNet", "rpi"}];
    report.add_check("DenseNet.lambda_vs_rpi_reduction", std::abs(red - 0.80) <= 0.05, red, 0.80,
                     false);
  }
  for (const auto& name : {"Darknet", "SSDMobilenet"}) {
    if (std::find(profiles.begin(), profiles.end(), name) == profiles.end()) continue;
    if (std::find(platforms.begin(), platforms.end(), "rpi") == platforms.end()) continue;
    report.add_check(std::string(name) + ".rpi_unsupported", !has(name, "rpi"), has(name, "rpi"),
                     false);
  }
  json reductions = json::object();
  double lo = 1, hi = 0;
  for (const auto& name : profiles) {
    if (has(name, "jetson") && has(name, "lambda")) {
      const double r = 1 - mean[{name, "jetson"}] / mean[{name, "lambda"}];
      reductions[name] = r;
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
  }
  if (!reductions.empty()) {
    report.add_check("jetson_vs_lambda_reduction_range", lo >= 0.29 && hi <= 0.83, reductions,
                     json::array({0.31, 0.81}), false);
  }
  report.set_config(cfg);
  return report;
}

// ------------------------------------------------------------------ scalability

Report run_scalability(const json& config) {
  json cfg = config.is_null() ? json::object() : config;
  if (!cfg.contains("cases")) {
    cfg["cases"] = json::array({{{"profile", "DenseNet"}, {"device", "jetson"}},
                                {{"profile", "Darknet"}, {"device", "jetson"}}});
  }
  const auto max_c = opt<std::size_t>(cfg, "max_concurrency", 16);
  const auto seed = opt<std::uint64_t>(cfg, "seed", 1);
  const auto jitter = opt<double>(cfg, "jitter_ms", 20.0);
  const auto bytes = opt<std::size_t>(cfg, "payload_bytes", 100'000);
  const auto warm_after = opt<double>(cfg, "warm_round_at_ms", 120'000.0);

  Report report("scalability");
  report.set_calibration(calibration(kms::kCloudAdjacentLatencyMs, jitter));
  faas::ProfileCatalog cat;
  for (const auto& c : cfg["cases"]) {
    const std::string name = c.at("profile");
    const std::string device_name = c.at("device");
    const DeviceClass device = device_of(device_name);
    for (std::size_t k = 1; k <= max_c; ++k) {
      if (cat.at(name).local_exec_on(device)) {
        Env env(seed, jitter);
        auto hub = env.hub(hub_config(device, hub::PolicyKind::kLocalOnly));
        hub->bind_app(env.app(name, "cam", "item", false));
        for (std::size_t i = 0; i < k; ++i) {
          hub->ingest({"cam", "image", synthetic_frame(bytes, seed + i), at_ms(0)});
        }
        hub->drain();
        for (const auto& rec : hub->records()) {
          json r = slim(rec);
          r["profile"] = name;
          r["device"] = device_name;
          r["mode"] = "local";
          r["concurrency"] = k;
          report.add_record(std::move(r));
        }
      }
      Env env(seed, jitter);
      auto hub = env.hub(hub_config(device, hub::PolicyKind::kRemoteOnly));
      hub->bind_app(env.app(name, "cam", "item"));
      // First round spawns k instances; the measured round finds them warm.
      for (std::size_t i = 0; i < k; ++i) {
        hub->ingest({"cam", "image", synthetic_frame(bytes, seed + i), at_ms(0)});
      }
      hub->run_until(at_ms(warm_after));
      for (std::size_t i = 0; i < k; ++i) {
        hub->ingest({"cam", "image", synthetic_frame(bytes, seed + 100 + i), at_ms(warm_after)});
      }
      hub->drain();
      for (std::size_t i = k; i < hub->records().size(); ++i) {
        json r = slim(hub->records()[i]);
        r["profile"] = name;
        r["device"] = device_name;
        r["mode"] = "lambda";
        r["concurrency"] = k;
        report.add_record(std::move(r));
      }
    }
  }

  for (const auto& c : cfg["cases"]) {
    const std::string name = c.at("profile");
    const std::string device_name = c.at("device");
    const DeviceClass device = device_of(device_name);
    const auto spec = hub::DeviceSpec::defaults(device);
    const auto* p = cat.find(name);
    std::size_t ceiling = 0;
    if (p && p->local_exec_on(device)) {
      ceiling = std::min<std::size_t>(
          spec.slots, static_cast<std::size_t>(std::floor(spec.mem_gb / p->local_mem_gb + 1e-9)));
    }
    std::optional<std::size_t> first_failure;
    double lambda_first = 0, lambda_last = 0;
    std::size_t lambda_served_last = 0;
    for (std::size_t k = 1; k <= max_c; ++k) {
      const std::string key = name + "." + device_name + ".c" + std::to_string(k);
      const json where_local{{"profile", name}, {"device", device_name}, {"mode", "local"},
                             {"concurrency", k}};
      const json local = report.add_stats(key + ".local.e2e", where_local, "e2e_ms");
      const json fails = report.add_stats(key + ".local.admission_failed", where_local,
                                          "admission_failed");
      report.add_stats(key + ".local.exec", where_local, "exec_ms");
      if (!first_failure && fails.value("count", 0) > 0 && fails["mean"].get<double>() > 0) {
        first_failure = k;
      }
      const json lambda = report.add_stats(
          key + ".lambda.e2e",
          {{"profile", name}, {"device", device_name}, {"mode", "lambda"}, {"concurrency", k},
           {"terminal", "RemoteDone"}},
          "e2e_ms");
      if (k == 1) lambda_first = lambda.value("mean", 0.0);
      if (k == max_c) {
        lambda_last = lambda.value("mean", 0.0);
        lambda_served_last = lambda.value("count", 0);
      }
    }
    if (ceiling > 0) {
      report.add_check(name + "." + device_name + ".local_ceiling",
                       first_failure == ceiling + 1,
                       first_failure ? json(*first_failure - 1) : json(nullptr), ceiling);
    }
    report.add_check(name + "." + device_name + ".lambda_serves_all_at_max",
                     lambda_served_last == max_c, lambda_served_last, max_c);
    if (lambda_first > 0) {
      report.add_check(name + "." + device_name + ".lambda_growth_modest",
                       lambda_last / lambda_first < 1.5, lambda_last / lambda_first, "< 1.5", false);
    }
  }
  report.set_config(cfg);
  return report;
}

// ------------------------------------------------------------------ offload

Report run_offload(const json& config) {
  json cfg = config.is_null() ? json::object() : config;
  const TraceSpec trace = TraceSpec::from_json(cfg.value("trace", json::object()));
  cfg["trace"] = trace.to_json();
  const auto caps = opt<std::vector<std::size_t>>(cfg, "max_local", {1, 2, 3, 4});
  const auto device_name = opt<std::string>(cfg, "device", "jetson");
  const auto seed = opt<std::uint64_t>(cfg, "seed", 1);
  const auto jitter = opt<double>(cfg, "jitter_ms", 20.0);
  const std::vector<std::pair<std::string, hub::PolicyKind>> policies{
      {"local-only", hub::PolicyKind::kLocalOnly},
      {"remote-only", hub::PolicyKind::kRemoteOnly},
      {"hybrid", hub::PolicyKind::kLatencyMin}};

  Report report("offload");
  report.set_calibration(calibration(kms::kCloudAdjacentLatencyMs, jitter));
  const auto arrivals = generate(trace);
  const DeviceClass device = device_of(device_name);
  std::map<std::string, std::string> ledgers;
  for (std::size_t cap : caps) {
    for (const auto& [label, kind] : policies) {
      Env env(seed, jitter);
      auto hub = env.hub(hub_config(device, kind, cap));
      for (const auto& [profile, _] : trace.mix) hub->bind_app(env.app(profile, "cam-" + profile, profile));
      for (const auto& a : arrivals) {
        hub->run_until(at_ms(a.at_ms));
        hub->ingest({"cam-" + a.profile, "image", synthetic_frame(trace.payload_bytes, a.payload_seed),
                     at_ms(a.at_ms)});
      }
      hub->drain();
      for (const auto& rec : hub->records()) {
        json r = slim(rec);
        r["policy"] = label;
        r["max_local"] = cap;
        r["profile"] = rec.app_id.substr(4);
        report.add_record(std::move(r));
      }
      ledgers[label + ".cap" + std::to_string(cap)] = hub->ledger().total().to_string();
    }
  }

  std::map<std::string, double> mean, frac;
  std::map<std::string, faas::Usd> cost;
  std::map<std::size_t, double> local_exec;
  // Slowdown is tracked on the heaviest-weighted profile so mix changes don't blur it.
  std::string dominant = trace.mix.begin()->first;
  for (const auto& [name, w] : trace.mix) {
    if (w > trace.mix.at(dominant)) dominant = name;
  }
  for (std::size_t cap : caps) {
    for (const auto& [label, _] : policies) {
      const std::string key = label + ".cap" + std::to_string(cap);
      const json where{{"policy", label}, {"max_local", cap}};
      mean[key] = report.add_stats(key + ".e2e", where, "e2e_ms").value("mean", 0.0);
      frac[key] = report.add_stats(key + ".local_fraction", where, "local").value("mean", 0.0);
      json w_err = where;
      w_err["terminal"] = "Errored";
      report.add_stats(key + ".errored", w_err, "e2e_ms");
      const json c = report.add_usd_sum(key + ".cloud_cost", where, "cloud_cost_usd");
      cost[key] = faas::Usd::parse(c["sum_usd"].get<std::string>());
      report.add_check(key + ".cost_matches_ledger", c["sum_usd"] == ledgers[key], c["sum_usd"],
                       ledgers[key]);
      if (label == "local-only") {
        json w_local = where;
        w_local["terminal"] = "LocalDone";
        w_local["profile"] = dominant;
        local_exec[cap] = report.add_stats(key + ".local_exec", w_local, "exec_ms").value("mean", 0.0);
      }
    }
  }
  for (std::size_t cap : caps) {
    const std::string c = ".cap" + std::to_string(cap);
    report.add_check("hybrid_not_slower_than_local_only" + c,
                     mean["hybrid" + c] <= mean["local-only" + c], mean["hybrid" + c],
                     mean["local-only" + c]);
    report.add_check("hybrid_cheaper_than_remote_only" + c,
                     cost["hybrid" + c] < cost["remote-only" + c], cost["hybrid" + c].to_string(),
                     cost["remote-only" + c].to_string());
    report.add_check("hybrid_local_fraction_in_range" + c,
                     frac["hybrid" + c] >= 0.10 && frac["hybrid" + c] <= 0.30, frac["hybrid" + c],
                     json::array({0.10, 0.30}), false);
  }
  const std::size_t top = caps.empty() ? 0 : *std::max_element(caps.begin(), caps.end());
  const std::size_t bottom = caps.empty() ? 0 : *std::min_element(caps.begin(), caps.end());
  if (top > 0) {
    const std::string c = ".cap" + std::to_string(top);
    const double red = 1 - mean["hybrid" + c] / mean["local-only" + c];
    report.add_check("hybrid_latency_reduction" + c, red >= 0.50, red, 0.79, false);
  }
  if (top > 0 && bottom > 0 && local_exec[bottom] > 0) {
    const double ratio = local_exec[top] / local_exec[bottom];
    report.add_check("local_only_exec_slowdown", std::abs(ratio - 4.7) <= 0.5, ratio, 4.7, false);
  }
  report.set_config(cfg);
  return report;
}

// ------------------------------------------------------------------ cost tables

Report run_cost_report(const json& config) {
  json cfg = config.is_null() ? json::object() : config;
  const auto rate = opt<double>(cfg, "electricity_usd_per_kwh", 0.12);
  const auto hours = opt<double>(cfg, "hours_per_month", 720.0);
  if (!cfg.contains("devices")) {
    cfg["devices"] = json::array({{{"name", "Raspberry Pi"}, {"watts", 10}},
                                  {{"name", "Jetson Nano"}, {"watts", 10}},
                                  {{"name", "Local Desktop"}, {"watts", 100}}});
  }
  if (!cfg.contains("cloud_vms")) {
    // Small burstable VM, hourly rates.
    cfg["cloud_vms"] = json::array({{{"name", "VM reserved"}, {"usd_per_hour", 0.007}},
                                    {{"name", "VM on-demand"}, {"usd_per_hour", 0.011847}}});
  }
  if (!cfg.contains("reference_monthly_usd")) {
    cfg["reference_monthly_usd"] = {{"Raspberry Pi", 0.86}, {"Jetson Nano", 0.86},
                                    {"Local Desktop", 8.64}, {"VM reserved", 5.04},
                                    {"VM on-demand", 8.53}};
  }
  if (!cfg.contains("reference_requests_per_dollar")) {
    cfg["reference_requests_per_dollar"] = {
        {"MobileNet", {{"cold", 14245}, {"warm", 65789}}},
        {"DenseNet", {{"cold", 7133}, {"warm", 22124}}},
        {"Darknet", {{"cold", 1851}, {"warm", 2896}}},
        {"SSDMobilenet", {{"cold", 4163}, {"warm", 7133}}}};
  }
  const auto tolerance = opt<double>(cfg, "tolerance", 0.01);

  Report report("cost");
  report.set_calibration(calibration(kms::kCloudAdjacentLatencyMs, 0));
  for (const auto& d : cfg["devices"]) {
    const double w = d.at("watts").get<double>();
    const double monthly = w / 1000.0 * hours * rate;
    report.add_record({{"table", "baseline"},
                       {"name", d.at("name")},
                       {"watts", w},
                       {"monthly_usd", monthly},
                       {"monthly_usd_rounded", std::round(monthly * 100) / 100}});
  }
  for (const auto& v : cfg["cloud_vms"]) {
    const double monthly = v.at("usd_per_hour").get<double>() * hours;
    report.add_record({{"table", "baseline"},
                       {"name", v.at("name")},
                       {"usd_per_hour", v.at("usd_per_hour")},
                       {"monthly_usd", monthly},
                       {"monthly_usd_rounded", std::round(monthly * 100) / 100}});
  }
  for (const auto& rec : report.records()) {
    const std::string name = rec["name"];
    if (!cfg["reference_monthly_usd"].contains(name)) continue;
    const double want = cfg["reference_monthly_usd"][name].get<double>();
    const double got = rec["monthly_usd_rounded"].get<double>();
    report.add_check("baseline." + name, std::abs(got - want) < 0.005, got, want);
  }
  faas::ProfileCatalog cat;
  for (const auto& [name, p] : cat.all()) {
    for (const auto& [state, billed] : {std::pair{"cold", p.billed_cold}, std::pair{"warm", p.billed_warm}}) {
      const auto cost = faas::invocation_cost(billed);
      const auto rpd = faas::requests_per_dollar(billed);
      report.add_record({{"table", "requests_per_dollar"},
                         {"profile", name},
                         {"state", state},
                         {"billed_gbs", billed.to_double()},
                         {"cost_usd", cost.to_string()},
                         {"requests_per_dollar", rpd}});
      const auto& ref = cfg["reference_requests_per_dollar"];
      if (ref.contains(name) && ref[name].contains(state)) {
        const double want = ref[name][state].get<double>();
        report.add_check(name + "." + state + ".requests_per_dollar",
                         rel_err(static_cast<double>(rpd), want) <= tolerance, rpd, want);
      }
    }
    report.add_stats(name + ".requests_per_dollar", {{"table", "requests_per_dollar"}, {"profile", name}},
                     "requests_per_dollar");
  }
  report.add_stats("baseline.monthly", {{"table", "baseline"}}, "monthly_usd");
  report.set_config(cfg);
  return report;
}

// ------------------------------------------------------------------ doorbell

Report run_doorbell(const json& config) {
  json cfg = config.is_null() ? json::object() : config;
  const auto days = opt<int>(cfg, "days", 365);
  const auto per_day = opt<int>(cfg, "sessions_per_day", 50);
  const auto per_session = opt<int>(cfg, "inferences_per_session", 1);
  const auto session_min = opt<double>(cfg, "session_minutes", 10.0);
  const auto profile = opt<std::string>(cfg, "profile", "SSDMobilenet");
  const auto keep_alive = opt<bool>(cfg, "keep_alive", true);
  const auto period_min = opt<double>(cfg, "keep_alive_period_min", 15.0);
  const auto device_name = opt<std::string>(cfg, "device", "rpi");
  const auto label = opt<std::string>(cfg, "stub_label", "person");
  const auto score = opt<double>(cfg, "stub_score", 0.9);
  const auto seed = opt<std::uint64_t>(cfg, "seed", 1);
  const auto jitter = opt<double>(cfg, "jitter_ms", 20.0);
  const auto rules_file = opt<std::string>(cfg, "rules_file", "");
  cfg["interpretation"] =
      "each session is a window of session_minutes holding inferences_per_session inferences";
  if (days <= 0 || per_day < 0 || per_session <= 0 || session_min <= 0) {
    throw std::invalid_argument("doorbell parameters must be positive");
  }

  std::string rules_text = kDoorbellRules;
  if (!rules_file.empty()) {
    std::ifstream in(rules_file);
    if (!in) throw std::invalid_argument("cannot read " + rules_file);
    rules_text.assign(std::istreambuf_iterator<char>(in), {});
  }
  std::size_t rule_lines = 0;
  {
    std::istringstream lines(rules_text);
    std::string line;
    while (std::getline(lines, line)) rule_lines += line.find_first_not_of(" \t") != std::string::npos;
  }

  Report report("doorbell");
  report.set_calibration(calibration(kms::kCloudAdjacentLatencyMs, jitter));
  Env env(seed, jitter);
  rules::ItemRegistry items;
  items.declare("ssiot_object_detection");
  rules::NotificationSink sink;
  rules::RuleEngine engine(rules::parse_rules(rules_text), items, sink);
  hub::HubConfig hcfg = hub_config(device_of(device_name), hub::PolicyKind::kLatencyMin);
  hcfg.keep_alive_period_ms = keep_alive ? period_min * kMinuteMs : 0;
  auto hub = env.hub(hcfg);
  hub->bind_app(env.app(profile, "doorbell-cam", "ssiot_object_detection"));
  hub->attach_rules(engine);
  hub->observe_frame("doorbell-cam", to_bytes(json{{"label", label}, {"score", score}}.dump()));
  if (keep_alive) hub->schedule_keep_alive(at_ms(0), at_ms(days * kDayMs));

  std::mt19937_64 rng(seed);
  const double session_ms = session_min * kMinuteMs;
  for (int d = 0; d < days; ++d) {
    std::vector<double> starts;
    for (int s = 0; s < per_day; ++s) {
      starts.push_back(static_cast<double>(rng() >> 11) * 0x1.0p-53 * (kDayMs - session_ms));
    }
    std::sort(starts.begin(), starts.end());
    for (double s : starts) {
      for (int j = 0; j < per_session; ++j) {
        const double t = d * kDayMs + s + j * session_ms / per_session;
        hub->thing_changed("sensor_1", "off", "on", at_ms(t));
        hub->thing_changed("sensor_1", "on", "off", at_ms(t + 1000));
      }
    }
    hub->run_until(at_ms((d + 1) * kDayMs - 1e-3));
  }
  hub->drain();

  for (const auto& rec : hub->records()) {
    json r = slim(rec);
    r["kind"] = "inference";
    r["day"] = static_cast<int>(std::floor(to_ms(rec.enqueued_at) / kDayMs));
    report.add_record(std::move(r));
  }
  for (const auto& ka : hub->keep_alive_records()) {
    report.add_record({{"kind", "keep-alive"},
                       {"submitted_at_ms", to_ms(ka.submitted_at)},
                       {"served_state", faas::to_string(ka.served_state)},
                       {"cloud_cost_usd", ka.cost.to_string()}});
  }

  const std::size_t inferences = hub->records().size();
  const json inf = report.add_usd_sum("inference.cost", {{"kind", "inference"}}, "cloud_cost_usd");
  const json ka = report.add_usd_sum("keep_alive.cost", {{"kind", "keep-alive"}}, "cloud_cost_usd");
  report.add_stats("inference.e2e", {{"kind", "inference"}}, "e2e_ms");
  const json cold = report.add_stats("inference.cold", {{"kind", "inference"}, {"served_state", "Cold"}},
                                     "e2e_ms");
  report.add_stats("inference.local", {{"kind", "inference"}, {"terminal", "LocalDone"}}, "e2e_ms");

  const auto inf_usd = faas::Usd::parse(inf["sum_usd"].get<std::string>());
  const auto ka_usd = faas::Usd::parse(ka["sum_usd"].get<std::string>());
  const double scale = 365.0 / days;
  const double annual_inf = inf_usd.to_double() * scale;
  const double annual_ka = ka_usd.to_double() * scale;
  report.add_note("annualized_inference_usd", annual_inf);
  report.add_note("annualized_keep_alive_usd", annual_ka);
  report.add_note("annualized_total_usd", annual_inf + annual_ka);
  report.add_note("notifications", sink.size());
  report.add_note("cold_served", cold.value("count", 0));

  const bool fires = label == "person" && score > 0.80;
  const std::size_t expected_notes = fires ? inferences : 0;
  report.add_check("annual_total_below_10_usd", annual_inf + annual_ka < 10.0,
                   annual_inf + annual_ka, "< 10");
  report.add_check("notifications_iff_person_over_0.80", sink.size() == expected_notes,
                   sink.size(), expected_notes);
  report.add_check("all_sessions_served",
                   inferences == static_cast<std::size_t>(days) * per_day * per_session &&
                       hub->stats().errored == 0,
                   inferences, days * per_day * per_session);
  report.add_check("rule_file_lines_at_most_18", rule_lines <= 18, rule_lines, 18);
  report.add_check("cost_matches_meter", inf_usd + ka_usd == env.emu->meter().total(),
                   (inf_usd + ka_usd).to_string(), env.emu->meter().total().to_string());
  const double warm_cost = faas::invocation_cost(faas::ProfileCatalog{}.at(profile).billed_warm).to_double();
  const double want_inf = 365.0 * per_day * per_session * warm_cost;
  report.add_check("annual_inference_cost", rel_err(annual_inf, want_inf) <= 0.05, annual_inf,
                   want_inf, false);
  if (keep_alive) {
    report.add_check("annual_keep_alive_cost", annual_ka < 0.25, annual_ka, 0.18, false);
  }
  report.set_config(cfg);
  return report;
}

// ------------------------------------------------------------------ registry

std::vector<std::string> experiment_names() {
  return {"coldwarm", "latency", "scalability", "offload", "cost", "doorbell"};
}

Report run_experiment(const std::string& name, const json& config) {
  if (name == "coldwarm") return run_coldwarm(config);
  if (name == "latency") return run_latency_matrix(config);
  if (name == "scalability") return run_scalability(config);
  if (name == "offload") return run_offload(config);
  if (name == "cost") return run_cost_report(config);
  if (name == "doorbell") return run_doorbell(config);
  throw std::invalid_argument("unknown experiment '" + name + "'");
}

}  // namespace ssiot::bench

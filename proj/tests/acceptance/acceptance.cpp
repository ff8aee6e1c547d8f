// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion. Reference numbers are
// written out literally here and compared against what the code produces.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "ssiot/bench/experiments.hpp"
#include "ssiot/envelope/codec.hpp"
#include "ssiot/envelope/envelope.hpp"
#include "ssiot/faas/emulator.hpp"
#include "ssiot/hub/hub.hpp"
#include "ssiot/kms/service.hpp"

using namespace ssiot;
using nlohmann::json;

namespace {

constexpr double kMin = 60'000.0;
constexpr double kHour = 60 * kMin;
constexpr double kDay = 24 * kHour;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool within(double got, double want, double rel) { return std::abs(got - want) <= rel * want; }

const json& find_check(const json& report, const std::string& name) {
  for (const auto& c : report["checks"]) {
    if (c["name"] == name) return c;
  }
  throw std::out_of_range("missing check " + name);
}

// In-process platform with one KMS.
struct Platform {
  std::shared_ptr<kms::KeyManagementService> kms;
  std::shared_ptr<faas::KmsDirectory> directory = std::make_shared<faas::KmsDirectory>();
  std::unique_ptr<faas::FaasEmulator> emu;

  explicit Platform(bool trace = false, double jitter = 20) {
    kms = std::make_shared<kms::KeyManagementService>(
        kms::KmsConfig{.simulated_response_latency_ms = kms::kCloudAdjacentLatencyMs});
    directory->add("inproc://kms", kms);
    faas::EmulatorConfig cfg;
    cfg.jitter_ms = jitter;
    cfg.record_platform_trace = trace;
    emu = std::make_unique<faas::FaasEmulator>(cfg, faas::ProfileCatalog{}, directory);
  }

  hub::AppBinding app(const std::string& id, const std::string& behavior,
                      faas::AppBehavior::Kind kind = faas::AppBehavior::Kind::kProfile) {
    hub::AppBinding b;
    b.app_id = id;
    b.item_id = id;
    b.profile = kind == faas::AppBehavior::Kind::kProfile ? behavior : "";
    b.keys = envelope::generate_app_keypair(id);
    b.kms = kms->get_public_key();
    b.kms_url = "inproc://kms";
    b.source_device = "cam-" + id;
    kms->register_app(id, {b.keys.public_key, b.keys.private_key});
    b.function_id = emu->deploy({"fn-" + id, id, {kind, behavior}, {kms->kms_id(), "inproc://kms"},
                                 b.keys.private_key.decryption_only(), 3.0});
    return b;
  }
};

// 1. Requests per dollar from billed GB-seconds and the rate constants.
Outcome ac1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const std::map<std::string, std::pair<double, double>> table{{"MobileNet", {14245, 65789}},
                                                               {"DenseNet", {7133, 22124}},
                                                               {"Darknet", {1851, 2896}},
                                                               {"SSDMobilenet", {4163, 7133}}};
  faas::ProfileCatalog cat;
  int cells = 0;
  for (const auto& [name, ref] : table) {
    const auto& p = cat.at(name);
    const auto cold = static_cast<double>(faas::requests_per_dollar(p.billed_cold));
    const auto warm = static_cast<double>(faas::requests_per_dollar(p.billed_warm));
    o.require(within(cold, ref.first, 0.01), name + " cold " + std::to_string(cold));
    o.require(within(warm, ref.second, 0.01), name + " warm " + std::to_string(warm));
    cells += 2;
  }
  const auto report = bench::run_cost_report();
  o.require(report.hard_checks_pass(), "cost report hard checks");
  const double secs = seconds_since(t0);
  o.require(secs < 1.0, "runtime");
  o.detail << cells << " cells within 1%, " << secs << " s";
  return o;
}

// 2. Cold and warm end-to-end over 100 invocations each.
Outcome ac2() {
  Outcome o;
  const auto r = bench::run_coldwarm({{"invocations", 100}, {"jitter_ms", 20.0}});
  const std::map<std::string, std::pair<double, double>> ref{{"DenseNet", {9153, 851}},
                                                             {"Darknet", {35959, 7092}}};
  const std::map<std::string, double> ratio{{"DenseNet", 10.8}, {"Darknet", 5.1}};
  for (const auto& [name, cw] : ref) {
    const double cold = r.aggregate(name + ".cold")["value"]["mean"];
    const double warm = r.aggregate(name + ".warm")["value"]["mean"];
    const std::size_t nc = r.aggregate(name + ".cold_served")["value"]["count"];
    const std::size_t nw = r.aggregate(name + ".warm_served")["value"]["count"];
    o.require(within(cold, cw.first, 0.05), name + " cold mean");
    o.require(within(warm, cw.second, 0.05), name + " warm mean");
    o.require(nc == 100 && nw == 100, name + " served states");
    o.require(within(cold / warm, ratio.at(name), 0.05), name + " ratio");
    o.detail << name << " " << std::lround(cold) << "/" << std::lround(warm) << " ms ("
             << std::round(cold / warm * 10) / 10 << "x) ";
  }
  return o;
}

// 3. Keep-alive count and cost over 30 days; sparse traffic stays warm.
Outcome ac3() {
  Outcome o;
  faas::Usd worst;
  for (const auto& name : faas::ProfileCatalog{}.names()) {
    Platform p;
    hub::HubConfig cfg;
    auto hub = std::make_unique<hub::Hub>(cfg, *p.emu, faas::ProfileCatalog{}, p.directory);
    hub->bind_app(p.app("app." + name, name));
    hub->schedule_keep_alive(at_ms(0), at_ms(30 * kDay));
    hub->drain();
    o.require(hub->stats().keep_alives == 2880, name + " keep-alive count");
    const auto cost = p.emu->meter().keep_alive_total();
    o.require(cost < faas::Usd::parse("1"), name + " keep-alive cost");
    worst = std::max(worst, cost);
  }
  std::size_t cold = 0, served = 0;
  for (const auto& name : faas::ProfileCatalog{}.names()) {
    Platform p;
    hub::HubConfig cfg;
    cfg.policy.kind = hub::PolicyKind::kRemoteOnly;
    auto hub = std::make_unique<hub::Hub>(cfg, *p.emu, faas::ProfileCatalog{}, p.directory);
    hub->bind_app(p.app("app." + name, name));
    hub->schedule_keep_alive(at_ms(0), at_ms(2 * kDay));
    // Gaps of 5 min up to 3 h.
    const double gaps[] = {5 * kMin, 40 * kMin, 3 * kHour, 90 * kMin, 3 * kHour, 27 * kMin, 3 * kHour};
    double t = 2 * kMin;
    for (int round = 0; round < 3; ++round) {
      for (double g : gaps) {
        hub->run_until(at_ms(t));
        hub->ingest({"cam-app." + name, "image", Bytes(10'000, 7), at_ms(t)});
        t += g;
      }
    }
    hub->drain();
    for (const auto& r : hub->records()) {
      served += r.terminal == hub::Terminal::kRemoteDone;
      cold += r.served_state == faas::ServedState::kCold;
    }
  }
  o.require(cold == 0 && served > 0, "cold requests under keep-alive");
  o.detail << "2880 pings/30 d per profile, max cost $" << worst.to_string() << "; " << served
           << " sparse requests, " << cold << " cold";
  return o;
}

// 4. Local ceilings on the Jetson class and 16-way offload.
Outcome ac4() {
  Outcome o;
  const auto r = bench::run_scalability({{"max_concurrency", 16}});
  const json j = r.to_json();
  const json dn = find_check(j, "DenseNet.jetson.local_ceiling")["value"];
  const json dk = find_check(j, "Darknet.jetson.local_ceiling")["value"];
  o.require(dn == 4, "DenseNet ceiling");
  o.require(dk == 2, "Darknet ceiling");
  for (const auto& name : {"DenseNet", "Darknet"}) {
    const std::string key = std::string(name) + ".jetson.c16.lambda.e2e";
    o.require(r.aggregate(key)["value"]["count"] == 16, std::string(name) + " 16-way offload");
    const std::string fail5 = std::string(name) + ".jetson.c" + (std::string(name) == "DenseNet" ? "5" : "3") +
                              ".local.admission_failed";
    o.require(r.aggregate(fail5)["value"]["mean"].get<double>() > 0, "admission fails past ceiling");
  }
  o.detail << "local ceilings DenseNet " << dn << ", Darknet " << dk << "; offload 16/16 served";
  return o;
}

// 5. Hybrid versus static placements on the seeded burst trace.
Outcome ac5() {
  Outcome o;
  const auto r = bench::run_offload({{"max_local", {4}}});
  const json j = r.to_json();
  const double hybrid = r.aggregate("hybrid.cap4.e2e")["value"]["mean"];
  const double local = r.aggregate("local-only.cap4.e2e")["value"]["mean"];
  const auto hybrid_cost = faas::Usd::parse(r.aggregate("hybrid.cap4.cloud_cost")["value"]["sum_usd"].get<std::string>());
  const auto remote_cost =
      faas::Usd::parse(r.aggregate("remote-only.cap4.cloud_cost")["value"]["sum_usd"].get<std::string>());
  const double frac = r.aggregate("hybrid.cap4.local_fraction")["value"]["mean"];
  o.require(hybrid <= local, "hybrid mean <= local-only mean");
  o.require(hybrid_cost < remote_cost, "hybrid cost < all-remote cost");
  const double reduction = 1 - hybrid / local;
  o.detail << "hybrid " << std::lround(hybrid) << " ms vs local-only " << std::lround(local)
           << " ms, cost $" << hybrid_cost.to_string() << " vs $" << remote_cost.to_string()
           << "; soft: reduction " << std::round(reduction * 1000) / 10 << "% (>=50% "
           << (reduction >= 0.5 ? "met" : "missed") << ", target 79%), local fraction "
           << std::round(frac * 1000) / 1000 << " ([0.10,0.30] "
           << (frac >= 0.10 && frac <= 0.30 ? "met" : "missed") << ")";
  return o;
}

// 6. Doorbell year, rule size and the notification condition.
Outcome ac6() {
  Outcome o;
  const auto r = bench::run_doorbell();
  const json j = r.to_json();
  const double annual = j["notes"]["annualized_total_usd"];
  o.require(annual < 10.0, "annual cost < $10");
  o.require(r.hard_checks_pass(), "doorbell hard checks");

  std::ifstream in(std::string(SSIOT_CONFIG_DIR) + "/doorbell.rules");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) lines += line.find_first_not_of(" \t") != std::string::npos;
  o.require(lines > 0 && lines <= 18, "rule file lines");

  struct Case {
    std::string label;
    double score;
    bool fires;
  };
  const Case cases[] = {{"person", 0.9, true}, {"person", 0.81, true}, {"person", 0.80, false},
                        {"person", 0.5, false}, {"cat", 0.95, false}};
  for (const auto& c : cases) {
    const auto d = bench::run_doorbell({{"days", 1}, {"stub_label", c.label}, {"stub_score", c.score}});
    const std::size_t n = d.to_json()["notes"]["notifications"];
    o.require((n == 50) == c.fires && (n == 0) == !c.fires, c.label + " " + std::to_string(c.score));
  }
  o.detail << "annualized $" << std::round(annual * 100) / 100 << " (interpretation: one inference per "
           << "10-min session, 50 sessions/day), rules " << lines << " lines, 5 threshold cases";
  return o;
}

// 7. Protocol properties, 1,000 iterations.
Outcome ac7() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  auto random_bytes = [&](std::size_t n) {
    Bytes b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng());
    return b;
  };
  auto throws = [](const std::function<void()>& f) {
    try {
      f();
    } catch (const std::exception&) {
      return true;
    }
    return false;
  };

  const auto kms_keys = envelope::generate_kms_keypair("kms-a");
  const auto other_kms = envelope::generate_kms_keypair("kms-b");
  const envelope::KmsIdentity kms_id{kms_keys.kms_id, kms_keys.public_key};

  Platform p(true, 20);
  const std::size_t n = 1000;
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok && failures++ < 5) o.require(false, what);
  };

  hub::AppBinding app = p.app("camera-app", "MobileNet");
  std::size_t revoked = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto owner = envelope::generate_app_keypair("app");
    const auto stranger = envelope::generate_app_keypair("other");
    const Bytes payload = random_bytes(rng() % 4096 + 1);
    const auto key = envelope::generate_data_key();

    // Roundtrip.
    const auto sealed = envelope::seal_data(payload, owner.public_key, key);
    const auto wrapped = envelope::wrap_data_key(key, owner, kms_id);
    const auto unwrapped =
        envelope::kms_unwrap(wrapped, kms_keys.private_key, owner.public_key, owner.private_key);
    check(unwrapped == key, "unwrap roundtrip");
    check(envelope::open_data(sealed, unwrapped, owner.private_key) == payload, "open roundtrip");

    // Two-key gate: the data key alone or the app key alone is not enough.
    const auto wrong_key = envelope::generate_data_key();
    check(throws([&] { envelope::open_data(sealed, wrong_key, owner.private_key); }), "gate: data key");
    check(throws([&] { envelope::open_data(sealed, key, stranger.private_key); }), "gate: app key");
    check(throws([&] {
            envelope::kms_unwrap(wrapped, other_kms.private_key, owner.public_key, owner.private_key);
          }),
          "gate: kms key");
    check(throws([&] {
            envelope::kms_unwrap(wrapped, kms_keys.private_key, stranger.public_key, stranger.private_key);
          }),
          "gate: signer");

    // Tamper evidence: one flipped bit anywhere is rejected.
    {
      auto t = sealed;
      Bytes* fields[] = {&t.ciphertext, &t.nonce, &t.auth_tag};
      Bytes& f = *fields[rng() % 3];
      f[rng() % f.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
      check(throws([&] { envelope::open_data(t, key, owner.private_key); }), "tamper: sealed");
      auto w = wrapped;
      Bytes& g = rng() % 2 ? w.ciphertext : w.signature;
      g[rng() % g.size()] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
      check(throws([&] {
              envelope::kms_unwrap(w, kms_keys.private_key, owner.public_key, owner.private_key);
            }),
            "tamper: wrapped");
    }

    // Result key confinement: only the request's data key opens the result.
    const Bytes result = random_bytes(64);
    const auto sealed_result = envelope::seal_result(result, key);
    check(envelope::open_result(sealed_result, key) == result, "result roundtrip");
    check(throws([&] { envelope::open_result(sealed_result, wrong_key); }), "result: other key");
    check(throws([&] { envelope::open_data(sealed_result, key, owner.private_key); }), "result: data path");

    // KMS: exactly one audit record per decrypt call, granted or not.
    const std::string rid = "req-" + std::to_string(i);
    const auto app_key = envelope::generate_data_key();
    const auto app_wrapped = envelope::wrap_data_key(app_key, app.keys, app.kms);
    const bool tamper = rng() % 4 == 0;
    auto sent = app_wrapped;
    if (tamper) sent.signature[0] ^= 1;
    const std::size_t before = p.kms->audit_size();
    const auto decision = p.kms->decrypt_data_key(app.app_id, rid, sent);
    check(p.kms->audit_size() == before + 1, "one audit record");
    check(decision.granted() == !tamper, "kms decision");

    // Plaintext never on the wire: a marker inside the payload must not
    // appear in any platform message.
    const std::string marker = "PLAINTEXT-MARKER-" + std::to_string(rng());
    Bytes body = to_bytes(marker);
    const auto body_sealed = envelope::seal_data(body, app.keys.public_key, app_key);
    const auto rec = p.emu->invoke(app.function_id,
                                   {app.app_id, rid, body_sealed, app_wrapped},
                                   at_ms(static_cast<double>(i) * 1000));
    check(rec.ok() && rec.response, "invoke " + rec.error);
    if (rec.response) check(envelope::open_result(*rec.response, app_key).size() > 0, "inference result");

    // Revocation: every 100th iteration a fresh app is revoked and denied.
    if (i % 100 == 99) {
      const std::string rid2 = "rev-" + std::to_string(i);
      auto victim = envelope::generate_app_keypair("victim-" + std::to_string(i));
      p.kms->register_app(victim.app_id, {victim.public_key, victim.private_key});
      const auto k = envelope::generate_data_key();
      const auto w = envelope::wrap_data_key(k, victim, p.kms->get_public_key());
      check(p.kms->decrypt_data_key(victim.app_id, rid2 + "a", w).granted(), "pre-revoke grant");
      p.kms->revoke_app(victim.app_id);
      const std::size_t b = p.kms->audit_size();
      const auto d = p.kms->decrypt_data_key(victim.app_id, rid2 + "b", w);
      check(d.decision == kms::Decision::kDeniedRevoked && !d.key, "revocation denial");
      check(p.kms->audit_size() == b + 1, "revocation audit record");
      ++revoked;
    }
  }
  std::size_t scanned = 0;
  for (const auto& m : p.emu->platform_trace()) {
    const std::string text = ssiot::to_string(m.bytes);
    check(text.find("PLAINTEXT-MARKER-") == std::string::npos, "marker on wire");
    ++scanned;
  }
  check(scanned >= 2 * n, "trace recorded");
  const double secs = seconds_since(t0);
  o.require(failures == 0, std::to_string(failures) + " property violations");
  o.require(secs < 120, "runtime");
  o.detail << n << " iterations, " << revoked << " revocations, " << scanned
           << " platform messages scanned, " << std::round(secs * 10) / 10 << " s";
  return o;
}

// 8. Byte-identical reruns of every experiment.
Outcome ac8() {
  Outcome o;
  const std::map<std::string, json> configs{
      {"coldwarm", {{"invocations", 10}}},
      {"latency", {{"samples", 5}}},
      {"scalability", {{"max_concurrency", 6}}},
      {"offload", {{"max_local", {2, 4}}, {"trace", {{"duration_ms", 10 * kMin}}}}},
      {"cost", json::object()},
      {"doorbell", {{"days", 3}}}};
  for (const auto& [name, cfg] : configs) {
    const std::string a = bench::run_experiment(name, cfg).dump();
    const std::string b = bench::run_experiment(name, cfg).dump();
    o.require(a == b, name + " rerun differs");
    o.detail << name << " " << a.size() << " B; ";
  }
  o.detail << "identical";
  return o;
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"AC1 pricing inversion", ac1}, {"AC2 cold/warm latency", ac2},
      {"AC3 keep-alive economics", ac3}, {"AC4 scalability ceilings", ac4},
      {"AC5 hybrid policy", ac5}, {"AC6 doorbell case study", ac6},
      {"AC7 protocol properties", ac7}, {"AC8 determinism", ac8}};
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome out;
    try {
      out = fn();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail << " [exception: " << e.what() << "]";
    }
    failed += !out.pass;
    std::cout << (out.pass ? "PASS " : "FAIL ") << name << ": " << out.detail.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}

// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "ssiot/faas/http.hpp"
#include "ssiot/faas/service.hpp"
#include "ssiot/hub/hub.hpp"
#include "ssiot/kms/service.hpp"
#include "ssiot/rules/ast.hpp"

namespace ssiot::hub {
namespace {

using nlohmann::json;
constexpr double kMin = 60'000.0;
constexpr double kHour = 60 * kMin;
constexpr double kDay = 24 * kHour;

Bytes frame(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

// ------------------------------------------------------------ queue, monitor

TEST(DataQueue, FifoAndBackpressure) {
  DataQueue q(1024);
  for (int i = 0; i < 1024; ++i) q.push({"r" + std::to_string(i), "a", {}, at_ms(i), {}});
  EXPECT_THROW(q.push({"overflow", "a", {}, {}, {}}), QueueFull);
  EXPECT_EQ(q.size(), 1024u);
  for (int i = 0; i < 1024; ++i) EXPECT_EQ(q.pop()->request_id, "r" + std::to_string(i));
  EXPECT_FALSE(q.pop());
}

TEST(ResourceMonitor, JetsonCeilings) {
  const auto spec = DeviceSpec::defaults(DeviceClass::kJetsonNano);
  faas::ProfileCatalog cat;
  ResourceMonitor dense(spec.device_class, spec.slots, spec.mem_gb);
  for (int i = 0; i < 4; ++i) ASSERT_TRUE(dense.try_reserve(cat.at("DenseNet").local_mem_gb));
  EXPECT_FALSE(dense.try_reserve(cat.at("DenseNet").local_mem_gb));

  ResourceMonitor dark(spec.device_class, spec.slots, spec.mem_gb);
  for (int i = 0; i < 2; ++i) ASSERT_TRUE(dark.try_reserve(cat.at("Darknet").local_mem_gb));
  EXPECT_FALSE(dark.try_reserve(cat.at("Darknet").local_mem_gb));
  EXPECT_EQ(dark.in_use_slots(), 2u);
}

TEST(ResourceMonitor, NeverOversubscribedUnderThreads) {
  ResourceMonitor m(DeviceClass::kJetsonNano, 4, 4.0);
  std::atomic<bool> violated{false};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      std::mt19937_64 rng(t);
      std::vector<Reservation> held;
      for (int i = 0; i < 20'000; ++i) {
        if (rng() % 2 && held.size() < 3) {
          if (auto r = m.try_reserve(rng() % 2 ? 1.0 : 2.0)) held.push_back(*r);
        } else if (!held.empty()) {
          m.release(held.back());
          held.pop_back();
        }
        if (m.in_use_slots() > 4 || m.in_use_mem_gb() > 4.0 + 1e-9) violated = true;
      }
      for (auto& r : held) m.release(r);
    });
  }
  for (auto& th : threads) th.join();
  EXPECT_FALSE(violated);
  EXPECT_EQ(m.in_use_slots(), 0u);
  EXPECT_NEAR(m.in_use_mem_gb(), 0.0, 1e-9);
}

TEST(Policy, Validation) {
  EXPECT_THROW((OffloadPolicy{PolicyKind::kBudgetCap, std::nullopt, 0.5}).validate(),
               std::invalid_argument);
  EXPECT_THROW((OffloadPolicy{PolicyKind::kBudgetCap, faas::Usd{}, 0.5}).validate(),
               std::invalid_argument);
  EXPECT_THROW((OffloadPolicy{PolicyKind::kBalanced, std::nullopt, 1.5}).validate(),
               std::invalid_argument);
  EXPECT_NO_THROW((OffloadPolicy{PolicyKind::kBudgetCap, faas::Usd::parse("5"), 0.5}).validate());
  EXPECT_EQ(parse_policy_kind("budget-cap"), PolicyKind::kBudgetCap);
  EXPECT_FALSE(parse_policy_kind("cheapest"));
}

TEST(CostLedger, MonthBuckets) {
  CostLedger l;
  l.record(at_ms(1000), faas::Usd::parse("1.5"));
  l.record(at_ms(kBillingMonthMs + 5), faas::Usd::parse("2"));
  EXPECT_EQ(l.month_to_date(at_ms(kBillingMonthMs - 1)).to_string(), "1.5");
  EXPECT_EQ(l.month_to_date(at_ms(kBillingMonthMs + 10)).to_string(), "2");
  EXPECT_EQ(l.total().to_string(), "3.5");
  EXPECT_NEAR(energy_cost(10, 720 * kHour).to_double(), 0.864, 1e-9);
}

// ------------------------------------------------------------ hub fixture

class HubTest : public ::testing::Test {
 public:
  void SetUp() override {
    kms = std::make_shared<kms::KeyManagementService>(
        kms::KmsConfig{.simulated_response_latency_ms = kms::kCloudAdjacentLatencyMs});
    directory = std::make_shared<faas::KmsDirectory>();
    directory->add("inproc://kms", kms);
    faas::EmulatorConfig ecfg;
    ecfg.jitter_ms = 0;
    emu = std::make_unique<faas::FaasEmulator>(ecfg, faas::ProfileCatalog{}, directory);
  }

  // Registers app.<profile>, deploys fn-<profile> and binds it to cam-<profile>.
  AppBinding app_for(const std::string& profile, bool deploy = true,
                     faas::FaasEndpoint* where = nullptr) {
    AppBinding b;
    b.app_id = "app." + profile;
    b.item_id = "item." + profile;
    b.profile = profile;
    b.keys = envelope::generate_app_keypair(b.app_id);
    b.kms = kms->get_public_key();
    b.kms_url = "inproc://kms";
    b.source_device = "cam-" + profile;
    kms->register_app(b.app_id, {b.keys.public_key, b.keys.private_key});
    if (deploy) {
      faas::FunctionPackage pkg{"fn-" + profile, b.app_id,
                                {faas::AppBehavior::Kind::kProfile, profile},
                                {kms->kms_id(), "inproc://kms"},
                                b.keys.private_key.decryption_only(), 3.0};
      b.function_id = (where ? *where : *emu).deploy(pkg);
    }
    return b;
  }

  std::unique_ptr<Hub> make_hub(HubConfig cfg, faas::FaasEndpoint* where = nullptr) {
    return std::make_unique<Hub>(cfg, where ? *where : *emu, faas::ProfileCatalog{}, directory);
  }

  static HubConfig with_policy(PolicyKind kind) {
    HubConfig c;
    c.policy.kind = kind;
    return c;
  }

  std::shared_ptr<kms::KeyManagementService> kms;
  std::shared_ptr<faas::KmsDirectory> directory;
  std::unique_ptr<faas::FaasEmulator> emu;
};

TEST_F(HubTest, IngestKeepsFifoOrder) {
  auto hub = make_hub({});
  hub->bind_app(app_for("DenseNet"));
  std::vector<std::string> ids;
  for (int i = 0; i < 3; ++i) {
    ids.push_back(hub->ingest({"cam-DenseNet", "image", frame(100, i), at_ms(1000 + i)}).request_id);
  }
  EXPECT_EQ(hub->data_queue().size(), 3u);
  EXPECT_EQ(hub->data_queue().ids(), ids);
}

TEST_F(HubTest, RejectsOversizeAndUnknownDevice) {
  auto hub = make_hub({});
  hub->bind_app(app_for("DenseNet"));
  Bytes big(envelope::kDefaultMaxPayload + 1);
  EXPECT_THROW(hub->ingest({"cam-DenseNet", "image", big, at_ms(0)}), std::invalid_argument);
  EXPECT_THROW(hub->ingest({"doorbell-9", "image", {}, at_ms(0)}), std::invalid_argument);
  EXPECT_EQ(hub->stats().ingested, 0u);
}

TEST_F(HubTest, QueueFullIsBackpressure) {
  auto hub = make_hub({});
  hub->bind_app(app_for("DenseNet"));
  for (int i = 0; i < 1024; ++i) hub->ingest({"cam-DenseNet", "image", {1}, at_ms(kHour)});
  EXPECT_THROW(hub->ingest({"cam-DenseNet", "image", {1}, at_ms(kHour)}), QueueFull);
  EXPECT_EQ(hub->stats().ingested, 1024u);
}

TEST_F(HubTest, AllocatorExamples) {
  auto hub = make_hub({});
  hub->bind_app(app_for("DenseNet"));
  ResourceMonitor m(DeviceClass::kJetsonNano, 4, 4.0);
  CostLedger ledger;
  const OffloadPolicy latency{PolicyKind::kLatencyMin, std::nullopt, 0.5};

  // Jetson DenseNet: 587 ms locally beats the ~851 ms remote round trip.
  auto in = hub->estimate("app.DenseNet", 100'000);
  ASSERT_TRUE(in.local_expected_ms && in.remote_expected_ms);
  EXPECT_LT(*in.local_expected_ms, *in.remote_expected_ms);
  auto d = allocate(in, m, latency, ledger, at_ms(0));
  EXPECT_EQ(d.target, TargetKind::kLocal);
  ASSERT_TRUE(d.slot);
  EXPECT_EQ(m.in_use_slots(), 1u);

  // All slots busy: forwarded to the cloud function.
  while (m.try_reserve(0.5)) {}
  d = allocate(in, m, latency, ledger, at_ms(0));
  EXPECT_EQ(d.target, TargetKind::kRemote);
  EXPECT_EQ(d.function_id, "fn-DenseNet");

  // Budget spent and no slot: wait rather than drop.
  const OffloadPolicy budget{PolicyKind::kBudgetCap, faas::Usd::parse("0.01"), 0.5};
  ledger.record(at_ms(0), faas::Usd::parse("0.01"));
  d = allocate(in, m, budget, ledger, at_ms(1));
  EXPECT_EQ(d.target, TargetKind::kQueued);
  EXPECT_EQ(d.policy_kind, PolicyKind::kBudgetCap);

  // Budget left: remote allowed again.
  const OffloadPolicy roomy{PolicyKind::kBudgetCap, faas::Usd::parse("1"), 0.5};
  EXPECT_EQ(allocate(in, m, roomy, ledger, at_ms(1)).target, TargetKind::kRemote);
}

TEST_F(HubTest, BalancedWeightsMoveTheChoice) {
  auto hub = make_hub({});
  hub->bind_app(app_for("DenseNet"));
  auto in = hub->estimate("app.DenseNet");
  CostLedger ledger;
  ResourceMonitor a(DeviceClass::kJetsonNano, 4, 4.0), b(DeviceClass::kJetsonNano, 4, 4.0);
  // Local is both faster and cheaper here, so any weight picks it.
  EXPECT_EQ(allocate(in, a, {PolicyKind::kBalanced, std::nullopt, 0.0}, ledger, {}).target,
            TargetKind::kLocal);
  EXPECT_EQ(allocate(in, b, {PolicyKind::kBalanced, std::nullopt, 1.0}, ledger, {}).target,
            TargetKind::kLocal);
  // Make local slow but keep it cheap: pure latency goes remote, pure cost stays.
  in.local_expected_ms = 10 * *in.remote_expected_ms;
  ResourceMonitor c(DeviceClass::kJetsonNano, 4, 4.0), d(DeviceClass::kJetsonNano, 4, 4.0);
  EXPECT_EQ(allocate(in, c, {PolicyKind::kBalanced, std::nullopt, 1.0}, ledger, {}).target,
            TargetKind::kRemote);
  EXPECT_EQ(allocate(in, d, {PolicyKind::kBalanced, std::nullopt, 0.0}, ledger, {}).target,
            TargetKind::kLocal);
}

TEST_F(HubTest, RpiCannotRunDetection) {
  HubConfig cfg;
  cfg.device = DeviceSpec::defaults(DeviceClass::kRPi);
  auto hub = make_hub(cfg);
  hub->bind_app(app_for("Darknet"));
  auto in = hub->estimate("app.Darknet");
  EXPECT_FALSE(in.local_expected_ms);
  EXPECT_FALSE(in.local_possible);
  hub->ingest({"cam-Darknet", "image", frame(1000, 1), at_ms(0)});
  hub->drain();
  EXPECT_EQ(hub->records()[0].terminal, Terminal::kRemoteDone);
}

TEST_F(HubTest, LocalOnlyWithoutLocalSupportIsRejected) {
  HubConfig cfg = with_policy(PolicyKind::kLocalOnly);
  cfg.device = DeviceSpec::defaults(DeviceClass::kRPi);
  auto hub = make_hub(cfg);
  hub->bind_app(app_for("Darknet"));
  hub->ingest({"cam-Darknet", "image", frame(10, 1), at_ms(0)});
  hub->drain();
  EXPECT_EQ(hub->records()[0].terminal, Terminal::kErrored);
}

// ------------------------------------------------------------ local path

TEST_F(HubTest, SingleLocalDenseNetRunsAtBaseline) {
  auto hub = make_hub(with_policy(PolicyKind::kLocalOnly));
  hub->bind_app(app_for("DenseNet"));
  hub->ingest({"cam-DenseNet", "image", frame(50'000, 1), at_ms(0)});
  hub->drain();
  const auto& r = hub->records()[0];
  ASSERT_EQ(r.terminal, Terminal::kLocalDone) << r.error;
  EXPECT_NEAR(r.exec_ms, 587, 1e-6);
  EXPECT_NEAR(r.kms_ms, 206, 1e-9);
  EXPECT_NEAR(r.e2e_ms, r.encryption_ms + r.kms_ms + r.exec_ms, 1e-6);
  ASSERT_TRUE(r.result);
  EXPECT_EQ(json::parse(*r.result)["model"], "DenseNet");
  // The KMS saw exactly one decrypt for it.
  EXPECT_EQ(kms->query_audit({.app_id = "app.DenseNet"}).size(), 1u);
}

TEST_F(HubTest, LocalAdmissionCeilings) {
  for (auto [profile, ceiling] : {std::pair{"DenseNet", 4u}, std::pair{"Darknet", 2u}}) {
    SetUp();
    auto hub = make_hub(with_policy(PolicyKind::kLocalOnly));
    hub->bind_app(app_for(profile));
    for (int i = 0; i < 6; ++i) hub->ingest({std::string("cam-") + profile, "image", {1}, at_ms(0)});
    hub->drain();
    EXPECT_EQ(hub->peak_local_concurrency(), ceiling) << profile;
    EXPECT_EQ(hub->stats().local_admission_failures, 6 - ceiling) << profile;
    EXPECT_EQ(hub->stats().local_done, 6u) << profile;
  }
}

TEST_F(HubTest, ContentionStretchesFourWayRunsByFourPointSeven) {
  auto hub = make_hub(with_policy(PolicyKind::kLocalOnly));
  hub->bind_app(app_for("DenseNet"));
  for (int i = 0; i < 4; ++i) hub->ingest({"cam-DenseNet", "image", {1}, at_ms(0)});
  hub->drain();
  // Encryptions overlap too, so starts are staggered; the stretch is close to
  // but not exactly 1 + 3c for every job.
  double mean = 0;
  for (const auto& r : hub->records()) mean += r.exec_ms / 4;
  EXPECT_NEAR(mean / 587.0, 4.7, 0.25);
}

TEST_F(HubTest, LocalLatencyMonotoneInConcurrency) {
  double previous = 0;
  for (int k = 1; k <= 4; ++k) {
    SetUp();
    auto hub = make_hub(with_policy(PolicyKind::kLocalOnly));
    hub->bind_app(app_for("DenseNet"));
    for (int i = 0; i < k; ++i) hub->ingest({"cam-DenseNet", "image", frame(10'000, i), at_ms(0)});
    hub->drain();
    double mean = 0;
    for (const auto& r : hub->records()) mean += r.e2e_ms / k;
    EXPECT_GE(mean, previous) << "k=" << k;
    previous = mean;
  }
}

// ------------------------------------------------------------ remote path

TEST_F(HubTest, NativeChecksumRemoteEndToEnd) {
  emu->register_native_function("fnv", [](faas::Sandbox& sb) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (auto b : sb.input()) h = (h ^ b) * 0x100000001b3ull;
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return to_bytes(buf);
  });
  AppBinding b = app_for("DenseNet", false);
  b.app_id = "app.fnv";
  b.item_id = "item.fnv";
  b.profile.clear();
  b.keys = envelope::generate_app_keypair(b.app_id);
  kms->register_app(b.app_id, {b.keys.public_key, b.keys.private_key});
  b.function_id = emu->deploy({"fn-fnv", b.app_id, {faas::AppBehavior::Kind::kNative, "fnv"},
                               {kms->kms_id(), "inproc://kms"},
                               b.keys.private_key.decryption_only(), 1.0});
  b.source_device = "sensor";
  auto hub = make_hub({});
  hub->bind_app(b);
  Bytes payload = frame(4096, 9);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto x : payload) h = (h ^ x) * 0x100000001b3ull;
  char want[17];
  std::snprintf(want, sizeof want, "%016llx", static_cast<unsigned long long>(h));

  hub->ingest({"sensor", "blob", payload, at_ms(0)});
  hub->drain();
  const auto& r = hub->records()[0];
  ASSERT_EQ(r.terminal, Terminal::kRemoteDone) << r.error;
  EXPECT_EQ(*r.result, want);
}

TEST_F(HubTest, RemoteLatencyDecomposes) {
  auto hub = make_hub(with_policy(PolicyKind::kRemoteOnly));
  hub->bind_app(app_for("DenseNet"));
  hub->ingest({"cam-DenseNet", "image", frame(200'000, 1), at_ms(0)});
  hub->ingest({"cam-DenseNet", "image", frame(200'000, 2), at_ms(20 * 1000)});
  hub->drain();
  for (const auto& r : hub->records()) {
    ASSERT_EQ(r.terminal, Terminal::kRemoteDone) << r.error;
    EXPECT_NEAR(r.e2e_ms, r.queue_wait_ms + r.encryption_ms + r.transfer_ms + r.remote_e2e_ms, 1e-6);
    EXPECT_GT(r.transfer_ms, 0);
  }
  EXPECT_EQ(hub->records()[0].served_state, faas::ServedState::kCold);
  EXPECT_EQ(hub->records()[1].served_state, faas::ServedState::kWarm);
  EXPECT_NEAR(hub->records()[1].remote_e2e_ms, 851, 1e-6);
  EXPECT_NEAR(hub->records()[0].remote_e2e_ms, 9153, 1e-6);
}

TEST_F(HubTest, RevokedAppNeverGetsPlaintext) {
  for (auto kind : {PolicyKind::kRemoteOnly, PolicyKind::kLocalOnly}) {
    SetUp();
    auto hub = make_hub(with_policy(kind));
    hub->bind_app(app_for("DenseNet"));
    kms->revoke_app("app.DenseNet");
    hub->ingest({"cam-DenseNet", "image", to_bytes(R"({"label":"person","score":0.99})"), at_ms(0)});
    hub->drain();
    const auto& r = hub->records()[0];
    EXPECT_EQ(r.terminal, Terminal::kErrored);
    EXPECT_NE(r.error.find("kms-denied"), std::string::npos) << r.error;
    EXPECT_FALSE(r.result);
    EXPECT_EQ(hub->monitor().in_use_slots(), 0u);
    EXPECT_EQ(hub->handle_results(), 0u);
  }
}

TEST_F(HubTest, TimedOutResultsAreDroppedAndCounted) {
  HubConfig cfg = with_policy(PolicyKind::kRemoteOnly);
  cfg.timeout_factor = 0.05;  // about 457 ms for DenseNet, shorter than a cold start
  auto hub = make_hub(cfg);
  hub->bind_app(app_for("DenseNet"));
  hub->ingest({"cam-DenseNet", "image", {1, 2, 3}, at_ms(0)});
  hub->drain();
  const auto& r = hub->records()[0];
  EXPECT_EQ(r.terminal, Terminal::kErrored);
  EXPECT_EQ(r.error, "timeout");
  EXPECT_TRUE(r.late_result_dropped);
  EXPECT_EQ(hub->stats().late_dropped, 1u);
  EXPECT_EQ(hub->handle_results(), 0u);
}

TEST_F(HubTest, ResultsDispatchedOncePerCompletion) {
  auto hub = make_hub({});
  hub->bind_app(app_for("DenseNet"));
  for (int i = 0; i < 12; ++i) hub->ingest({"cam-DenseNet", "image", frame(100, i), at_ms(i * 10)});
  hub->drain();
  const auto done = hub->stats().local_done + hub->stats().remote_done;
  EXPECT_EQ(done, 12u);
  EXPECT_EQ(hub->handle_results(), done);
  EXPECT_EQ(hub->handle_results(), 0u);
}

TEST_F(HubTest, ConservationUnderRandomTraffic) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SetUp();
    HubConfig cfg = with_policy(static_cast<PolicyKind>(seed % 5));
    if (cfg.policy.kind == PolicyKind::kBudgetCap) cfg.policy.monthly_budget = faas::Usd::parse("0.002");
    cfg.max_local = 1 + seed % 4;
    auto hub = make_hub(cfg);
    for (auto p : {"DenseNet", "Darknet", "MobileNet"}) hub->bind_app(app_for(p));
    std::mt19937_64 rng(seed);
    const char* devices[] = {"cam-DenseNet", "cam-Darknet", "cam-MobileNet"};
    double t = 0;
    for (int i = 0; i < 150; ++i) {
      t += static_cast<double>(rng() % 3000);
      hub->run_until(at_ms(t));
      hub->ingest({devices[rng() % 3], "image", frame(rng() % 5000, rng()), at_ms(t)});
    }
    hub->drain();
    std::size_t local = 0, remote = 0, err = 0;
    for (const auto& r : hub->records()) {
      ASSERT_NE(r.terminal, Terminal::kPending) << r.request_id;
      local += r.terminal == Terminal::kLocalDone;
      remote += r.terminal == Terminal::kRemoteDone;
      err += r.terminal == Terminal::kErrored;
    }
    EXPECT_EQ(local + remote + err, 150u);
    EXPECT_EQ(local, hub->stats().local_done);
    EXPECT_EQ(remote, hub->stats().remote_done);
    EXPECT_EQ(hub->handle_results(), local + remote);
    EXPECT_EQ(hub->monitor().in_use_slots(), 0u);
  }
}

TEST_F(HubTest, SameSeedSameRecords) {
  auto run = [&] {
    SetUp();
    auto hub = make_hub({});
    hub->bind_app(app_for("DenseNet"));
    for (int i = 0; i < 40; ++i) hub->ingest({"cam-DenseNet", "image", frame(1000, i), at_ms(i * 250)});
    hub->drain();
    json out = json::array();
    for (auto r : hub->records()) {
      r.request_id.clear();
      r.invocation_id.clear();
      out.push_back(r);
    }
    return out.dump();
  };
  EXPECT_EQ(run(), run());
}

// ------------------------------------------------------------ keep-alive

TEST_F(HubTest, KeepAliveThirtyDaysIsCheap) {
  for (const auto& name : faas::ProfileCatalog{}.names()) {
    SetUp();
    auto hub = make_hub({});
    hub->bind_app(app_for(name));
    hub->schedule_keep_alive(at_ms(0), at_ms(30 * kDay));
    hub->drain();
    EXPECT_EQ(hub->stats().keep_alives, 2880u) << name;
    EXPECT_LT(emu->meter().keep_alive_total(), faas::Usd::parse("1")) << name;
    EXPECT_EQ(hub->ledger().total(), emu->meter().keep_alive_total());
  }
}

TEST_F(HubTest, KeepAliveKeepsSparseTrafficWarm) {
  auto hub = make_hub(with_policy(PolicyKind::kRemoteOnly));
  hub->bind_app(app_for("SSDMobilenet"));
  hub->schedule_keep_alive(at_ms(0), at_ms(kDay));
  for (double t = 7 * kMin; t < kDay; t += 3 * kHour) {
    hub->run_until(at_ms(t));
    hub->ingest({"cam-SSDMobilenet", "image", frame(20'000, static_cast<std::uint64_t>(t)), at_ms(t)});
  }
  hub->drain();
  ASSERT_EQ(hub->records().size(), 8u);
  for (const auto& r : hub->records()) {
    ASSERT_EQ(r.terminal, Terminal::kRemoteDone) << r.error;
    EXPECT_EQ(r.served_state, faas::ServedState::kWarm) << r.request_id;
  }
}

TEST_F(HubTest, WithoutKeepAliveThirtyMinuteGapGoesCold) {
  auto hub = make_hub(with_policy(PolicyKind::kRemoteOnly));
  hub->bind_app(app_for("DenseNet"));
  hub->ingest({"cam-DenseNet", "image", {1}, at_ms(0)});
  hub->run_until(at_ms(20 * kMin));
  hub->ingest({"cam-DenseNet", "image", {2}, at_ms(20 * kMin)});
  hub->run_until(at_ms(50 * kMin + 1000));
  hub->ingest({"cam-DenseNet", "image", {3}, at_ms(50 * kMin + 1000)});
  hub->drain();
  EXPECT_EQ(hub->records()[0].served_state, faas::ServedState::kCold);
  EXPECT_EQ(hub->records()[1].served_state, faas::ServedState::kWarm);
  EXPECT_EQ(hub->records()[2].served_state, faas::ServedState::kCold);
}

// ------------------------------------------------------------ offloading

struct BurstOutcome {
  double mean_ms = 0;
  double local_fraction = 0;
  faas::Usd cloud;
};

BurstOutcome run_bursts(HubTest& t, PolicyKind kind, std::size_t max_local) {
  t.SetUp();
  HubConfig cfg;
  cfg.policy.kind = kind;
  cfg.max_local = max_local;
  auto hub = std::make_unique<Hub>(cfg, *t.emu, faas::ProfileCatalog{}, t.directory);
  hub->bind_app(t.app_for("DenseNet"));
  for (int b = 0; b < 30; ++b) {
    const double at = b * 60'000.0;
    hub->run_until(at_ms(at));
    for (int i = 0; i < 8; ++i) {
      hub->ingest({"cam-DenseNet", "image", frame(30'000, b * 8 + i), at_ms(at)});
    }
  }
  hub->drain();
  BurstOutcome out;
  for (const auto& r : hub->records()) {
    EXPECT_NE(r.terminal, Terminal::kErrored) << r.error;
    out.mean_ms += r.e2e_ms / static_cast<double>(hub->records().size());
    out.local_fraction += (r.terminal == Terminal::kLocalDone) / static_cast<double>(hub->records().size());
  }
  out.cloud = hub->ledger().total();
  return out;
}

TEST_F(HubTest, HybridDominatesStaticAssignments) {
  for (std::size_t cap = 1; cap <= 4; ++cap) {
    auto local = run_bursts(*this, PolicyKind::kLocalOnly, cap);
    auto remote = run_bursts(*this, PolicyKind::kRemoteOnly, cap);
    auto hybrid = run_bursts(*this, PolicyKind::kLatencyMin, cap);
    EXPECT_LE(hybrid.mean_ms, local.mean_ms) << "cap " << cap;
    EXPECT_LT(hybrid.cloud, remote.cloud) << "cap " << cap;
    EXPECT_GE(hybrid.local_fraction, 0.10) << "cap " << cap;
    EXPECT_LE(hybrid.local_fraction, 0.30) << "cap " << cap;
  }
}

// ------------------------------------------------------------ egress + rules

TEST_F(HubTest, NothingLeavesTheHubInPlaintext) {
  auto shared = std::shared_ptr<faas::FaasEmulator>(std::move(emu));
  faas::FaasService svc(shared);
  faas::FaasHttpServer server(svc);
  server.start();
  faas::FaasHttpClient client(server.url());
  client.record_egress(true);

  auto hub = make_hub(with_policy(PolicyKind::kRemoteOnly), &client);
  hub->bind_app(app_for("DenseNet", true, &client));
  const std::string marker = "front-door-camera-secret-frame";
  for (int i = 0; i < 5; ++i) {
    hub->ingest({"cam-DenseNet", "image",
                 to_bytes(R"({"label":"person","score":0.91,"note":")" + marker + "\"}"),
                 at_ms(i * 1000)});
  }
  hub->drain();
  EXPECT_EQ(hub->stats().remote_done, 5u);
  const auto bodies = client.sent_bodies();
  EXPECT_GE(bodies.size(), 6u);  // deploy + invocations
  for (const auto& body : bodies) {
    EXPECT_EQ(body.find(marker), std::string::npos);
    EXPECT_EQ(body.find("\"person\""), std::string::npos);
  }
  server.stop();
}

TEST_F(HubTest, DoorbellPipelineNotifiesOnPerson) {
  for (auto [score, want] : {std::pair{0.9, 1u}, std::pair{0.5, 0u}, std::pair{0.80, 0u}}) {
    SetUp();
    std::ifstream in(std::string(SSIOT_CONFIG_DIR) + "/doorbell.rules");
    std::string text((std::istreambuf_iterator<char>(in)), {});
    rules::ItemRegistry items;
    items.declare("ssiot_object_detection");
    rules::NotificationSink sink;
    rules::RuleEngine engine(rules::parse_rules(text), items, sink);

    auto hub = make_hub(with_policy(PolicyKind::kRemoteOnly));
    AppBinding b = app_for("SSDMobilenet");
    b.item_id = "ssiot_object_detection";
    b.source_device = "doorbell-cam";
    hub->bind_app(b);
    hub->attach_rules(engine);

    json stub{{"label", "person"}, {"score", score}};
    hub->observe_frame("doorbell-cam", to_bytes(stub.dump()));
    hub->thing_changed("sensor_1", "off", "on", at_ms(1000));
    hub->drain();
    EXPECT_EQ(hub->stats().remote_done, 1u);
    EXPECT_EQ(sink.size(), want) << score;
    EXPECT_EQ(engine.dispatch_errors(), 0u);
  }
}

TEST_F(HubTest, EventLogIsJsonLines) {
  const auto path = std::filesystem::temp_directory_path() / "ssiot_hub_events.jsonl";
  HubConfig cfg;
  cfg.event_log_path = path.string();
  {
    auto hub = make_hub(cfg);
    hub->bind_app(app_for("DenseNet"));
    hub->ingest({"cam-DenseNet", "image", {1}, at_ms(0)});
    hub->drain();
  }
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> kinds;
  while (std::getline(in, line)) kinds.push_back(json::parse(line).at("event"));
  EXPECT_EQ(kinds, (std::vector<std::string>{"decision", "complete"}));
  std::filesystem::remove(path);
}

TEST(HubConfigJson, ParsesKeys) {
  auto c = HubConfig::from_json(json::parse(R"({"device_class":"rpi","policy":"budget-cap",
    "monthly_budget_usd":"2.5","keep_alive_period_min":10,"queue_capacity":16,"max_local":2})"));
  EXPECT_EQ(c.device.device_class, DeviceClass::kRPi);
  EXPECT_EQ(c.device.mem_gb, 1.0);
  EXPECT_EQ(c.policy.kind, PolicyKind::kBudgetCap);
  EXPECT_EQ(c.policy.monthly_budget->to_string(), "2.5");
  EXPECT_EQ(c.keep_alive_period_ms, 10 * kMin);
  EXPECT_EQ(c.queue_capacity, 16u);
  EXPECT_EQ(c.max_local, 2u);
  EXPECT_THROW(HubConfig::from_json(json::parse(R"({"policy":"budget-cap"})")), std::invalid_argument);
  EXPECT_THROW(HubConfig::from_json(json::parse(R"({"policy":"fastest"})")), std::invalid_argument);
}

}  // namespace
}  // namespace ssiot::hub

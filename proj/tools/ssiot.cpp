// SPDX-License-Identifier: Apache-2.0
// ssiot: command-line front for the KMS, the FaaS emulator, app tooling,
// the hub and the benchmarks.
#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>

#include "ssiot/bench/experiments.hpp"
#include "ssiot/faas/http.hpp"
#include "ssiot/faas/service.hpp"
#include "ssiot/hub/hub.hpp"
#include "ssiot/kms/http.hpp"
#include "ssiot/kms/service.hpp"
#include "ssiot/kms/store.hpp"
#include "ssiot/rules/ast.hpp"
#include "ssiot/toolchain/toolchain.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ssiot;

namespace {

json read_json(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return json::parse(in);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

// Blocks until SIGINT or SIGTERM.
void wait_for_signal() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  int sig = 0;
  sigwait(&set, &sig);
}

void block_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

std::string hub_secret(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("SSIOT_HUB_SECRET")) return env;
  throw std::runtime_error("hub key store secret missing: pass --secret or set SSIOT_HUB_SECRET");
}

std::string keystore_path(const std::string& state_dir) { return (fs::path(state_dir) / "keys.json").string(); }

// --- kms -----------------------------------------------------------------

struct KmsOpts {
  std::string config, store, cert_out, url, ca, app, decision, from, to;
  int port = -1;
};

int kms_serve(const KmsOpts& o) {
  auto cfg = kms::KmsConfig::from_json(read_json(o.config));
  if (o.port >= 0) cfg.port = o.port;
  if (!o.store.empty()) cfg.store_path = o.store;
  std::unique_ptr<kms::KmsStore> store;
  if (!cfg.store_path.empty()) store = std::make_unique<kms::FileStore>(cfg.store_path);
  kms::KeyManagementService service(cfg, std::move(store));
  kms::KmsHttpServer server(service, cfg);
  if (!o.cert_out.empty()) write_text(o.cert_out, server.certificate_pem());
  block_signals();
  server.start();
  std::cout << json{{"url", server.url()}, {"kms_id", service.kms_id()}}.dump() << std::endl;
  wait_for_signal();
  server.stop();
  return 0;
}

int kms_revoke(const KmsOpts& o) {
  kms::KmsHttpClient client(o.url, {.ca_file = o.ca});
  client.revoke_app(o.app);
  std::cout << "revoked " << o.app << "\n";
  return 0;
}

int kms_audit(const KmsOpts& o) {
  kms::KmsHttpClient client(o.url, {.ca_file = o.ca});
  kms::AuditFilter f;
  if (!o.app.empty()) f.app_id = o.app;
  if (!o.decision.empty()) {
    f.decision = kms::parse_decision(o.decision);
    if (!f.decision) throw std::runtime_error("unknown decision " + o.decision);
  }
  if (!o.from.empty()) f.from_ms = std::stoll(o.from);
  if (!o.to.empty()) f.to_ms = std::stoll(o.to);
  for (const auto& r : client.query_audit(f)) std::cout << json(r).dump() << "\n";
  return 0;
}

// --- faas ----------------------------------------------------------------

struct FaasOpts {
  std::string config, host = "127.0.0.1", ca;
  int port = 8080;
  bool real_time = false;
};

int faas_serve(const FaasOpts& o) {
  const auto cfg = faas::EmulatorConfig::from_json(read_json(o.config));
  auto directory = std::make_shared<faas::KmsDirectory>(o.ca);
  auto emulator = std::make_shared<faas::FaasEmulator>(cfg, faas::ProfileCatalog{}, directory);
  faas::FaasService service(emulator, {.real_time = o.real_time});
  faas::FaasHttpServer server(service, o.host, o.port);
  block_signals();
  server.start();
  std::cout << json{{"url", server.url()}}.dump() << std::endl;
  wait_for_signal();
  server.stop();
  return 0;
}

// --- app -----------------------------------------------------------------

struct AppOpts {
  std::string app, kms, ca, faas, state_dir = ".ssiot", secret, profile, function_id;
  double memory = faas::kMaxMemoryGb;
};

int app_provision(const AppOpts& o) {
  fs::create_directories(o.state_dir);
  toolchain::HubKeyStore store(keystore_path(o.state_dir), hub_secret(o.secret));
  kms::KmsHttpClient client(o.kms, {.ca_file = o.ca});
  const auto p = toolchain::provision_app(o.app, client, store);
  std::cout << json{{"app_id", o.app}, {"kms_id", p.kms.kms_id}, {"receipt", p.receipt}}.dump()
            << "\n";
  return 0;
}

int app_deploy(const AppOpts& o) {
  toolchain::HubKeyStore store(keystore_path(o.state_dir), hub_secret(o.secret));
  const auto keys = store.get(o.app);
  if (!keys) throw std::runtime_error("app " + o.app + " is not provisioned in " + o.state_dir);
  kms::KmsHttpClient kms_client(o.kms, {.ca_file = o.ca});
  const faas::KmsReference ref{kms_client.get_public_key().kms_id, o.kms};
  const auto pkg = toolchain::package_app(o.app, o.profile, ref, keys->private_key, o.memory,
                                          toolchain::BehaviorCatalog{}, o.function_id);
  faas::FaasHttpClient faas_client(o.faas);
  const auto receipt = toolchain::deploy_app(pkg, faas_client, o.state_dir);
  std::cout << json(receipt).dump() << "\n";
  return 0;
}

// --- hub -----------------------------------------------------------------

struct HubOpts {
  std::string config, rules, policy, budget, device, state_dir = ".ssiot", secret, faas, ca,
      events, notifications, records;
  std::optional<double> start_ms;
};

// Event script lines (JSON, ordered by at_ms):
//   {"at_ms": t, "device": "cam", "payload": "text"}   or "size": n for random bytes
//   {"at_ms": t, "thing": "sensor_1", "from": "off", "to": "on"}
//   {"at_ms": t, "frame_device": "cam", "payload": "text"}
int hub_run(const HubOpts& o) {
  json cfg_json = read_json(o.config);
  if (!o.policy.empty()) cfg_json["policy"] = o.policy;
  if (!o.budget.empty()) cfg_json["monthly_budget_usd"] = o.budget;
  if (!o.device.empty()) cfg_json["device"] = o.device;
  const auto cfg = hub::HubConfig::from_json(cfg_json);
  if (!cfg_json.contains("apps") || cfg_json["apps"].empty()) {
    throw std::runtime_error("hub config lists no apps");
  }

  toolchain::HubKeyStore store(keystore_path(o.state_dir), hub_secret(o.secret));
  auto directory = std::make_shared<faas::KmsDirectory>(o.ca);
  faas::FaasHttpClient faas_client(o.faas);
  hub::Hub hub(cfg, faas_client, faas::ProfileCatalog{}, directory);

  rules::ItemRegistry items;
  for (const auto& a : cfg_json["apps"]) {
    hub::AppBinding b;
    b.app_id = a.at("app_id");
    b.item_id = a.value("item_id", b.app_id);
    b.profile = a.at("profile");
    b.source_device = a.at("source_device");
    b.kms_url = a.at("kms_url");
    const auto keys = store.get(b.app_id);
    if (!keys) throw std::runtime_error("app " + b.app_id + " is not provisioned");
    b.keys = *keys;
    b.kms = directory->resolve(b.kms_url).get_public_key();
    if (const auto receipt = toolchain::load_receipt(o.state_dir, b.app_id)) {
      b.function_id = receipt->function_id;
    }
    items.declare(b.item_id);
    hub.bind_app(std::move(b));
  }
  rules::NotificationSink sink(o.notifications);
  std::unique_ptr<rules::RuleEngine> engine;
  if (!o.rules.empty()) {
    engine = std::make_unique<rules::RuleEngine>(rules::parse_rules(read_text(o.rules)), items, sink);
    hub.attach_rules(*engine);
  }

  std::istream* in = &std::cin;
  std::ifstream file;
  if (!o.events.empty() && o.events != "-") {
    file.open(o.events);
    if (!file) throw std::runtime_error("cannot read " + o.events);
    in = &file;
  }
  // Script times are offsets from `base`. The emulator never goes back in
  // virtual time, so by default a run starts where the emulator is now.
  const double base = o.start_ms ? *o.start_ms : to_ms(faas_client.now());
  std::mt19937_64 rng(1);
  std::string line;
  double horizon = base;
  while (std::getline(*in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const json e = json::parse(line);
    const double at = base + e.at("at_ms").get<double>();
    horizon = std::max(horizon, at);
    hub.run_until(at_ms(at));
    if (e.contains("thing")) {
      hub.thing_changed(e["thing"], e.value("from", ""), e.value("to", ""), at_ms(at));
    } else if (e.contains("frame_device")) {
      hub.observe_frame(e["frame_device"], to_bytes(e.value("payload", std::string{})));
    } else {
      Bytes payload;
      if (e.contains("size")) {
        payload.resize(e["size"].get<std::size_t>());
        for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
      } else {
        payload = to_bytes(e.value("payload", std::string{}));
      }
      hub.ingest({e.at("device"), e.value("kind", "data"), std::move(payload), at_ms(at)});
    }
  }
  if (cfg.keep_alive_period_ms > 0) hub.schedule_keep_alive(at_ms(base), at_ms(horizon));
  hub.drain();

  if (!o.records.empty()) {
    std::ofstream out(o.records);
    for (const auto& r : hub.records()) out << json(r).dump() << "\n";
  }
  const auto& s = hub.stats();
  std::cout << json{{"ingested", s.ingested},
                    {"local_done", s.local_done},
                    {"remote_done", s.remote_done},
                    {"errored", s.errored},
                    {"late_dropped", s.late_dropped},
                    {"keep_alives", s.keep_alives},
                    {"notifications", sink.size()},
                    {"cloud_cost_usd", hub.ledger().total().to_string()}}
                   .dump()
            << "\n";
  return s.errored == 0 ? 0 : 3;
}

// --- bench ---------------------------------------------------------------

struct BenchOpts {
  std::string experiment, config, out, csv;
  bool strict = false;
};

int bench_run(const BenchOpts& o) {
  const auto report = bench::run_experiment(o.experiment, read_json(o.config));
  if (o.out.empty() || o.out == "-") {
    std::cout << report.dump();
  } else {
    write_text(o.out, report.dump());
  }
  if (!o.csv.empty()) write_text(o.csv, report.csv());
  const json j = report.to_json();
  for (const auto& c : j["checks"]) {
    std::cerr << (c["pass"].get<bool>() ? "PASS " : "FAIL ") << (c["hard"].get<bool>() ? "" : "(soft) ")
              << c["name"].get<std::string>() << " value=" << c["value"].dump()
              << " target=" << c["target"].dump() << "\n";
  }
  return o.strict && !report.hard_checks_pass() ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ssiot: sealed serverless inference for smart-home hubs"};
  app.require_subcommand(1);

  KmsOpts kms_o;
  auto* kms_cmd = app.add_subcommand("kms", "key management service")->require_subcommand(1);
  auto* serve = kms_cmd->add_subcommand("serve", "serve the HTTPS API until interrupted");
  serve->add_option("--config", kms_o.config, "KMS config JSON");
  serve->add_option("--port", kms_o.port, "listen port (0 picks one)");
  serve->add_option("--store", kms_o.store, "JSON-lines journal path");
  serve->add_option("--cert-out", kms_o.cert_out, "write the served certificate PEM here");
  serve->callback([&] { std::exit(kms_serve(kms_o)); });
  auto* revoke = kms_cmd->add_subcommand("revoke", "revoke an app");
  revoke->add_option("app_id", kms_o.app)->required();
  revoke->add_option("--kms", kms_o.url, "KMS base URL")->required();
  revoke->add_option("--ca", kms_o.ca, "CA/certificate PEM to verify the KMS");
  revoke->callback([&] { std::exit(kms_revoke(kms_o)); });
  auto* audit = kms_cmd->add_subcommand("audit", "print access records as JSON lines");
  audit->add_option("--kms", kms_o.url, "KMS base URL")->required();
  audit->add_option("--ca", kms_o.ca, "CA/certificate PEM to verify the KMS");
  audit->add_option("--app", kms_o.app);
  audit->add_option("--decision", kms_o.decision);
  audit->add_option("--from", kms_o.from, "inclusive, ms since epoch");
  audit->add_option("--to", kms_o.to, "inclusive, ms since epoch");
  audit->callback([&] { std::exit(kms_audit(kms_o)); });

  FaasOpts faas_o;
  auto* faas_cmd = app.add_subcommand("faas", "serverless platform emulator")->require_subcommand(1);
  auto* fserve = faas_cmd->add_subcommand("serve", "serve the emulator over HTTP until interrupted");
  fserve->add_option("--config", faas_o.config, "emulator config JSON");
  fserve->add_option("--host", faas_o.host);
  fserve->add_option("--port", faas_o.port);
  fserve->add_option("--ca", faas_o.ca, "CA/certificate PEM used to reach KMS instances");
  fserve->add_flag("--real-time", faas_o.real_time, "sleep for modelled latencies");
  fserve->callback([&] { std::exit(faas_serve(faas_o)); });

  AppOpts app_o;
  auto* app_cmd = app.add_subcommand("app", "app provisioning and deployment")->require_subcommand(1);
  auto* prov = app_cmd->add_subcommand("provision", "generate and register app keys");
  prov->add_option("app_id", app_o.app)->required();
  prov->add_option("--kms", app_o.kms, "KMS base URL")->required();
  prov->add_option("--ca", app_o.ca);
  prov->add_option("--state-dir", app_o.state_dir);
  prov->add_option("--secret", app_o.secret, "key store secret (or SSIOT_HUB_SECRET)");
  prov->callback([&] { std::exit(app_provision(app_o)); });
  auto* deploy = app_cmd->add_subcommand("deploy", "package and deploy an app function");
  deploy->add_option("app_id", app_o.app)->required();
  deploy->add_option("--profile", app_o.profile, "workload profile or native behavior")->required();
  deploy->add_option("--memory", app_o.memory, "function memory in GB");
  deploy->add_option("--faas", app_o.faas, "FaaS base URL")->required();
  deploy->add_option("--kms", app_o.kms, "KMS base URL")->required();
  deploy->add_option("--ca", app_o.ca);
  deploy->add_option("--function-id", app_o.function_id);
  deploy->add_option("--state-dir", app_o.state_dir);
  deploy->add_option("--secret", app_o.secret);
  deploy->callback([&] { std::exit(app_deploy(app_o)); });

  HubOpts hub_o;
  auto* hub_cmd = app.add_subcommand("hub", "smart-home hub")->require_subcommand(1);
  auto* run = hub_cmd->add_subcommand("run", "replay an event script through the hub");
  run->add_option("--config", hub_o.config, "hub config JSON")->required();
  run->add_option("--rules", hub_o.rules, "automation rules file");
  run->add_option("--policy", hub_o.policy, "latency-min|budget-cap|balanced|local-only|remote-only");
  run->add_option("--budget", hub_o.budget, "monthly budget in USD");
  run->add_option("--device", hub_o.device, "rpi|jetson");
  run->add_option("--events", hub_o.events, "event script (JSON lines, '-' for stdin)");
  run->add_option("--start-ms", hub_o.start_ms, "virtual time of script offset 0 (default: emulator clock)");
  run->add_option("--faas", hub_o.faas, "FaaS base URL")->required();
  run->add_option("--ca", hub_o.ca);
  run->add_option("--state-dir", hub_o.state_dir);
  run->add_option("--secret", hub_o.secret);
  run->add_option("--notifications", hub_o.notifications, "append notifications here (JSON lines)");
  run->add_option("--records", hub_o.records, "write per-request records here (JSON lines)");
  run->callback([&] { std::exit(hub_run(hub_o)); });

  BenchOpts bench_o;
  auto* bench_cmd = app.add_subcommand("bench", "run a virtual-time experiment");
  bench_cmd->add_option("experiment", bench_o.experiment)
      ->required()
      ->check(CLI::IsMember(bench::experiment_names()));
  bench_cmd->add_option("--config", bench_o.config, "experiment config JSON");
  bench_cmd->add_option("--out", bench_o.out, "report path (default stdout)");
  bench_cmd->add_option("--csv", bench_o.csv, "also write records as CSV");
  bench_cmd->add_flag("--strict", bench_o.strict, "exit 2 when a hard check fails");
  bench_cmd->callback([&] { std::exit(bench_run(bench_o)); });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "ssiot: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

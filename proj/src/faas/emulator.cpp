// SPDX-License-Identifier: Apache-2.0
#include "ssiot/faas/emulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ssiot/envelope/codec.hpp"
#include "ssiot/kms/http.hpp"

namespace ssiot::faas {

using nlohmann::json;

std::string_view to_string(ServedState s) { return s == ServedState::kCold ? "Cold" : "Warm"; }

std::string_view to_string(InstanceState s) {
  switch (s) {
    case InstanceState::kCold: return "Cold";
    case InstanceState::kInitializing: return "Initializing";
    case InstanceState::kWarm: return "Warm";
    case InstanceState::kExpired: return "Expired";
  }
  return "Cold";
}

void to_json(json& j, const InvocationRecord& r) {
  j = {{"invocation_id", r.invocation_id},
       {"function_id", r.function_id},
       {"request_id", r.request_id},
       {"instance_id", r.instance_id},
       {"served_state", to_string(r.served_state)},
       {"keep_alive", r.keep_alive},
       {"submitted_at_ms", to_ms(r.submitted_at)},
       {"completed_at_ms", to_ms(r.completed_at)},
       {"e2e_ms", r.e2e_ms},
       {"network_ms", r.network_ms},
       {"init_ms", r.init_ms},
       {"kms_ms", r.kms_ms},
       {"exec_ms", r.exec_ms},
       {"jitter_ms", r.jitter_ms},
       {"billed_micro_gbs", r.billed.micro()},
       {"cost_usd", r.cost.to_string()},
       {"error", r.error},
       {"detail", r.detail}};
  if (r.response) j["response"] = *r.response;
}

void from_json(const json& j, InvocationRecord& r) {
  r.invocation_id = j.at("invocation_id").get<std::string>();
  r.function_id = j.at("function_id").get<std::string>();
  r.request_id = j.at("request_id").get<std::string>();
  r.instance_id = j.at("instance_id").get<std::string>();
  r.served_state = j.at("served_state").get<std::string>() == "Cold" ? ServedState::kCold
                                                                     : ServedState::kWarm;
  r.keep_alive = j.at("keep_alive").get<bool>();
  r.submitted_at = at_ms(j.at("submitted_at_ms").get<double>());
  r.completed_at = at_ms(j.at("completed_at_ms").get<double>());
  r.e2e_ms = j.at("e2e_ms").get<double>();
  r.network_ms = j.at("network_ms").get<double>();
  r.init_ms = j.at("init_ms").get<double>();
  r.kms_ms = j.at("kms_ms").get<double>();
  r.exec_ms = j.at("exec_ms").get<double>();
  r.jitter_ms = j.at("jitter_ms").get<double>();
  r.billed = GbSeconds::from_micro(j.at("billed_micro_gbs").get<std::int64_t>());
  r.cost = Usd::parse(j.at("cost_usd").get<std::string>());
  r.error = j.at("error").get<std::string>();
  r.detail = j.value("detail", "");
  if (j.contains("response")) {
    r.response = j.at("response").get<envelope::SealedData>();
  } else {
    r.response.reset();
  }
}

void KmsDirectory::add(const std::string& url, std::shared_ptr<kms::KmsEndpoint> endpoint) {
  std::lock_guard lock(mu_);
  endpoints_[url] = std::move(endpoint);
}

kms::KmsEndpoint& KmsDirectory::resolve(const std::string& url) {
  std::lock_guard lock(mu_);
  if (auto it = endpoints_.find(url); it != endpoints_.end()) return *it->second;
  if (url.rfind("https://", 0) != 0) {
    throw Error(Error::Code::kTransport, "no KMS reachable at '" + url + "'");
  }
  auto client = std::make_shared<kms::KmsHttpClient>(url, kms::KmsClientOptions{.ca_file = ca_file_});
  auto& ref = *client;
  endpoints_[url] = std::move(client);
  return ref;
}

EmulatorConfig EmulatorConfig::from_json(const json& j) {
  EmulatorConfig c;
  c.idle_threshold_ms = j.value("idle_threshold_min", c.idle_threshold_ms / 60000.0) * 60000.0;
  c.network_overhead_ms = j.value("network_overhead_ms", c.network_overhead_ms);
  c.jitter_ms = j.value("jitter_ms", c.jitter_ms);
  c.seed = j.value("seed", c.seed);
  if (j.contains("max_instances_per_function") && !j["max_instances_per_function"].is_null()) {
    c.max_instances_per_function = j["max_instances_per_function"].get<std::size_t>();
  }
  c.keep_alive_exec_ms = j.value("keep_alive_exec_ms", c.keep_alive_exec_ms);
  c.keep_alive_billed_ms = j.value("keep_alive_billed_ms", c.keep_alive_billed_ms);
  c.native_cold_init_ms = j.value("native_cold_init_ms", c.native_cold_init_ms);
  c.sandbox.scratch_bytes = j.value("scratch_bytes", c.sandbox.scratch_bytes);
  c.record_platform_trace = j.value("record_platform_trace", c.record_platform_trace);
  if (c.idle_threshold_ms <= 0 || c.network_overhead_ms < 0 || c.jitter_ms < 0) {
    throw std::invalid_argument("emulator config: thresholds and latencies must be >= 0");
  }
  return c;
}

FaasEmulator::FaasEmulator(EmulatorConfig config, ProfileCatalog profiles,
                           std::shared_ptr<KmsDirectory> kms_directory)
    : config_(std::move(config)),
      profiles_(std::move(profiles)),
      kms_(kms_directory ? std::move(kms_directory) : std::make_shared<KmsDirectory>()),
      rng_(config_.seed) {}

std::string FaasEmulator::deploy(const FunctionPackage& package) {
  try {
    validate(package);
  } catch (const std::invalid_argument& e) {
    throw Error(Error::Code::kInvalidPackage, e.what());
  }
  if (functions_.count(package.function_id)) {
    throw Error(Error::Code::kDuplicateFunction, "function '" + package.function_id + "' exists");
  }
  const bool known = package.behavior.kind == AppBehavior::Kind::kProfile
                         ? profiles_.find(package.behavior.name) != nullptr
                         : natives_.count(package.behavior.name) > 0;
  if (!known) {
    throw Error(Error::Code::kUnknownBehavior, "unknown behavior '" + package.behavior.name + "'");
  }
  functions_.emplace(package.function_id, Function{package, {}, 1});
  return package.function_id;
}

void FaasEmulator::remove(const std::string& function_id) {
  auto& fn = function(function_id);
  for (auto& inst : fn.instances) {
    if (inst.state != InstanceState::kExpired) {
      transition(inst, InstanceState::kExpired, std::max(inst.busy_until, inst.last_invoked_at));
    }
  }
  functions_.erase(function_id);
}

void FaasEmulator::register_native_function(const std::string& name, AppFunction fn,
                                            NativeSpec spec) {
  if (!fn) throw std::invalid_argument("native function '" + name + "' is empty");
  if (!(spec.exec_ms >= 0)) throw std::invalid_argument("exec_ms must be >= 0");
  if (!natives_.emplace(name, Native{std::move(fn), spec}).second) {
    throw Error(Error::Code::kDuplicateFunction, "native function '" + name + "' exists");
  }
}

bool FaasEmulator::deployed(const std::string& function_id) const {
  return functions_.count(function_id) > 0;
}

const FunctionPackage& FaasEmulator::package(const std::string& function_id) const {
  auto it = functions_.find(function_id);
  if (it == functions_.end()) {
    throw Error(Error::Code::kUnknownFunction, "unknown function '" + function_id + "'");
  }
  return it->second.package;
}

FaasEmulator::Function& FaasEmulator::function(const std::string& function_id) {
  auto it = functions_.find(function_id);
  if (it == functions_.end()) {
    throw Error(Error::Code::kUnknownFunction, "unknown function '" + function_id + "'");
  }
  return it->second;
}

std::vector<FunctionInstance> FaasEmulator::instances(const std::string& function_id) const {
  auto it = functions_.find(function_id);
  if (it == functions_.end()) return {};
  return it->second.instances;
}

std::size_t FaasEmulator::live_instances(const std::string& function_id, SimTime now) {
  expire_idle(now);
  return instances(function_id).size();
}

void FaasEmulator::transition(FunctionInstance& inst, InstanceState to, SimTime at) {
  transitions_.push_back({inst.instance_id, inst.state, to, at});
  inst.state = to;
}

std::size_t FaasEmulator::expire_idle(SimTime now) {
  std::size_t count = 0;
  for (auto& [_, fn] : functions_) {
    auto& pool = fn.instances;
    for (auto& inst : pool) {
      if (inst.state == InstanceState::kWarm && !inst.busy_at(now) &&
          to_ms(now - inst.last_invoked_at) > config_.idle_threshold_ms) {
        transition(inst, InstanceState::kExpired, now);
        ++count;
      }
    }
    std::erase_if(pool, [](const FunctionInstance& i) { return i.state == InstanceState::kExpired; });
  }
  return count;
}

FunctionInstance* FaasEmulator::acquire(Function& fn, SimTime arrival, bool& cold, double init_ms) {
  FunctionInstance* best = nullptr;
  for (auto& inst : fn.instances) {
    if (inst.state != InstanceState::kWarm || inst.busy_at(arrival)) continue;
    if (!best || inst.last_invoked_at > best->last_invoked_at) best = &inst;
  }
  if (best) {
    cold = false;
    return best;
  }
  if (config_.max_instances_per_function &&
      fn.instances.size() >= *config_.max_instances_per_function) {
    return nullptr;
  }
  char id[32];
  std::snprintf(id, sizeof id, "/i-%04llu", static_cast<unsigned long long>(fn.next_instance++));
  FunctionInstance inst;
  inst.instance_id = fn.package.function_id + id;
  inst.function_id = fn.package.function_id;
  inst.created_at = arrival;
  inst.ready_at = arrival + sim_ms(init_ms);
  inst.last_invoked_at = arrival;
  inst.busy_until = inst.ready_at;
  fn.instances.push_back(inst);
  auto& fresh = fn.instances.back();
  transitions_.push_back({fresh.instance_id, InstanceState::kCold, InstanceState::kCold, arrival});
  transition(fresh, InstanceState::kInitializing, arrival);
  transition(fresh, InstanceState::kWarm, fresh.ready_at);
  cold = true;
  return &fresh;
}

double FaasEmulator::draw_jitter() {
  if (config_.jitter_ms <= 0) return 0;
  std::uniform_real_distribution<double> dist(-config_.jitter_ms, config_.jitter_ms);
  return dist(rng_);
}

std::string FaasEmulator::next_invocation_id() {
  char id[32];
  std::snprintf(id, sizeof id, "inv-%08llu", static_cast<unsigned long long>(next_invocation_++));
  return id;
}

void FaasEmulator::trace(PlatformMessage::Kind kind, const std::string& function_id, Bytes bytes) {
  if (config_.record_platform_trace) trace_.push_back({kind, function_id, std::move(bytes)});
}

InvocationRecord FaasEmulator::finish(InvocationRecord rec, FunctionInstance* inst,
                                      SimTime platform_done) {
  if (inst) {
    inst->busy_until = platform_done;
    inst->last_invoked_at = platform_done;
    rec.cost = meter_.record(rec.invocation_id, rec.function_id, rec.billed, rec.keep_alive);
  }
  rec.completed_at = platform_done + sim_ms(rec.network_ms / 2);
  rec.e2e_ms = to_ms(rec.completed_at - rec.submitted_at);
  InvocationRecord kept = rec;
  kept.response.reset();
  records_.push_back(std::move(kept));
  return rec;
}

Bytes synthetic_inference(const std::string& model, ByteView input) {
  // Echo a stubbed {label, score} when the input carries one, otherwise
  // derive a stable pseudo-result from the input bytes.
  auto parsed = json::parse(ssiot::to_string(input), nullptr, false);
  json out;
  if (parsed.is_object() && parsed.contains("label") && parsed["label"].is_string() &&
      parsed.contains("score") && parsed["score"].is_number()) {
    out["label"] = parsed["label"];
    out["score"] = parsed["score"];
  } else {
    static constexpr const char* kLabels[] = {"person", "cat", "dog", "car", "package", "none"};
    const Bytes h = sha256(input);
    out["label"] = kLabels[h[0] % std::size(kLabels)];
    out["score"] = h[1] / 255.0;
  }
  out["model"] = model;
  return to_bytes(out.dump());
}

Bytes FaasEmulator::run_profile(const WorkloadProfile& profile, Sandbox& sandbox) const {
  return synthetic_inference(profile.name, sandbox.input());
}

InvocationRecord FaasEmulator::invoke(const std::string& function_id,
                                      const InvocationRequest& request, SimTime now) {
  expire_idle(now);
  Function& fn = function(function_id);
  const FunctionPackage& pkg = fn.package;

  InvocationRecord rec;
  rec.invocation_id = next_invocation_id();
  rec.function_id = function_id;
  rec.request_id = request.request_id;
  rec.submitted_at = now;
  rec.network_ms = config_.network_overhead_ms;
  const SimTime arrival = now + sim_ms(rec.network_ms / 2);
  if (config_.record_platform_trace) {
    trace(PlatformMessage::Kind::kRequest, function_id, to_bytes(encode(request)));
  }

  if (request.app_id != pkg.app_id) {
    rec.error = "app-mismatch";
    rec.detail = "function serves " + pkg.app_id;
    return finish(std::move(rec), nullptr, arrival);
  }

  const WorkloadProfile* profile = nullptr;
  const Native* native = nullptr;
  if (pkg.behavior.kind == AppBehavior::Kind::kProfile) {
    profile = &profiles_.at(pkg.behavior.name);
  } else {
    native = &natives_.at(pkg.behavior.name);
  }
  const double init_ms = profile ? profile->cold_init_ms : config_.native_cold_init_ms;

  bool cold = false;
  FunctionInstance* inst = acquire(fn, arrival, cold, init_ms);
  if (!inst) {
    rec.error = "throttled";
    rec.detail = "instance cap reached";
    return finish(std::move(rec), nullptr, arrival);
  }
  rec.instance_id = inst->instance_id;
  rec.served_state = cold ? ServedState::kCold : ServedState::kWarm;
  rec.init_ms = cold ? init_ms : 0;
  rec.jitter_ms = draw_jitter();

  kms::KmsEndpoint& kms = kms_->resolve(pkg.kms.url);
  rec.kms_ms = kms.response_latency_ms();
  {
    json kms_req{{"app_id", pkg.app_id},
                 {"request_id", request.request_id},
                 {"wrapped_key", request.encrypted_key}};
    trace(PlatformMessage::Kind::kKmsRequest, function_id, to_bytes(kms_req.dump()));
  }
  auto decision = kms.decrypt_data_key(pkg.app_id, request.request_id, request.encrypted_key);
  const SimTime start = arrival + sim_ms(rec.init_ms);
  if (!decision.granted()) {
    rec.error = "kms-denied";
    rec.detail = std::string(kms::to_string(decision.decision));
    rec.billed = billed_for(pkg.memory_gb, rec.kms_ms);
    rec.jitter_ms = 0;
    return finish(std::move(rec), inst, start + sim_ms(rec.kms_ms));
  }

  rec.exec_ms = profile ? profile->warm_exec_ms : native->spec.exec_ms;
  const double run_ms = std::max(0.0, rec.kms_ms + rec.exec_ms + rec.jitter_ms);
  rec.billed = profile ? (cold ? profile->billed_cold : profile->billed_warm)
                       : billed_for(pkg.memory_gb, rec.init_ms + run_ms);

  Bytes plaintext;
  try {
    plaintext = envelope::open_data(request.encrypted_data, *decision.key, pkg.app_private_key);
  } catch (const envelope::Error& e) {
    rec.error = "decrypt-failed";
    rec.detail = std::string(envelope::to_string(e.code()));
    rec.exec_ms = 0;
    rec.jitter_ms = 0;
    rec.billed = billed_for(pkg.memory_gb, rec.kms_ms);
    return finish(std::move(rec), inst, start + sim_ms(rec.kms_ms));
  }

  Bytes output;
  {
    Sandbox sandbox(plaintext, pkg.kms.url, config_.sandbox);
    try {
      output = profile ? run_profile(*profile, sandbox) : native->fn(sandbox);
    } catch (const SandboxViolation& e) {
      rec.error = "sandbox-violation";
      rec.detail = e.what();
    } catch (const std::exception& e) {
      rec.error = "app-error";
      rec.detail = e.what();
    }
  }
  secure_wipe(plaintext);
  if (rec.ok()) {
    rec.response = envelope::seal_result(output, *decision.key);
    if (config_.record_platform_trace) {
      trace(PlatformMessage::Kind::kResponse, function_id,
            to_bytes(envelope::encode(*rec.response)));
    }
  }
  secure_wipe(output);
  return finish(std::move(rec), inst, start + sim_ms(run_ms));
}

InvocationRecord FaasEmulator::keep_alive(const std::string& function_id, SimTime now) {
  expire_idle(now);
  Function& fn = function(function_id);
  const FunctionPackage& pkg = fn.package;
  const double init_ms = pkg.behavior.kind == AppBehavior::Kind::kProfile
                             ? profiles_.at(pkg.behavior.name).cold_init_ms
                             : config_.native_cold_init_ms;

  InvocationRecord rec;
  rec.invocation_id = next_invocation_id();
  rec.function_id = function_id;
  rec.request_id = "keep-alive";
  rec.keep_alive = true;
  rec.submitted_at = now;
  rec.network_ms = config_.network_overhead_ms;
  const SimTime arrival = now + sim_ms(rec.network_ms / 2);

  bool cold = false;
  FunctionInstance* inst = acquire(fn, arrival, cold, init_ms);
  if (!inst) {
    rec.error = "throttled";
    return finish(std::move(rec), nullptr, arrival);
  }
  rec.instance_id = inst->instance_id;
  rec.served_state = cold ? ServedState::kCold : ServedState::kWarm;
  rec.init_ms = cold ? init_ms : 0;
  rec.exec_ms = config_.keep_alive_exec_ms;
  rec.billed = billed_for(pkg.memory_gb, config_.keep_alive_billed_ms);
  return finish(std::move(rec), inst, arrival + sim_ms(rec.init_ms + rec.exec_ms));
}

}  // namespace ssiot::faas

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ssiot/common/sim_clock.hpp"
#include "ssiot/faas/money.hpp"
#include "ssiot/faas/package.hpp"
#include "ssiot/faas/profile.hpp"
#include "ssiot/faas/sandbox.hpp"
#include "ssiot/kms/endpoint.hpp"

namespace ssiot::faas {

class Error : public std::runtime_error {
 public:
  enum class Code { kDuplicateFunction, kUnknownFunction, kInvalidPackage, kUnknownBehavior,
                    kTransport };
  Error(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

enum class ServedState { kCold, kWarm };
enum class InstanceState { kCold, kInitializing, kWarm, kExpired };

std::string_view to_string(ServedState s);
std::string_view to_string(InstanceState s);

struct FunctionInstance {
  std::string instance_id;
  std::string function_id;
  InstanceState state = InstanceState::kCold;
  SimTime created_at;
  SimTime ready_at;         // end of initialization
  SimTime last_invoked_at;  // completion time of the latest request
  SimTime busy_until;

  bool busy_at(SimTime now) const { return now < busy_until; }
};

struct LifecycleTransition {
  std::string instance_id;
  InstanceState from;
  InstanceState to;
  SimTime at;
};

// Outcome of one invocation. `error` is empty on success; otherwise one of
// "kms-denied", "decrypt-failed", "sandbox-violation", "app-error",
// "app-mismatch", "throttled".
struct InvocationRecord {
  std::string invocation_id;
  std::string function_id;
  std::string request_id;
  std::string instance_id;
  ServedState served_state = ServedState::kWarm;
  bool keep_alive = false;

  SimTime submitted_at;
  SimTime completed_at;  // response back at the caller
  double e2e_ms = 0;
  double network_ms = 0;
  double init_ms = 0;
  double kms_ms = 0;
  double exec_ms = 0;
  double jitter_ms = 0;

  GbSeconds billed;
  Usd cost;

  std::optional<envelope::SealedData> response;
  std::string error;
  std::string detail;

  bool ok() const { return error.empty(); }
};

void to_json(nlohmann::json& j, const InvocationRecord& r);
void from_json(const nlohmann::json& j, InvocationRecord& r);

// Anything that can host functions: the in-process emulator, the
// thread-safe service around it, or an HTTP client for a remote one.
class FaasEndpoint {
 public:
  virtual ~FaasEndpoint() = default;
  virtual std::string deploy(const FunctionPackage& package) = 0;
  virtual void remove(const std::string& function_id) = 0;
  virtual InvocationRecord invoke(const std::string& function_id,
                                  const InvocationRequest& request, SimTime now) = 0;
  // No-op invocation that keeps (or makes) an instance warm.
  virtual InvocationRecord keep_alive(const std::string& function_id, SimTime now) = 0;
};

// Maps KMS urls from packages to endpoints. In-process services are added
// explicitly; unknown https urls get an HTTP client on first use.
class KmsDirectory {
 public:
  explicit KmsDirectory(std::string ca_file = {}) : ca_file_(std::move(ca_file)) {}

  void add(const std::string& url, std::shared_ptr<kms::KmsEndpoint> endpoint);
  kms::KmsEndpoint& resolve(const std::string& url);

 private:
  std::mutex mu_;
  std::string ca_file_;
  std::map<std::string, std::shared_ptr<kms::KmsEndpoint>> endpoints_;
};

struct EmulatorConfig {
  double idle_threshold_ms = 26 * 60 * 1000.0;
  double network_overhead_ms = kDefaultNetworkOverheadMs;
  // Uniform in [-jitter_ms, +jitter_ms], applied to execution time.
  double jitter_ms = 20.0;
  std::uint64_t seed = 1;
  // Unlimited when absent.
  std::optional<std::size_t> max_instances_per_function;
  double keep_alive_exec_ms = 1.0;
  double keep_alive_billed_ms = 100.0;
  double native_cold_init_ms = 250.0;
  SandboxLimits sandbox;
  // Keep a copy of every message crossing the platform boundary.
  bool record_platform_trace = false;

  static EmulatorConfig from_json(const nlohmann::json& j);
};

// Stand-in for model inference: a {label, score, model} JSON document.
// Inputs that already are {label, score} JSON are echoed.
Bytes synthetic_inference(const std::string& model, ByteView input);

struct NativeSpec {
  double exec_ms = 5.0;
};

// Bytes the provider can observe: requests, KMS calls and responses.
struct PlatformMessage {
  enum class Kind { kRequest, kKmsRequest, kResponse };
  Kind kind;
  std::string function_id;
  Bytes bytes;
};

// Deterministic, single-owner FaaS platform model over virtual time. Calls
// are expected in non-decreasing `now` order.
class FaasEmulator final : public FaasEndpoint {
 public:
  FaasEmulator(EmulatorConfig config, ProfileCatalog profiles,
               std::shared_ptr<KmsDirectory> kms_directory);

  std::string deploy(const FunctionPackage& package) override;
  void remove(const std::string& function_id) override;
  InvocationRecord invoke(const std::string& function_id, const InvocationRequest& request,
                          SimTime now) override;
  InvocationRecord keep_alive(const std::string& function_id, SimTime now) override;

  void register_native_function(const std::string& name, AppFunction fn, NativeSpec spec = {});
  // Expires every idle Warm instance whose idle time exceeds the threshold.
  std::size_t expire_idle(SimTime now);

  bool deployed(const std::string& function_id) const;
  const FunctionPackage& package(const std::string& function_id) const;
  std::vector<FunctionInstance> instances(const std::string& function_id) const;
  std::size_t live_instances(const std::string& function_id, SimTime now);
  const std::vector<LifecycleTransition>& transitions() const { return transitions_; }
  const std::vector<InvocationRecord>& records() const { return records_; }
  const std::vector<PlatformMessage>& platform_trace() const { return trace_; }
  const CostMeter& meter() const { return meter_; }
  const ProfileCatalog& profiles() const { return profiles_; }
  const EmulatorConfig& config() const { return config_; }

 private:
  struct Function {
    FunctionPackage package;
    std::vector<FunctionInstance> instances;
    std::uint64_t next_instance = 1;
  };
  struct Native {
    AppFunction fn;
    NativeSpec spec;
  };

  Function& function(const std::string& function_id);
  // A free warm instance (most recently used first) or a freshly spawned
  // one. nullptr when the scaling cap is hit.
  FunctionInstance* acquire(Function& fn, SimTime arrival, bool& cold, double init_ms);
  void transition(FunctionInstance& inst, InstanceState to, SimTime at);
  double draw_jitter();
  std::string next_invocation_id();
  void trace(PlatformMessage::Kind kind, const std::string& function_id, Bytes bytes);
  InvocationRecord finish(InvocationRecord rec, FunctionInstance* inst, SimTime platform_done);
  Bytes run_profile(const WorkloadProfile& profile, Sandbox& sandbox) const;

  EmulatorConfig config_;
  ProfileCatalog profiles_;
  std::shared_ptr<KmsDirectory> kms_;
  std::map<std::string, Function> functions_;
  std::map<std::string, Native> natives_;
  std::vector<LifecycleTransition> transitions_;
  std::vector<InvocationRecord> records_;
  std::vector<PlatformMessage> trace_;
  CostMeter meter_;
  std::mt19937_64 rng_;
  std::uint64_t next_invocation_ = 1;
};

}  // namespace ssiot::faas

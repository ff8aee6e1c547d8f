// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssiot/envelope/envelope.hpp"
#include "ssiot/faas/emulator.hpp"
#include "ssiot/faas/package.hpp"
#include "ssiot/faas/profile.hpp"
#include "ssiot/kms/endpoint.hpp"

namespace ssiot::toolchain {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- discovery

struct DiscoveredKms {
  std::string url;
  envelope::KmsIdentity identity;
  double response_latency_ms = 0;
};

struct Discovery {
  std::vector<DiscoveredKms> found;
  std::vector<std::string> warnings;  // one per unreachable endpoint
};

// Fetches each endpoint's public key. Throws Error when the list is empty
// or nothing answered.
Discovery discover_kms(const std::vector<std::string>& urls, faas::KmsDirectory& directory);

// ---------------------------------------------------------------- key store

// App key pairs kept by the hub, encrypted at rest under a key derived from
// a master secret (PBKDF2-SHA256, then AES-256-GCM). Safe to share between
// threads; each mutation rewrites the file.
class HubKeyStore {
 public:
  // Empty path keeps everything in memory. An existing file is opened and
  // must decrypt under `master_secret`.
  HubKeyStore(std::string path, std::string master_secret);

  void put(const envelope::AppKeyPair& keys);
  std::optional<envelope::AppKeyPair> get(const std::string& app_id) const;
  bool contains(const std::string& app_id) const;
  std::vector<std::string> app_ids() const;
  void erase(const std::string& app_id);
  const std::string& path() const { return path_; }

 private:
  void save() const;
  void load();

  std::string path_;
  std::string secret_;
  Bytes salt_;
  mutable std::mutex mu_;
  std::map<std::string, envelope::AppKeyPair> keys_;
};

// ---------------------------------------------------------------- provisioning

struct Provisioned {
  envelope::AppKeyPair keys;
  kms::RegistrationReceipt receipt;
  envelope::KmsIdentity kms;
};

// Generates the app key pair, registers it at `kms` and stores the full pair
// in `store`. Registration errors (duplicate app) propagate from the KMS.
Provisioned provision_app(const std::string& app_id, kms::KmsEndpoint& kms, HubKeyStore& store);

// Behaviors a package may reference: profile names plus registered natives.
struct BehaviorCatalog {
  faas::ProfileCatalog profiles;
  std::set<std::string> natives;

  std::optional<faas::AppBehavior> resolve(const std::string& name) const;
};

// Deterministic: same inputs give byte-identical encodings. The package
// carries only the decryption half of the app key. Throws Error for unknown
// behaviors and std::invalid_argument for out-of-range memory.
faas::FunctionPackage package_app(const std::string& app_id, const std::string& behavior_ref,
                                  const faas::KmsReference& kms,
                                  const envelope::PrivateKey& app_private_key, double memory_gb,
                                  const BehaviorCatalog& behaviors,
                                  std::string function_id = {});

struct DeploymentReceipt {
  std::string app_id;
  std::string function_id;
  std::string kms_id;
  std::int64_t deployed_at_ms = 0;
  std::string package_digest;
};

void to_json(nlohmann::json& j, const DeploymentReceipt& r);
void from_json(const nlohmann::json& j, DeploymentReceipt& r);

// Deploys and, when `state_dir` is set, writes <state_dir>/receipts/<app>.json.
DeploymentReceipt deploy_app(const faas::FunctionPackage& package, faas::FaasEndpoint& faas,
                             const std::string& state_dir = {},
                             std::function<std::int64_t()> clock = {});

std::optional<DeploymentReceipt> load_receipt(const std::string& state_dir,
                                              const std::string& app_id);

}  // namespace ssiot::toolchain

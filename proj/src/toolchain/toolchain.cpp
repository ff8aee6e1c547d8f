// SPDX-License-Identifier: Apache-2.0
#include "ssiot/toolchain/toolchain.hpp"

#include <openssl/evp.h>
#include <sys/stat.h>

#include <chrono>
#include <filesystem>
#include <fstream>

#include "ssiot/envelope/codec.hpp"
#include "ssiot/kms/types.hpp"

namespace ssiot::toolchain {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kStoreFormat = "ssiot-hub-keystore/1";
constexpr int kPbkdf2Iterations = 100'000;

envelope::DataKey derive_store_key(const std::string& secret, ByteView salt) {
  Bytes out(envelope::kDataKeySize);
  if (PKCS5_PBKDF2_HMAC(secret.data(), static_cast<int>(secret.size()), salt.data(),
                        static_cast<int>(salt.size()), kPbkdf2Iterations, EVP_sha256(),
                        static_cast<int>(out.size()), out.data()) != 1) {
    throw Error("key derivation failed");
  }
  auto key = envelope::DataKey::from_bytes(out);
  secure_wipe(out);
  return key;
}

void write_private_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out) throw Error("cannot write " + tmp.string());
    ::chmod(tmp.c_str(), 0600);
    out << text;
    if (!out) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::int64_t wall_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

}  // namespace

Discovery discover_kms(const std::vector<std::string>& urls, faas::KmsDirectory& directory) {
  if (urls.empty()) throw Error("no KMS endpoints given");
  Discovery d;
  for (const auto& url : urls) {
    try {
      auto& endpoint = directory.resolve(url);
      DiscoveredKms k{url, endpoint.get_public_key(), 0};
      k.response_latency_ms = endpoint.response_latency_ms();
      d.found.push_back(std::move(k));
    } catch (const std::exception& e) {
      d.warnings.push_back(url + ": " + e.what());
    }
  }
  if (d.found.empty()) {
    std::string all;
    for (const auto& w : d.warnings) all += "\n  " + w;
    throw Error("no KMS endpoint reachable:" + all);
  }
  return d;
}

HubKeyStore::HubKeyStore(std::string path, std::string master_secret)
    : path_(std::move(path)), secret_(std::move(master_secret)) {
  if (secret_.empty()) throw std::invalid_argument("hub key store needs a master secret");
  if (!path_.empty() && fs::exists(path_)) {
    load();
  } else {
    salt_ = secure_random(16);
  }
}

void HubKeyStore::load() {
  std::ifstream in(path_, std::ios::binary);
  json doc = json::parse(in, nullptr, false);
  if (doc.is_discarded() || doc.value("format", "") != kStoreFormat) {
    throw Error(path_ + " is not a hub key store");
  }
  salt_ = base64_decode(doc.at("salt").get<std::string>());
  const auto sealed = envelope::decode_sealed(doc.at("sealed").get<std::string>());
  Bytes plain;
  try {
    plain = envelope::open_result(sealed, derive_store_key(secret_, salt_));
  } catch (const std::exception&) {
    throw Error(path_ + ": wrong master secret or corrupted key store");
  }
  json entries = json::parse(ssiot::to_string(plain));
  secure_wipe(plain);
  for (auto& [app_id, e] : entries.items()) {
    envelope::AppKeyPair kp;
    kp.app_id = app_id;
    kp.public_key = e.at("public_key").get<envelope::PublicKey>();
    kp.private_key = e.at("private_key").get<envelope::PrivateKey>();
    keys_[app_id] = std::move(kp);
  }
}

void HubKeyStore::save() const {
  if (path_.empty()) return;
  json entries = json::object();
  for (const auto& [id, kp] : keys_) {
    entries[id] = {{"public_key", kp.public_key}, {"private_key", kp.private_key}};
  }
  std::string text = entries.dump();
  const auto sealed = envelope::seal_result(to_bytes(text), derive_store_key(secret_, salt_));
  std::fill(text.begin(), text.end(), '\0');
  json doc{{"format", kStoreFormat},
           {"kdf", "pbkdf2-sha256"},
           {"iterations", kPbkdf2Iterations},
           {"salt", base64_encode(salt_)},
           {"sealed", envelope::encode(sealed)}};
  write_private_file(path_, doc.dump(2) + "\n");
}

void HubKeyStore::put(const envelope::AppKeyPair& keys) {
  if (keys.app_id.empty()) throw std::invalid_argument("key pair without app_id");
  std::lock_guard lock(mu_);
  keys_[keys.app_id] = keys;
  save();
}

std::optional<envelope::AppKeyPair> HubKeyStore::get(const std::string& app_id) const {
  std::lock_guard lock(mu_);
  if (auto it = keys_.find(app_id); it != keys_.end()) return it->second;
  return std::nullopt;
}

bool HubKeyStore::contains(const std::string& app_id) const {
  std::lock_guard lock(mu_);
  return keys_.count(app_id) > 0;
}

std::vector<std::string> HubKeyStore::app_ids() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : keys_) out.push_back(id);
  return out;
}

void HubKeyStore::erase(const std::string& app_id) {
  std::lock_guard lock(mu_);
  keys_.erase(app_id);
  save();
}

Provisioned provision_app(const std::string& app_id, kms::KmsEndpoint& kms, HubKeyStore& store) {
  if (app_id.empty()) throw std::invalid_argument("app_id must be nonempty");
  Provisioned p;
  p.kms = kms.get_public_key();
  p.keys = envelope::generate_app_keypair(app_id);
  p.receipt = kms.register_app(app_id, {p.keys.public_key, p.keys.private_key});
  // Only after the KMS accepted it, so a rejected duplicate leaves the
  // previously stored pair intact.
  store.put(p.keys);
  return p;
}

std::optional<faas::AppBehavior> BehaviorCatalog::resolve(const std::string& name) const {
  if (profiles.find(name)) return faas::AppBehavior{faas::AppBehavior::Kind::kProfile, name};
  if (natives.count(name)) return faas::AppBehavior{faas::AppBehavior::Kind::kNative, name};
  return std::nullopt;
}

faas::FunctionPackage package_app(const std::string& app_id, const std::string& behavior_ref,
                                  const faas::KmsReference& kms,
                                  const envelope::PrivateKey& app_private_key, double memory_gb,
                                  const BehaviorCatalog& behaviors, std::string function_id) {
  auto behavior = behaviors.resolve(behavior_ref);
  if (!behavior) throw Error("unknown behavior '" + behavior_ref + "'");
  faas::FunctionPackage pkg;
  pkg.function_id = function_id.empty() ? "fn-" + app_id : std::move(function_id);
  pkg.app_id = app_id;
  pkg.behavior = *behavior;
  pkg.kms = kms;
  pkg.app_private_key = app_private_key.decryption_only();
  pkg.memory_gb = memory_gb;
  faas::validate(pkg);
  return pkg;
}

void to_json(json& j, const DeploymentReceipt& r) {
  j = {{"app_id", r.app_id},
       {"function_id", r.function_id},
       {"kms_id", r.kms_id},
       {"deployed_at_ms", r.deployed_at_ms},
       {"package_digest", r.package_digest}};
}

void from_json(const json& j, DeploymentReceipt& r) {
  r.app_id = j.at("app_id").get<std::string>();
  r.function_id = j.at("function_id").get<std::string>();
  r.kms_id = j.at("kms_id").get<std::string>();
  r.deployed_at_ms = j.at("deployed_at_ms").get<std::int64_t>();
  r.package_digest = j.at("package_digest").get<std::string>();
}

DeploymentReceipt deploy_app(const faas::FunctionPackage& package, faas::FaasEndpoint& faas,
                             const std::string& state_dir, std::function<std::int64_t()> clock) {
  faas::validate(package);
  DeploymentReceipt r;
  r.function_id = faas.deploy(package);
  r.app_id = package.app_id;
  r.kms_id = package.kms.kms_id;
  r.deployed_at_ms = clock ? clock() : wall_ms();
  r.package_digest = faas::package_digest(package);
  if (!state_dir.empty()) {
    write_private_file(fs::path(state_dir) / "receipts" / (package.app_id + ".json"),
                       json(r).dump(2) + "\n");
  }
  return r;
}

std::optional<DeploymentReceipt> load_receipt(const std::string& state_dir,
                                              const std::string& app_id) {
  const fs::path p = fs::path(state_dir) / "receipts" / (app_id + ".json");
  std::ifstream in(p);
  if (!in) return std::nullopt;
  return json::parse(in).get<DeploymentReceipt>();
}

}  // namespace ssiot::toolchain

// SPDX-License-Identifier: Apache-2.0
#include "ssiot/kms/service.hpp"

#include <chrono>

#include "ssiot/envelope/codec.hpp"

namespace ssiot::kms {
namespace {

std::int64_t system_now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::string random_kms_id() { return "kms-" + hex_encode(secure_random(6)); }

}  // namespace

KeyManagementService::KeyManagementService(KmsConfig config, std::unique_ptr<KmsStore> store,
                                           Clock clock)
    : config_(std::move(config)),
      store_(store ? std::move(store) : std::make_unique<MemoryStore>()),
      clock_(clock ? std::move(clock) : Clock(system_now_ms)) {
  if (config_.simulated_response_latency_ms < 0) {
    throw std::invalid_argument("simulated_response_latency_ms must be >= 0");
  }
  auto entries = store_->replay();
  if (entries.empty() || entries.front().value("type", "") != "identity") {
    if (!entries.empty()) throw Error(Errc::kStore, "store does not start with an identity entry");
    identity_ = envelope::generate_kms_keypair(config_.kms_id.empty() ? random_kms_id()
                                                                      : config_.kms_id);
    store_->append({{"type", "identity"},
                    {"kms_id", identity_.kms_id},
                    {"public_key", identity_.public_key},
                    {"private_key", identity_.private_key}});
    return;
  }
  restore(entries);
}

void KeyManagementService::restore(const std::vector<nlohmann::json>& entries) {
  for (const auto& e : entries) {
    const std::string type = e.value("type", "");
    if (type == "identity") {
      identity_.kms_id = e.at("kms_id").get<std::string>();
      identity_.public_key = e.at("public_key").get<envelope::PublicKey>();
      identity_.private_key = e.at("private_key").get<envelope::PrivateKey>();
    } else if (type == "register") {
      AppRegistration reg;
      reg.app_id = e.at("app_id").get<std::string>();
      reg.key_material = e.at("key_material").get<AppKeyMaterial>();
      reg.registered_at_ms = e.at("registered_at_ms").get<std::int64_t>();
      reg.generation = e.at("generation").get<std::uint64_t>();
      registry_[reg.app_id] = std::move(reg);
    } else if (type == "revoke") {
      RevocationEvent ev{e.at("app_id").get<std::string>(), e.at("at_ms").get<std::int64_t>(),
                         e.at("after_seq").get<std::uint64_t>(),
                         e.at("generation").get<std::uint64_t>()};
      registry_.at(ev.app_id).status = RegistrationStatus::kRevoked;
      revocations_.push_back(std::move(ev));
    } else if (type == "access") {
      auto rec = e.at("record").get<AccessRecord>();
      next_seq_ = rec.seq + 1;
      audit_.push_back(std::move(rec));
    } else {
      throw Error(Errc::kStore, "unknown store entry type '" + type + "'");
    }
  }
}

envelope::KmsIdentity KeyManagementService::get_public_key() {
  return {identity_.kms_id, identity_.public_key};
}

RegistrationReceipt KeyManagementService::register_app(const std::string& app_id,
                                                       const AppKeyMaterial& material) {
  if (app_id.empty()) throw std::invalid_argument("app_id must be nonempty");
  if (!envelope::is_valid_pair(material.public_key, material.private_key)) {
    throw Error(Errc::kInvalidKeyMaterial, "key material for " + app_id + " is not a valid pair");
  }
  std::lock_guard lock(mu_);
  auto it = registry_.find(app_id);
  if (it != registry_.end() && it->second.status == RegistrationStatus::kActive) {
    throw Error(Errc::kDuplicateActiveRegistration, app_id + " already has an active registration");
  }
  AppRegistration reg;
  reg.app_id = app_id;
  reg.key_material = {material.public_key, material.private_key.decryption_only()};
  reg.registered_at_ms = clock_();
  reg.generation = it == registry_.end() ? 1 : it->second.generation + 1;
  store_->append({{"type", "register"},
                  {"app_id", reg.app_id},
                  {"key_material", reg.key_material},
                  {"registered_at_ms", reg.registered_at_ms},
                  {"generation", reg.generation}});
  RegistrationReceipt receipt{app_id, identity_.kms_id, reg.registered_at_ms, reg.generation};
  registry_[app_id] = std::move(reg);
  return receipt;
}

void KeyManagementService::revoke_app(const std::string& app_id) {
  std::lock_guard lock(mu_);
  auto it = registry_.find(app_id);
  if (it == registry_.end()) throw Error(Errc::kUnknownApp, "unknown app " + app_id);
  if (it->second.status != RegistrationStatus::kActive) {
    throw Error(Errc::kNotActive, app_id + " is already revoked");
  }
  RevocationEvent ev{app_id, clock_(), next_seq_ - 1, it->second.generation};
  store_->append({{"type", "revoke"},
                  {"app_id", ev.app_id},
                  {"at_ms", ev.at_ms},
                  {"after_seq", ev.after_seq},
                  {"generation", ev.generation}});
  it->second.status = RegistrationStatus::kRevoked;
  revocations_.push_back(std::move(ev));
}

DecryptResult KeyManagementService::decrypt_data_key(const std::string& app_id,
                                                     const std::string& request_id,
                                                     const envelope::WrappedKey& wrapped) {
  std::optional<AppRegistration> reg;
  {
    std::lock_guard lock(mu_);
    if (auto it = registry_.find(app_id); it != registry_.end()) reg = it->second;
  }

  DecryptResult result;
  if (!reg) {
    result.decision = Decision::kDeniedUnregistered;
    result.cause = "no registration for app";
  } else if (reg->status == RegistrationStatus::kRevoked) {
    result.decision = Decision::kDeniedRevoked;
    result.cause = "registration revoked";
  } else if (wrapped.signer_app_id != app_id) {
    result.decision = Decision::kDeniedBadSignature;
    result.cause = "signer does not match requesting app";
  } else if (wrapped.kms_id != identity_.kms_id) {
    result.decision = Decision::kDeniedCryptoError;
    result.cause = "blob addressed to another kms";
  } else {
    try {
      result.key = envelope::kms_unwrap(wrapped, identity_.private_key,
                                        reg->key_material.public_key,
                                        reg->key_material.private_key);
      result.decision = Decision::kGranted;
    } catch (const envelope::Error& e) {
      result.decision = e.code() == envelope::Errc::kSignatureInvalid
                            ? Decision::kDeniedBadSignature
                            : Decision::kDeniedCryptoError;
      result.cause = std::string(envelope::to_string(e.code()));
    }
  }

  AccessRecord rec;
  rec.app_id = app_id;
  rec.request_id = request_id;
  rec.blob_digest = sha256_hex(to_bytes(envelope::encode(wrapped)));

  std::lock_guard lock(mu_);
  if (result.granted()) {
    // A revoke or re-registration may have landed while we were unwrapping.
    auto it = registry_.find(app_id);
    if (it == registry_.end() || it->second.status != RegistrationStatus::kActive ||
        it->second.generation != reg->generation) {
      result.key.reset();
      result.decision = Decision::kDeniedRevoked;
      result.cause = "registration revoked";
    }
  }
  rec.decision = result.decision;
  rec.cause = result.cause;
  rec = append_record(std::move(rec));
  result.seq = rec.seq;
  return result;
}

AccessRecord KeyManagementService::append_record(AccessRecord record) {
  record.seq = next_seq_++;
  record.timestamp_ms = clock_();
  store_->append({{"type", "access"}, {"record", record}});
  audit_.push_back(record);
  return record;
}

std::vector<AccessRecord> KeyManagementService::query_audit(const AuditFilter& filter) {
  if (filter.from_ms && filter.to_ms && *filter.from_ms > *filter.to_ms) {
    throw Error(Errc::kMalformedTimeRange, "audit time range has from > to");
  }
  std::lock_guard lock(mu_);
  std::vector<AccessRecord> out;
  for (const auto& r : audit_) {
    if (filter.app_id && r.app_id != *filter.app_id) continue;
    if (filter.decision && r.decision != *filter.decision) continue;
    if (filter.from_ms && r.timestamp_ms < *filter.from_ms) continue;
    if (filter.to_ms && r.timestamp_ms > *filter.to_ms) continue;
    out.push_back(r);
  }
  return out;
}

std::optional<AppRegistration> KeyManagementService::registration(const std::string& app_id) const {
  std::lock_guard lock(mu_);
  if (auto it = registry_.find(app_id); it != registry_.end()) return it->second;
  return std::nullopt;
}

std::vector<RevocationEvent> KeyManagementService::revocations() const {
  std::lock_guard lock(mu_);
  return revocations_;
}

std::size_t KeyManagementService::audit_size() const {
  std::lock_guard lock(mu_);
  return audit_.size();
}

}  // namespace ssiot::kms

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ssiot/kms/endpoint.hpp"
#include "ssiot/kms/store.hpp"
#include "ssiot/kms/types.hpp"

namespace ssiot::kms {

// Trusted key management service.
//
// Policy is allow-by-registration plus revocation. Every decrypt_data_key
// call appends exactly one AccessRecord, whatever its outcome. Records and
// registry changes are journaled to the store, and replaying the store
// restores the same identity, registry and audit log.
class KeyManagementService final : public KmsEndpoint {
 public:
  using Clock = std::function<std::int64_t()>;  // milliseconds since epoch

  explicit KeyManagementService(KmsConfig config = {}, std::unique_ptr<KmsStore> store = nullptr,
                                Clock clock = {});

  envelope::KmsIdentity get_public_key() override;
  RegistrationReceipt register_app(const std::string& app_id,
                                   const AppKeyMaterial& material) override;
  DecryptResult decrypt_data_key(const std::string& app_id, const std::string& request_id,
                                 const envelope::WrappedKey& wrapped) override;
  void revoke_app(const std::string& app_id) override;
  std::vector<AccessRecord> query_audit(const AuditFilter& filter) override;
  double response_latency_ms() override { return config_.simulated_response_latency_ms; }

  const std::string& kms_id() const { return identity_.kms_id; }
  const KmsConfig& config() const { return config_; }
  std::optional<AppRegistration> registration(const std::string& app_id) const;
  std::vector<RevocationEvent> revocations() const;
  std::size_t audit_size() const;

 private:
  void restore(const std::vector<nlohmann::json>& entries);
  AccessRecord append_record(AccessRecord record);

  KmsConfig config_;
  std::unique_ptr<KmsStore> store_;
  Clock clock_;
  envelope::KmsKeyPair identity_;

  mutable std::mutex mu_;
  std::map<std::string, AppRegistration> registry_;
  std::vector<AccessRecord> audit_;
  std::vector<RevocationEvent> revocations_;
  std::uint64_t next_seq_ = 1;
};

}  // namespace ssiot::kms

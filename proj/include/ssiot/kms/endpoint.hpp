// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "ssiot/envelope/envelope.hpp"
#include "ssiot/kms/types.hpp"

namespace ssiot::kms {

// The KMS surface as seen by the hub, the toolchain and function runtimes.
// Implemented in-process by KeyManagementService and remotely by
// KmsHttpClient.
class KmsEndpoint {
 public:
  virtual ~KmsEndpoint() = default;

  virtual envelope::KmsIdentity get_public_key() = 0;
  virtual RegistrationReceipt register_app(const std::string& app_id,
                                           const AppKeyMaterial& material) = 0;
  virtual DecryptResult decrypt_data_key(const std::string& app_id, const std::string& request_id,
                                         const envelope::WrappedKey& wrapped) = 0;
  virtual void revoke_app(const std::string& app_id) = 0;
  virtual std::vector<AccessRecord> query_audit(const AuditFilter& filter) = 0;
  // Latency a caller should account for per decrypt round trip.
  virtual double response_latency_ms() = 0;
};

}  // namespace ssiot::kms

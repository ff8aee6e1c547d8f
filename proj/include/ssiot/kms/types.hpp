// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "ssiot/common/tls.hpp"
#include "ssiot/envelope/envelope.hpp"

namespace ssiot::kms {

enum class Decision {
  kGranted,
  kDeniedRevoked,
  kDeniedUnregistered,
  kDeniedBadSignature,
  kDeniedCryptoError,
};

std::string_view to_string(Decision d);
std::optional<Decision> parse_decision(std::string_view s);

enum class RegistrationStatus { kActive, kRevoked };

// Registered material for one app: the public key (signature verification,
// inner-layer identity) and the decryption half of the private key.
struct AppKeyMaterial {
  envelope::PublicKey public_key;
  envelope::PrivateKey private_key;
};

struct AppRegistration {
  std::string app_id;
  AppKeyMaterial key_material;
  std::int64_t registered_at_ms = 0;
  RegistrationStatus status = RegistrationStatus::kActive;
  // Bumped on every (re-)registration of the same app_id.
  std::uint64_t generation = 0;
};

struct RegistrationReceipt {
  std::string app_id;
  std::string kms_id;
  std::int64_t registered_at_ms = 0;
  std::uint64_t generation = 0;
};

struct AccessRecord {
  std::uint64_t seq = 0;
  std::int64_t timestamp_ms = 0;
  std::string app_id;
  std::string request_id;
  Decision decision = Decision::kGranted;
  // Precise failure cause for denials (e.g. "outer-decrypt-failed"); empty on grant.
  std::string cause;
  // SHA-256 of the canonical wrapped-key encoding; the blob itself is not kept.
  std::string blob_digest;

  bool operator==(const AccessRecord&) const = default;
};

struct RevocationEvent {
  std::string app_id;
  std::int64_t at_ms = 0;
  // Audit seq of the last record appended before the revocation took effect.
  std::uint64_t after_seq = 0;
  std::uint64_t generation = 0;
};

struct AuditFilter {
  std::optional<std::string> app_id;
  std::optional<std::int64_t> from_ms;  // inclusive
  std::optional<std::int64_t> to_ms;    // inclusive
  std::optional<Decision> decision;
};

struct DecryptResult {
  Decision decision = Decision::kDeniedCryptoError;
  std::optional<envelope::DataKey> key;  // set iff decision == kGranted
  std::uint64_t seq = 0;
  std::string cause;

  bool granted() const { return decision == Decision::kGranted; }
};

// Simulated one-way response latency of the two measured KMS placements.
inline constexpr double kCloudAdjacentLatencyMs = 206.0;
inline constexpr double kHubLocalLatencyMs = 976.0;

struct KmsConfig {
  std::string listen_address = "127.0.0.1";
  int port = 8443;
  TlsCredentials tls;
  double simulated_response_latency_ms = 0.0;
  // Empty means in-memory only.
  std::string store_path;
  // Used only when the store has no identity yet.
  std::string kms_id;

  // Accepts {"deployment": "cloud"|"hub-local"} as a shorthand for the latency.
  static KmsConfig from_json(const nlohmann::json& j);
};

enum class Errc {
  kDuplicateActiveRegistration,
  kUnknownApp,
  kNotActive,
  kInvalidKeyMaterial,
  kMalformedTimeRange,
  kTransport,
  kProtocol,
  kStore,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

void to_json(nlohmann::json& j, const AccessRecord& r);
void from_json(const nlohmann::json& j, AccessRecord& r);
void to_json(nlohmann::json& j, const RegistrationReceipt& r);
void from_json(const nlohmann::json& j, RegistrationReceipt& r);
void to_json(nlohmann::json& j, const AppKeyMaterial& m);
void from_json(const nlohmann::json& j, AppKeyMaterial& m);

}  // namespace ssiot::kms

// SPDX-License-Identifier: Apache-2.0
#include "ssiot/kms/types.hpp"

#include <array>
#include <utility>

#include "ssiot/envelope/codec.hpp"

namespace ssiot::kms {
namespace {

constexpr std::array<std::pair<Decision, std::string_view>, 5> kDecisionNames{{
    {Decision::kGranted, "Granted"},
    {Decision::kDeniedRevoked, "DeniedRevoked"},
    {Decision::kDeniedUnregistered, "DeniedUnregistered"},
    {Decision::kDeniedBadSignature, "DeniedBadSignature"},
    {Decision::kDeniedCryptoError, "DeniedCryptoError"},
}};

}  // namespace

std::string_view to_string(Decision d) {
  for (const auto& [value, name] : kDecisionNames) {
    if (value == d) return name;
  }
  return "Unknown";
}

std::optional<Decision> parse_decision(std::string_view s) {
  for (const auto& [value, name] : kDecisionNames) {
    if (name == s) return value;
  }
  return std::nullopt;
}

KmsConfig KmsConfig::from_json(const nlohmann::json& j) {
  KmsConfig c;
  c.listen_address = j.value("listen_address", c.listen_address);
  c.port = j.value("port", c.port);
  if (j.contains("tls")) {
    c.tls.cert_file = j["tls"].value("cert_file", "");
    c.tls.key_file = j["tls"].value("key_file", "");
  }
  if (j.contains("deployment")) {
    const auto d = j["deployment"].get<std::string>();
    if (d == "cloud") {
      c.simulated_response_latency_ms = kCloudAdjacentLatencyMs;
    } else if (d == "hub-local") {
      c.simulated_response_latency_ms = kHubLocalLatencyMs;
    } else {
      throw std::invalid_argument("deployment must be 'cloud' or 'hub-local'");
    }
  }
  c.simulated_response_latency_ms =
      j.value("simulated_response_latency_ms", c.simulated_response_latency_ms);
  if (c.simulated_response_latency_ms < 0) {
    throw std::invalid_argument("simulated_response_latency_ms must be >= 0");
  }
  c.store_path = j.value("store_path", "");
  c.kms_id = j.value("kms_id", "");
  return c;
}

void to_json(nlohmann::json& j, const AccessRecord& r) {
  j = {{"seq", r.seq},
       {"timestamp_ms", r.timestamp_ms},
       {"app_id", r.app_id},
       {"request_id", r.request_id},
       {"decision", std::string(to_string(r.decision))},
       {"cause", r.cause},
       {"blob_digest", r.blob_digest}};
}

void from_json(const nlohmann::json& j, AccessRecord& r) {
  r.seq = j.at("seq").get<std::uint64_t>();
  r.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  r.app_id = j.at("app_id").get<std::string>();
  r.request_id = j.at("request_id").get<std::string>();
  auto d = parse_decision(j.at("decision").get<std::string>());
  if (!d) throw Error(Errc::kProtocol, "unknown decision in access record");
  r.decision = *d;
  r.cause = j.value("cause", "");
  r.blob_digest = j.value("blob_digest", "");
}

void to_json(nlohmann::json& j, const RegistrationReceipt& r) {
  j = {{"app_id", r.app_id},
       {"kms_id", r.kms_id},
       {"registered_at_ms", r.registered_at_ms},
       {"generation", r.generation}};
}

void from_json(const nlohmann::json& j, RegistrationReceipt& r) {
  r.app_id = j.at("app_id").get<std::string>();
  r.kms_id = j.at("kms_id").get<std::string>();
  r.registered_at_ms = j.at("registered_at_ms").get<std::int64_t>();
  r.generation = j.at("generation").get<std::uint64_t>();
}

void to_json(nlohmann::json& j, const AppKeyMaterial& m) {
  j = {{"public_key", m.public_key}, {"private_key", m.private_key}};
}

void from_json(const nlohmann::json& j, AppKeyMaterial& m) {
  m.public_key = j.at("public_key").get<envelope::PublicKey>();
  m.private_key = j.at("private_key").get<envelope::PrivateKey>();
}

}  // namespace ssiot::kms

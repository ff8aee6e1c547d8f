// SPDX-License-Identifier: Apache-2.0
#include "ssiot/envelope/codec.hpp"

namespace ssiot::envelope {

Bytes b64_field(const nlohmann::json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_string()) {
    throw Error(Errc::kMalformed, std::string("missing field '") + name + "'");
  }
  try {
    return base64_decode(it->get_ref<const std::string&>());
  } catch (const std::invalid_argument& e) {
    throw Error(Errc::kMalformed, std::string("field '") + name + "': " + e.what());
  }
}

namespace {

std::string string_field(const nlohmann::json& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end() || !it->is_string()) {
    throw Error(Errc::kMalformed, std::string("missing field '") + name + "'");
  }
  return it->get<std::string>();
}

void require_object(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(Errc::kMalformed, "expected a JSON object");
}

nlohmann::json parse(std::string_view text) {
  auto j = nlohmann::json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error(Errc::kMalformed, "invalid JSON");
  return j;
}

}  // namespace

void to_json(nlohmann::json& j, const SealedData& v) {
  j = {{"ciphertext", base64_encode(v.ciphertext)},
       {"nonce", base64_encode(v.nonce)},
       {"auth_tag", base64_encode(v.auth_tag)}};
}

void from_json(const nlohmann::json& j, SealedData& v) {
  require_object(j);
  v.ciphertext = b64_field(j, "ciphertext");
  v.nonce = b64_field(j, "nonce");
  v.auth_tag = b64_field(j, "auth_tag");
}

void to_json(nlohmann::json& j, const WrappedKey& v) {
  j = {{"ciphertext", base64_encode(v.ciphertext)},
       {"signature", base64_encode(v.signature)},
       {"signer_app_id", v.signer_app_id},
       {"kms_id", v.kms_id}};
}

void from_json(const nlohmann::json& j, WrappedKey& v) {
  require_object(j);
  v.ciphertext = b64_field(j, "ciphertext");
  // An absent signature decodes as empty and fails verification downstream.
  v.signature = j.contains("signature") ? b64_field(j, "signature") : Bytes{};
  v.signer_app_id = string_field(j, "signer_app_id");
  v.kms_id = string_field(j, "kms_id");
}

void to_json(nlohmann::json& j, const PublicKey& v) {
  j = {{"encryption", base64_encode(v.encryption)},
       {"verification", base64_encode(v.verification)}};
}

void from_json(const nlohmann::json& j, PublicKey& v) {
  require_object(j);
  v.encryption = b64_field(j, "encryption");
  v.verification = b64_field(j, "verification");
}

void to_json(nlohmann::json& j, const PrivateKey& v) {
  j = {{"decryption", base64_encode(v.decryption)}};
  if (v.can_sign()) j["signing"] = base64_encode(v.signing);
}

void from_json(const nlohmann::json& j, PrivateKey& v) {
  require_object(j);
  v.decryption = b64_field(j, "decryption");
  v.signing = j.contains("signing") ? b64_field(j, "signing") : Bytes{};
}

void to_json(nlohmann::json& j, const KmsIdentity& v) {
  j = {{"kms_id", v.kms_id}, {"public_key", v.public_key}};
}

void from_json(const nlohmann::json& j, KmsIdentity& v) {
  require_object(j);
  v.kms_id = string_field(j, "kms_id");
  if (!j.contains("public_key")) throw Error(Errc::kMalformed, "missing field 'public_key'");
  v.public_key = j.at("public_key").get<PublicKey>();
}

std::string encode(const SealedData& v) { return nlohmann::json(v).dump(); }
std::string encode(const WrappedKey& v) { return nlohmann::json(v).dump(); }

SealedData decode_sealed(std::string_view text) { return parse(text).get<SealedData>(); }
WrappedKey decode_wrapped(std::string_view text) { return parse(text).get<WrappedKey>(); }

}  // namespace ssiot::envelope

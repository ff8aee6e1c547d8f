// SPDX-License-Identifier: Apache-2.0
#include "ssiot/faas/package.hpp"

#include <stdexcept>

#include "ssiot/envelope/codec.hpp"

namespace ssiot::faas {

using nlohmann::json;

void validate(const FunctionPackage& p) {
  if (p.function_id.empty()) throw std::invalid_argument("package function_id is empty");
  if (p.app_id.empty()) throw std::invalid_argument("package app_id is empty");
  if (p.behavior.name.empty()) throw std::invalid_argument("package behavior is empty");
  if (p.kms.kms_id.empty()) throw std::invalid_argument("package kms_id is empty");
  if (!(p.memory_gb >= kMinMemoryGb && p.memory_gb <= kMaxMemoryGb)) {
    throw std::invalid_argument("memory_gb " + std::to_string(p.memory_gb) +
                                " outside [0.128, 3.0]");
  }
  if (p.app_private_key.decryption.empty()) {
    throw std::invalid_argument("package has no app decryption key");
  }
  if (p.app_private_key.can_sign()) {
    throw std::invalid_argument("package must not carry the app signing key");
  }
}

void to_json(json& j, const AppBehavior& v) {
  j = {{"kind", v.kind == AppBehavior::Kind::kProfile ? "profile" : "native"}, {"name", v.name}};
}

void from_json(const json& j, AppBehavior& v) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "profile") {
    v.kind = AppBehavior::Kind::kProfile;
  } else if (kind == "native") {
    v.kind = AppBehavior::Kind::kNative;
  } else {
    throw std::invalid_argument("unknown behavior kind '" + kind + "'");
  }
  v.name = j.at("name").get<std::string>();
}

void to_json(json& j, const FunctionPackage& v) {
  j = {{"function_id", v.function_id},
       {"app_id", v.app_id},
       {"behavior", v.behavior},
       {"kms", {{"kms_id", v.kms.kms_id}, {"url", v.kms.url}}},
       {"app_private_key", v.app_private_key},
       {"memory_gb", v.memory_gb}};
}

void from_json(const json& j, FunctionPackage& v) {
  v.function_id = j.at("function_id").get<std::string>();
  v.app_id = j.at("app_id").get<std::string>();
  v.behavior = j.at("behavior").get<AppBehavior>();
  v.kms.kms_id = j.at("kms").at("kms_id").get<std::string>();
  v.kms.url = j.at("kms").value("url", "");
  v.app_private_key = j.at("app_private_key").get<envelope::PrivateKey>();
  v.memory_gb = j.at("memory_gb").get<double>();
}

void to_json(json& j, const InvocationRequest& v) {
  j = {{"app_id", v.app_id},
       {"request_id", v.request_id},
       {"encrypted_data", v.encrypted_data},
       {"encrypted_key", v.encrypted_key}};
}

void from_json(const json& j, InvocationRequest& v) {
  v.app_id = j.at("app_id").get<std::string>();
  v.request_id = j.at("request_id").get<std::string>();
  v.encrypted_data = j.at("encrypted_data").get<envelope::SealedData>();
  v.encrypted_key = j.at("encrypted_key").get<envelope::WrappedKey>();
}

std::string encode(const FunctionPackage& package) { return json(package).dump(); }

FunctionPackage decode_package(std::string_view text) {
  auto parsed = json::parse(text);
  auto package = parsed.get<FunctionPackage>();
  validate(package);
  return package;
}

std::string package_digest(const FunctionPackage& package) {
  return sha256_hex(to_bytes(encode(package)));
}

std::string encode(const InvocationRequest& request) { return json(request).dump(); }

}  // namespace ssiot::faas

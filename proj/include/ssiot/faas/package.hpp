// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

#include "ssiot/envelope/envelope.hpp"

namespace ssiot::faas {

inline constexpr double kMinMemoryGb = 0.128;
inline constexpr double kMaxMemoryGb = 3.0;

// What the function runs: a synthetic workload profile or a registered
// native function.
struct AppBehavior {
  enum class Kind { kProfile, kNative };
  Kind kind = Kind::kProfile;
  std::string name;

  bool operator==(const AppBehavior&) const = default;
};

struct KmsReference {
  std::string kms_id;
  std::string url;

  bool operator==(const KmsReference&) const = default;
};

struct FunctionPackage {
  std::string function_id;
  std::string app_id;
  AppBehavior behavior;
  KmsReference kms;
  // Decryption half of the app private key; needed to open the inner layer.
  envelope::PrivateKey app_private_key;
  double memory_gb = 3.0;

  bool operator==(const FunctionPackage&) const = default;
};

// Throws std::invalid_argument: empty ids, memory outside
// [kMinMemoryGb, kMaxMemoryGb], or a private key that can still sign.
void validate(const FunctionPackage& package);

// Wire payload of one invocation.
struct InvocationRequest {
  std::string app_id;
  std::string request_id;
  envelope::SealedData encrypted_data;
  envelope::WrappedKey encrypted_key;
};

void to_json(nlohmann::json& j, const AppBehavior& v);
void from_json(const nlohmann::json& j, AppBehavior& v);
void to_json(nlohmann::json& j, const FunctionPackage& v);
void from_json(const nlohmann::json& j, FunctionPackage& v);
void to_json(nlohmann::json& j, const InvocationRequest& v);
void from_json(const nlohmann::json& j, InvocationRequest& v);

// Canonical bytes (sorted keys, compact) and their SHA-256.
std::string encode(const FunctionPackage& package);
FunctionPackage decode_package(std::string_view text);
std::string package_digest(const FunctionPackage& package);
std::string encode(const InvocationRequest& request);

}  // namespace ssiot::faas

// SPDX-License-Identifier: Apache-2.0
#pragma once

// Canonical structured encoding of envelope types. Binary fields are base64,
// keys are emitted in sorted order with no whitespace, so equal values encode
// to identical bytes.

#include <nlohmann/json.hpp>

#include <string>
#include <string_view>

#include "ssiot/envelope/envelope.hpp"

namespace ssiot::envelope {

void to_json(nlohmann::json& j, const SealedData& v);
void from_json(const nlohmann::json& j, SealedData& v);
void to_json(nlohmann::json& j, const WrappedKey& v);
void from_json(const nlohmann::json& j, WrappedKey& v);
void to_json(nlohmann::json& j, const PublicKey& v);
void from_json(const nlohmann::json& j, PublicKey& v);
void to_json(nlohmann::json& j, const PrivateKey& v);
void from_json(const nlohmann::json& j, PrivateKey& v);
void to_json(nlohmann::json& j, const KmsIdentity& v);
void from_json(const nlohmann::json& j, KmsIdentity& v);

std::string encode(const SealedData& v);
std::string encode(const WrappedKey& v);

// Throw Error{kMalformed} on missing fields or bad base64.
SealedData decode_sealed(std::string_view text);
WrappedKey decode_wrapped(std::string_view text);

Bytes b64_field(const nlohmann::json& j, const char* name);

}  // namespace ssiot::envelope

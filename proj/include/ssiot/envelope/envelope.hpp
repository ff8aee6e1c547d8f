// SPDX-License-Identifier: Apache-2.0
#pragma once

// Hybrid envelope encryption between the hub, a function instance and the
// key management service.
//
// Every invocation gets a fresh 256-bit data key K. The hub produces two
// ciphertexts:
//
//   SealedData  = AEAD_K( Enc_app(data) )            data, double layer
//   WrappedKey  = Enc_kms( Enc_app(K) ) + Sig_app     data key, double layer
//
// Enc_app/Enc_kms is an ephemeral-static X25519 + HKDF-SHA256 + AES-256-GCM
// construction, so payloads of any size stay cheap. A logical keypair is two
// sub-keys: X25519 for encryption and Ed25519 for signing.
//
// Results travel back as AEAD_K(result), so only the holder of the
// request's own data key can read them.

#include <array>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "ssiot/common/bytes.hpp"

namespace ssiot::envelope {

inline constexpr std::size_t kDataKeySize = 32;
inline constexpr std::size_t kNonceSize = 12;
inline constexpr std::size_t kTagSize = 16;
inline constexpr std::size_t kDefaultMaxPayload = 5u * 1024u * 1024u;

enum class Errc {
  kAuthenticationFailed,  // outer symmetric layer rejected (wrong K or tampering)
  kOuterDecryptFailed,    // KMS layer of a wrapped key did not open
  kInnerDecryptFailed,    // app layer did not open (wrong app private key)
  kSignatureInvalid,
  kOversizePayload,
  kEntropyFailure,
  kInvalidKey,
  kMalformed,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

struct PublicKey {
  Bytes encryption;    // X25519, 32 bytes
  Bytes verification;  // Ed25519, 32 bytes

  bool operator==(const PublicKey&) const = default;
  // Short stable identifier: first 16 hex chars of SHA-256 over both halves.
  std::string fingerprint() const;
};

struct PrivateKey {
  Bytes decryption;  // X25519 secret
  Bytes signing;     // Ed25519 secret; empty for decryption-only copies

  bool operator==(const PrivateKey&) const = default;
  bool can_sign() const { return !signing.empty(); }
  // Copy without the signing half. Function packages and the KMS only ever
  // need to decrypt.
  PrivateKey decryption_only() const { return {decryption, {}}; }
};

struct AppKeyPair {
  std::string app_id;
  PublicKey public_key;
  PrivateKey private_key;
};

struct KmsKeyPair {
  std::string kms_id;
  PublicKey public_key;
  PrivateKey private_key;
};

// What the hub needs to address a KMS: its identity M and public key K_M.
struct KmsIdentity {
  std::string kms_id;
  PublicKey public_key;

  bool operator==(const KmsIdentity&) const = default;
};

class DataKey {
 public:
  static DataKey generate();
  static DataKey from_bytes(ByteView bytes);

  DataKey(const DataKey&) = default;
  DataKey& operator=(const DataKey&) = default;
  ~DataKey();

  ByteView bytes() const { return key_; }
  std::chrono::system_clock::time_point created_at() const { return created_at_; }

  // Compares key material only.
  bool operator==(const DataKey& other) const { return key_ == other.key_; }

 private:
  DataKey() = default;
  std::array<std::uint8_t, kDataKeySize> key_{};
  std::chrono::system_clock::time_point created_at_{};
};

struct SealedData {
  Bytes ciphertext;
  Bytes nonce;
  Bytes auth_tag;

  bool operator==(const SealedData&) const = default;
};

struct WrappedKey {
  Bytes ciphertext;
  Bytes signature;
  std::string signer_app_id;
  std::string kms_id;

  bool operator==(const WrappedKey&) const = default;
};

AppKeyPair generate_app_keypair(const std::string& app_id);
KmsKeyPair generate_kms_keypair(const std::string& kms_id);
DataKey generate_data_key();

SealedData seal_data(ByteView plaintext, const PublicKey& app_public, const DataKey& key,
                     std::size_t max_payload = kDefaultMaxPayload);
Bytes open_data(const SealedData& sealed, const DataKey& key, const PrivateKey& app_private);

WrappedKey wrap_data_key(const DataKey& key, const AppKeyPair& app, const KmsIdentity& kms);

// Opens both layers and checks the hub signature. Order: outer layer, then
// signature over the inner blob, then inner layer; the first failure wins.
DataKey kms_unwrap(const WrappedKey& wrapped, const PrivateKey& kms_private,
                   const PublicKey& app_public, const PrivateKey& app_private);

SealedData seal_result(ByteView result, const DataKey& key);
Bytes open_result(const SealedData& sealed, const DataKey& key);

// Building blocks, exposed for the KMS and tests.
Bytes sign(ByteView message, const PrivateKey& key);
bool verify(ByteView message, ByteView signature, const PublicKey& key);
Bytes encrypt_to(const PublicKey& recipient, ByteView plaintext, std::string_view context);
Bytes decrypt_with(const PrivateKey& recipient, ByteView ciphertext, std::string_view context);

// True if the two halves belong together (derived publics match).
bool is_valid_pair(const PublicKey& pub, const PrivateKey& priv);

}  // namespace ssiot::envelope

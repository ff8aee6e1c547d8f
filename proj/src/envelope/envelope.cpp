// SPDX-License-Identifier: Apache-2.0
#include "ssiot/envelope/envelope.hpp"

#include <openssl/evp.h>
#include <openssl/kdf.h>

#include <algorithm>
#include <memory>

namespace ssiot::envelope {
namespace {

constexpr std::size_t kX25519Size = 32;
constexpr std::size_t kEd25519Size = 32;
constexpr std::size_t kSignatureSize = 64;

constexpr std::string_view kDataContext = "ssiot/data/v1";
constexpr std::string_view kResultContext = "ssiot/result/v1";
constexpr std::string_view kInnerDataContext = "ssiot/data-inner/v1";
constexpr std::string_view kInnerKeyContext = "ssiot/key-inner/v1";
constexpr std::string_view kOuterKeyContext = "ssiot/key-outer/v1";
constexpr std::string_view kSignatureContext = "ssiot/wrapped-key-signature/v1";

struct PkeyFree {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct PkeyCtxFree {
  void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct CipherCtxFree {
  void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};
struct MdCtxFree {
  void operator()(EVP_MD_CTX* p) const { EVP_MD_CTX_free(p); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyFree>;
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxFree>;
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxFree>;
using MdCtxPtr = std::unique_ptr<EVP_MD_CTX, MdCtxFree>;

[[noreturn]] void fail(Errc code, const std::string& what) { throw Error(code, what); }

PkeyPtr generate_raw(int type) {
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new_id(type, nullptr));
  EVP_PKEY* raw = nullptr;
  if (!ctx || EVP_PKEY_keygen_init(ctx.get()) <= 0 || EVP_PKEY_keygen(ctx.get(), &raw) <= 0) {
    fail(Errc::kEntropyFailure, "key generation failed");
  }
  return PkeyPtr(raw);
}

Bytes raw_public(EVP_PKEY* key) {
  std::size_t len = 0;
  EVP_PKEY_get_raw_public_key(key, nullptr, &len);
  Bytes out(len);
  if (EVP_PKEY_get_raw_public_key(key, out.data(), &len) <= 0) {
    fail(Errc::kInvalidKey, "cannot export public key");
  }
  return out;
}

Bytes raw_private(EVP_PKEY* key) {
  std::size_t len = 0;
  EVP_PKEY_get_raw_private_key(key, nullptr, &len);
  Bytes out(len);
  if (EVP_PKEY_get_raw_private_key(key, out.data(), &len) <= 0) {
    fail(Errc::kInvalidKey, "cannot export private key");
  }
  return out;
}

PkeyPtr load_public(int type, ByteView raw, std::size_t expected) {
  if (raw.size() != expected) fail(Errc::kInvalidKey, "public key has wrong length");
  PkeyPtr key(EVP_PKEY_new_raw_public_key(type, nullptr, raw.data(), raw.size()));
  if (!key) fail(Errc::kInvalidKey, "malformed public key");
  return key;
}

PkeyPtr load_private(int type, ByteView raw, std::size_t expected) {
  if (raw.size() != expected) fail(Errc::kInvalidKey, "private key has wrong length");
  PkeyPtr key(EVP_PKEY_new_raw_private_key(type, nullptr, raw.data(), raw.size()));
  if (!key) fail(Errc::kInvalidKey, "malformed private key");
  return key;
}

Bytes x25519_shared(EVP_PKEY* mine, EVP_PKEY* peer) {
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new(mine, nullptr));
  std::size_t len = 0;
  if (!ctx || EVP_PKEY_derive_init(ctx.get()) <= 0 ||
      EVP_PKEY_derive_set_peer(ctx.get(), peer) <= 0 ||
      EVP_PKEY_derive(ctx.get(), nullptr, &len) <= 0) {
    fail(Errc::kInvalidKey, "key agreement failed");
  }
  Bytes out(len);
  if (EVP_PKEY_derive(ctx.get(), out.data(), &len) <= 0) {
    fail(Errc::kInvalidKey, "key agreement failed");
  }
  return out;
}

Bytes hkdf_sha256(ByteView ikm, ByteView salt, std::string_view info) {
  PkeyCtxPtr ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_HKDF, nullptr));
  Bytes out(kDataKeySize);
  std::size_t len = out.size();
  if (!ctx || EVP_PKEY_derive_init(ctx.get()) <= 0 ||
      EVP_PKEY_CTX_set_hkdf_md(ctx.get(), EVP_sha256()) <= 0 ||
      EVP_PKEY_CTX_set1_hkdf_salt(ctx.get(), salt.data(), static_cast<int>(salt.size())) <= 0 ||
      EVP_PKEY_CTX_set1_hkdf_key(ctx.get(), ikm.data(), static_cast<int>(ikm.size())) <= 0 ||
      EVP_PKEY_CTX_add1_hkdf_info(ctx.get(), reinterpret_cast<const unsigned char*>(info.data()),
                                  static_cast<int>(info.size())) <= 0 ||
      EVP_PKEY_derive(ctx.get(), out.data(), &len) <= 0) {
    fail(Errc::kInvalidKey, "key derivation failed");
  }
  return out;
}

struct GcmOutput {
  Bytes ciphertext;
  Bytes nonce;
  Bytes tag;
};

GcmOutput gcm_encrypt(ByteView key, ByteView plaintext, std::string_view aad) {
  GcmOutput out;
  out.nonce = secure_random(kNonceSize);
  out.ciphertext.resize(plaintext.size());
  out.tag.resize(kTagSize);
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  int len = 0;
  if (!ctx || EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(),
                                 out.nonce.data()) != 1 ||
      EVP_EncryptUpdate(ctx.get(), nullptr, &len,
                        reinterpret_cast<const unsigned char*>(aad.data()),
                        static_cast<int>(aad.size())) != 1) {
    fail(Errc::kInvalidKey, "cipher init failed");
  }
  if (!plaintext.empty() &&
      EVP_EncryptUpdate(ctx.get(), out.ciphertext.data(), &len, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1) {
    fail(Errc::kInvalidKey, "encryption failed");
  }
  if (EVP_EncryptFinal_ex(ctx.get(), out.ciphertext.data() + plaintext.size(), &len) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, static_cast<int>(kTagSize),
                          out.tag.data()) != 1) {
    fail(Errc::kInvalidKey, "encryption failed");
  }
  return out;
}

// Returns false on any authentication failure; never yields partial output.
bool gcm_decrypt(ByteView key, ByteView nonce, ByteView ciphertext, ByteView tag,
                 std::string_view aad, Bytes& plaintext) {
  if (key.size() != kDataKeySize || nonce.size() != kNonceSize || tag.size() != kTagSize) {
    return false;
  }
  Bytes out(ciphertext.size());
  Bytes tag_copy(tag.begin(), tag.end());
  CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
  int len = 0;
  if (!ctx ||
      EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.data(), nonce.data()) != 1 ||
      EVP_DecryptUpdate(ctx.get(), nullptr, &len,
                        reinterpret_cast<const unsigned char*>(aad.data()),
                        static_cast<int>(aad.size())) != 1) {
    return false;
  }
  if (!ciphertext.empty() && EVP_DecryptUpdate(ctx.get(), out.data(), &len, ciphertext.data(),
                                               static_cast<int>(ciphertext.size())) != 1) {
    return false;
  }
  if (EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, static_cast<int>(kTagSize),
                          tag_copy.data()) != 1 ||
      EVP_DecryptFinal_ex(ctx.get(), out.data() + ciphertext.size(), &len) != 1) {
    secure_wipe(out);
    return false;
  }
  plaintext = std::move(out);
  return true;
}

Bytes concat_salt(ByteView a, ByteView b) {
  Bytes salt(a.begin(), a.end());
  salt.insert(salt.end(), b.begin(), b.end());
  return salt;
}

Bytes signature_message(const WrappedKey& wrapped, ByteView inner) {
  Bytes msg = to_bytes(kSignatureContext);
  msg.push_back(0);
  msg.insert(msg.end(), wrapped.signer_app_id.begin(), wrapped.signer_app_id.end());
  msg.push_back(0);
  msg.insert(msg.end(), wrapped.kms_id.begin(), wrapped.kms_id.end());
  msg.push_back(0);
  msg.insert(msg.end(), inner.begin(), inner.end());
  return msg;
}

template <class Pair>
Pair generate_pair(std::string id) {
  auto enc = generate_raw(EVP_PKEY_X25519);
  auto sig = generate_raw(EVP_PKEY_ED25519);
  Pair pair;
  if constexpr (std::is_same_v<Pair, AppKeyPair>) {
    pair.app_id = std::move(id);
  } else {
    pair.kms_id = std::move(id);
  }
  pair.public_key = {raw_public(enc.get()), raw_public(sig.get())};
  pair.private_key = {raw_private(enc.get()), raw_private(sig.get())};
  return pair;
}

}  // namespace

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kAuthenticationFailed: return "authentication-failed";
    case Errc::kOuterDecryptFailed: return "outer-decrypt-failed";
    case Errc::kInnerDecryptFailed: return "inner-decrypt-failed";
    case Errc::kSignatureInvalid: return "signature-invalid";
    case Errc::kOversizePayload: return "oversize-payload";
    case Errc::kEntropyFailure: return "entropy-failure";
    case Errc::kInvalidKey: return "invalid-key";
    case Errc::kMalformed: return "malformed";
  }
  return "unknown";
}

std::string PublicKey::fingerprint() const {
  Bytes both = encryption;
  both.insert(both.end(), verification.begin(), verification.end());
  return sha256_hex(both).substr(0, 16);
}

DataKey DataKey::generate() {
  DataKey key;
  try {
    secure_random(key.key_);
  } catch (const std::runtime_error& e) {
    throw Error(Errc::kEntropyFailure, e.what());
  }
  key.created_at_ = std::chrono::system_clock::now();
  return key;
}

DataKey DataKey::from_bytes(ByteView bytes) {
  if (bytes.size() != kDataKeySize) fail(Errc::kInvalidKey, "data key must be 32 bytes");
  DataKey key;
  std::copy(bytes.begin(), bytes.end(), key.key_.begin());
  key.created_at_ = std::chrono::system_clock::now();
  return key;
}

DataKey::~DataKey() { secure_wipe(key_); }

AppKeyPair generate_app_keypair(const std::string& app_id) {
  if (app_id.empty()) throw std::invalid_argument("app_id must be nonempty");
  return generate_pair<AppKeyPair>(app_id);
}

KmsKeyPair generate_kms_keypair(const std::string& kms_id) {
  if (kms_id.empty()) throw std::invalid_argument("kms_id must be nonempty");
  return generate_pair<KmsKeyPair>(kms_id);
}

DataKey generate_data_key() { return DataKey::generate(); }

Bytes encrypt_to(const PublicKey& recipient, ByteView plaintext, std::string_view context) {
  auto peer = load_public(EVP_PKEY_X25519, recipient.encryption, kX25519Size);
  auto ephemeral = generate_raw(EVP_PKEY_X25519);
  Bytes eph_pub = raw_public(ephemeral.get());
  Bytes shared = x25519_shared(ephemeral.get(), peer.get());
  Bytes key = hkdf_sha256(shared, concat_salt(eph_pub, recipient.encryption), context);
  auto sealed = gcm_encrypt(key, plaintext, context);
  secure_wipe(shared);
  secure_wipe(key);

  // ephemeral public | nonce | tag | ciphertext
  Bytes out;
  out.reserve(kX25519Size + kNonceSize + kTagSize + sealed.ciphertext.size());
  out.insert(out.end(), eph_pub.begin(), eph_pub.end());
  out.insert(out.end(), sealed.nonce.begin(), sealed.nonce.end());
  out.insert(out.end(), sealed.tag.begin(), sealed.tag.end());
  out.insert(out.end(), sealed.ciphertext.begin(), sealed.ciphertext.end());
  return out;
}

Bytes decrypt_with(const PrivateKey& recipient, ByteView ciphertext, std::string_view context) {
  constexpr std::size_t kHeader = kX25519Size + kNonceSize + kTagSize;
  if (ciphertext.size() < kHeader) fail(Errc::kMalformed, "ciphertext too short");
  auto mine = load_private(EVP_PKEY_X25519, recipient.decryption, kX25519Size);
  ByteView eph_pub = ciphertext.subspan(0, kX25519Size);
  ByteView nonce = ciphertext.subspan(kX25519Size, kNonceSize);
  ByteView tag = ciphertext.subspan(kX25519Size + kNonceSize, kTagSize);
  ByteView body = ciphertext.subspan(kHeader);

  PkeyPtr peer(EVP_PKEY_new_raw_public_key(EVP_PKEY_X25519, nullptr, eph_pub.data(),
                                           eph_pub.size()));
  if (!peer) fail(Errc::kAuthenticationFailed, "malformed ephemeral key");
  Bytes shared = x25519_shared(mine.get(), peer.get());
  Bytes recipient_pub = raw_public(mine.get());
  Bytes key = hkdf_sha256(shared, concat_salt(eph_pub, recipient_pub), context);
  Bytes plaintext;
  const bool ok = gcm_decrypt(key, nonce, body, tag, context, plaintext);
  secure_wipe(shared);
  secure_wipe(key);
  if (!ok) fail(Errc::kAuthenticationFailed, "asymmetric layer failed to authenticate");
  return plaintext;
}

Bytes sign(ByteView message, const PrivateKey& key) {
  if (!key.can_sign()) fail(Errc::kInvalidKey, "key has no signing half");
  auto pkey = load_private(EVP_PKEY_ED25519, key.signing, kEd25519Size);
  MdCtxPtr ctx(EVP_MD_CTX_new());
  Bytes sig(kSignatureSize);
  std::size_t len = sig.size();
  if (!ctx || EVP_DigestSignInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1 ||
      EVP_DigestSign(ctx.get(), sig.data(), &len, message.data(), message.size()) != 1) {
    fail(Errc::kInvalidKey, "signing failed");
  }
  sig.resize(len);
  return sig;
}

bool verify(ByteView message, ByteView signature, const PublicKey& key) {
  if (signature.size() != kSignatureSize || key.verification.size() != kEd25519Size) return false;
  PkeyPtr pkey(EVP_PKEY_new_raw_public_key(EVP_PKEY_ED25519, nullptr, key.verification.data(),
                                           key.verification.size()));
  if (!pkey) return false;
  MdCtxPtr ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestVerifyInit(ctx.get(), nullptr, nullptr, nullptr, pkey.get()) != 1) {
    return false;
  }
  return EVP_DigestVerify(ctx.get(), signature.data(), signature.size(), message.data(),
                          message.size()) == 1;
}

bool is_valid_pair(const PublicKey& pub, const PrivateKey& priv) {
  try {
    auto enc = load_private(EVP_PKEY_X25519, priv.decryption, kX25519Size);
    if (raw_public(enc.get()) != pub.encryption) return false;
    if (priv.can_sign()) {
      auto sig = load_private(EVP_PKEY_ED25519, priv.signing, kEd25519Size);
      if (raw_public(sig.get()) != pub.verification) return false;
    }
    return true;
  } catch (const Error&) {
    return false;
  }
}

SealedData seal_data(ByteView plaintext, const PublicKey& app_public, const DataKey& key,
                     std::size_t max_payload) {
  if (plaintext.size() > max_payload) {
    fail(Errc::kOversizePayload, "payload of " + std::to_string(plaintext.size()) +
                                     " bytes exceeds limit of " + std::to_string(max_payload));
  }
  Bytes inner = encrypt_to(app_public, plaintext, kInnerDataContext);
  auto outer = gcm_encrypt(key.bytes(), inner, kDataContext);
  return {std::move(outer.ciphertext), std::move(outer.nonce), std::move(outer.tag)};
}

Bytes open_data(const SealedData& sealed, const DataKey& key, const PrivateKey& app_private) {
  Bytes inner;
  if (!gcm_decrypt(key.bytes(), sealed.nonce, sealed.ciphertext, sealed.auth_tag, kDataContext,
                   inner)) {
    fail(Errc::kAuthenticationFailed, "sealed data failed to authenticate under data key");
  }
  try {
    return decrypt_with(app_private, inner, kInnerDataContext);
  } catch (const Error& e) {
    fail(Errc::kInnerDecryptFailed, std::string("app layer: ") + e.what());
  }
}

WrappedKey wrap_data_key(const DataKey& key, const AppKeyPair& app, const KmsIdentity& kms) {
  WrappedKey wrapped;
  wrapped.signer_app_id = app.app_id;
  wrapped.kms_id = kms.kms_id;
  Bytes inner = encrypt_to(app.public_key, key.bytes(), kInnerKeyContext);
  wrapped.signature = sign(signature_message(wrapped, inner), app.private_key);
  wrapped.ciphertext = encrypt_to(kms.public_key, inner, kOuterKeyContext);
  return wrapped;
}

DataKey kms_unwrap(const WrappedKey& wrapped, const PrivateKey& kms_private,
                   const PublicKey& app_public, const PrivateKey& app_private) {
  Bytes inner;
  try {
    inner = decrypt_with(kms_private, wrapped.ciphertext, kOuterKeyContext);
  } catch (const Error& e) {
    fail(Errc::kOuterDecryptFailed, std::string("kms layer: ") + e.what());
  }
  if (!verify(signature_message(wrapped, inner), wrapped.signature, app_public)) {
    fail(Errc::kSignatureInvalid, "hub signature does not verify for " + wrapped.signer_app_id);
  }
  Bytes raw;
  try {
    raw = decrypt_with(app_private, inner, kInnerKeyContext);
  } catch (const Error& e) {
    fail(Errc::kInnerDecryptFailed, std::string("app layer: ") + e.what());
  }
  if (raw.size() != kDataKeySize) fail(Errc::kInnerDecryptFailed, "data key has wrong length");
  DataKey key = DataKey::from_bytes(raw);
  secure_wipe(raw);
  return key;
}

SealedData seal_result(ByteView result, const DataKey& key) {
  auto out = gcm_encrypt(key.bytes(), result, kResultContext);
  return {std::move(out.ciphertext), std::move(out.nonce), std::move(out.tag)};
}

Bytes open_result(const SealedData& sealed, const DataKey& key) {
  Bytes plaintext;
  if (!gcm_decrypt(key.bytes(), sealed.nonce, sealed.ciphertext, sealed.auth_tag, kResultContext,
                   plaintext)) {
    fail(Errc::kAuthenticationFailed, "result failed to authenticate under data key");
  }
  return plaintext;
}

}  // namespace ssiot::envelope

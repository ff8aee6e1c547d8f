// SPDX-License-Identifier: Apache-2.0
#pragma once

// HTTPS REST surface of the KMS (TLS 1.2 minimum).
//
//   GET  /v1/public-key
//   POST /v1/apps                 {app_id, key_material}
//   POST /v1/decrypt              {app_id, request_id, wrapped_key}
//   POST /v1/apps/{id}/revoke
//   GET  /v1/audit?app_id=&decision=&from=&to=

#include <chrono>
#include <memory>
#include <mutex>
#include <string>

#include "ssiot/kms/endpoint.hpp"
#include "ssiot/kms/service.hpp"

namespace ssiot::kms {

class KmsHttpServer {
 public:
  // Uses config.tls when set, otherwise an ephemeral self-signed certificate.
  KmsHttpServer(KeyManagementService& kms, KmsConfig config);
  ~KmsHttpServer();
  KmsHttpServer(const KmsHttpServer&) = delete;
  KmsHttpServer& operator=(const KmsHttpServer&) = delete;

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start();
  // Binds and serves on the calling thread until stop().
  void listen();
  void stop();

  int port() const { return port_; }
  std::string url() const;
  // PEM of the served certificate, for clients pinning it as their CA.
  const std::string& certificate_pem() const { return cert_pem_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  KmsConfig config_;
  std::string cert_pem_;
  int port_ = 0;
};

struct KmsClientOptions {
  // CA bundle used to verify the server. Empty disables verification, which
  // is only meant for desk setups with self-signed certificates.
  std::string ca_file;
  std::chrono::milliseconds timeout{10000};
};

class KmsHttpClient final : public KmsEndpoint {
 public:
  explicit KmsHttpClient(std::string base_url, KmsClientOptions options = {});
  ~KmsHttpClient() override;

  envelope::KmsIdentity get_public_key() override;
  RegistrationReceipt register_app(const std::string& app_id,
                                   const AppKeyMaterial& material) override;
  DecryptResult decrypt_data_key(const std::string& app_id, const std::string& request_id,
                                 const envelope::WrappedKey& wrapped) override;
  void revoke_app(const std::string& app_id) override;
  std::vector<AccessRecord> query_audit(const AuditFilter& filter) override;
  double response_latency_ms() override;

  const std::string& url() const { return base_url_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string base_url_;
  std::mutex mu_;
  std::optional<double> latency_ms_;
};

}  // namespace ssiot::kms

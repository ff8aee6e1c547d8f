// SPDX-License-Identifier: Apache-2.0
#pragma once

// Local HTTP surface of the emulator.
//
//   POST   /v1/functions                  package JSON -> {function_id}
//   DELETE /v1/functions/{id}
//   POST   /v1/functions/{id}/invoke      {app_id, request_id, encrypted_data, encrypted_key}
//   POST   /v1/functions/{id}/keep-alive
//   GET    /v1/clock                      {now_ms}
//
// Invocations take the virtual time from the X-Ssiot-Virtual-Time-Ms header
// when present, otherwise the service clock.

#include <memory>
#include <mutex>
#include <string>

#include "ssiot/faas/service.hpp"

namespace ssiot::faas {

inline constexpr const char* kVirtualTimeHeader = "X-Ssiot-Virtual-Time-Ms";

class FaasHttpServer {
 public:
  FaasHttpServer(FaasService& service, std::string host = "127.0.0.1", int port = 0);
  ~FaasHttpServer();
  FaasHttpServer(const FaasHttpServer&) = delete;
  FaasHttpServer& operator=(const FaasHttpServer&) = delete;

  int start();
  void listen();
  void stop();
  std::string url() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::string host_;
  int port_;
};

class FaasHttpClient final : public FaasEndpoint {
 public:
  explicit FaasHttpClient(std::string base_url);
  ~FaasHttpClient() override;

  std::string deploy(const FunctionPackage& package) override;
  void remove(const std::string& function_id) override;
  InvocationRecord invoke(const std::string& function_id, const InvocationRequest& request,
                          SimTime now) override;
  InvocationRecord keep_alive(const std::string& function_id, SimTime now) override;
  // Current service time; virtual services report the latest time seen.
  SimTime now();

  // Bytes of every request body this client sent, for egress inspection.
  std::vector<std::string> sent_bodies() const;
  void record_egress(bool on) { record_ = on; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  mutable std::mutex mu_;
  bool record_ = false;
  std::vector<std::string> sent_;
};

}  // namespace ssiot::faas

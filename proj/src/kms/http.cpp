// SPDX-License-Identifier: Apache-2.0
#include "ssiot/kms/http.hpp"

#include <httplib.h>
#include <openssl/pem.h>
#include <openssl/ssl.h>

#include <fstream>
#include <thread>

#include "ssiot/common/tls.hpp"
#include "ssiot/envelope/codec.hpp"

namespace ssiot::kms {
namespace {

using nlohmann::json;

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, std::string_view code,
                 const std::string& message) {
  reply(res, status, {{"error", code}, {"message", message}});
}

std::string_view errc_name(Errc e) {
  switch (e) {
    case Errc::kDuplicateActiveRegistration: return "duplicate-active-registration";
    case Errc::kUnknownApp: return "unknown-app";
    case Errc::kNotActive: return "not-active";
    case Errc::kInvalidKeyMaterial: return "invalid-key-material";
    case Errc::kMalformedTimeRange: return "malformed-time-range";
    case Errc::kTransport: return "transport";
    case Errc::kProtocol: return "protocol";
    case Errc::kStore: return "store";
  }
  return "unknown";
}

int errc_status(Errc e) {
  switch (e) {
    case Errc::kDuplicateActiveRegistration:
    case Errc::kNotActive: return 409;
    case Errc::kUnknownApp: return 404;
    case Errc::kInvalidKeyMaterial:
    case Errc::kMalformedTimeRange:
    case Errc::kProtocol: return 400;
    default: return 500;
  }
}

Errc errc_from_name(std::string_view name) {
  for (Errc e : {Errc::kDuplicateActiveRegistration, Errc::kUnknownApp, Errc::kNotActive,
                 Errc::kInvalidKeyMaterial, Errc::kMalformedTimeRange, Errc::kTransport,
                 Errc::kStore}) {
    if (errc_name(e) == name) return e;
  }
  return Errc::kProtocol;
}

std::optional<std::int64_t> parse_ms(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::size_t used = 0;
  const long long v = std::stoll(s, &used);
  if (used != s.size()) throw std::invalid_argument("not an integer");
  return v;
}

// Runs `fn` and turns known failures into JSON error responses.
template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    reply_error(res, errc_status(e.code()), errc_name(e.code()), e.what());
  } catch (const envelope::Error& e) {
    reply_error(res, 400, envelope::to_string(e.code()), e.what());
  } catch (const json::exception& e) {
    reply_error(res, 400, "malformed-request", e.what());
  } catch (const std::invalid_argument& e) {
    reply_error(res, 400, "malformed-request", e.what());
  }
}

struct X509Free {
  void operator()(X509* p) const { X509_free(p); }
};
struct PkeyFree {
  void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct BioFree {
  void operator()(BIO* p) const { BIO_free(p); }
};

bool configure_tls(SSL_CTX& ctx, const std::string& cert_pem, const std::string& key_pem) {
  SSL_CTX_set_options(&ctx, SSL_OP_NO_COMPRESSION | SSL_OP_NO_SESSION_RESUMPTION_ON_RENEGOTIATION);
  SSL_CTX_set_min_proto_version(&ctx, TLS1_2_VERSION);
  std::unique_ptr<BIO, BioFree> cbio(BIO_new_mem_buf(cert_pem.data(), static_cast<int>(cert_pem.size())));
  std::unique_ptr<BIO, BioFree> kbio(BIO_new_mem_buf(key_pem.data(), static_cast<int>(key_pem.size())));
  std::unique_ptr<X509, X509Free> cert(PEM_read_bio_X509(cbio.get(), nullptr, nullptr, nullptr));
  std::unique_ptr<EVP_PKEY, PkeyFree> key(
      PEM_read_bio_PrivateKey(kbio.get(), nullptr, nullptr, nullptr));
  return cert && key && SSL_CTX_use_certificate(&ctx, cert.get()) == 1 &&
         SSL_CTX_use_PrivateKey(&ctx, key.get()) == 1;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kStore, "cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

struct KmsHttpServer::Impl {
  std::unique_ptr<httplib::SSLServer> server;
  std::thread thread;
};

KmsHttpServer::KmsHttpServer(KeyManagementService& kms, KmsConfig config)
    : impl_(std::make_unique<Impl>()), config_(std::move(config)) {
  std::string key_pem;
  if (config_.tls.empty()) {
    auto pair = generate_self_signed(config_.listen_address);
    cert_pem_ = std::move(pair.cert_pem);
    key_pem = std::move(pair.key_pem);
  } else {
    cert_pem_ = read_text(config_.tls.cert_file);
    key_pem = read_text(config_.tls.key_file);
  }
  impl_->server = std::make_unique<httplib::SSLServer>(
      [&](SSL_CTX& ctx) { return configure_tls(ctx, cert_pem_, key_pem); });
  secure_wipe(std::span(reinterpret_cast<std::uint8_t*>(key_pem.data()), key_pem.size()));
  if (!impl_->server->is_valid()) throw Error(Errc::kTransport, "TLS server setup failed");

  auto& srv = *impl_->server;
  const double latency = config_.simulated_response_latency_ms;

  srv.Get("/v1/public-key", [&kms](const httplib::Request&, httplib::Response& res) {
    auto id = kms.get_public_key();
    reply(res, 200, {{"kms_id", id.kms_id},
                     {"public_key", id.public_key},
                     {"simulated_response_latency_ms", kms.response_latency_ms()}});
  });

  srv.Post("/v1/apps", [&kms](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = json::parse(req.body);
      auto receipt = kms.register_app(body.at("app_id").get<std::string>(),
                                      body.at("key_material").get<AppKeyMaterial>());
      reply(res, 201, receipt);
    });
  });

  srv.Post("/v1/decrypt", [&kms, latency](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto body = json::parse(req.body);
      auto app_id = body.at("app_id").get<std::string>();
      auto request_id = body.at("request_id").get<std::string>();
      auto wrapped = body.at("wrapped_key").get<envelope::WrappedKey>();
      auto result = kms.decrypt_data_key(app_id, request_id, wrapped);
      if (latency > 0) {
        std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(latency));
      }
      json out{{"decision", to_string(result.decision)}, {"seq", result.seq}};
      if (result.granted()) {
        out["data_key"] = base64_encode(result.key->bytes());
        reply(res, 200, out);
      } else {
        out["cause"] = result.cause;
        reply(res, 403, out);
      }
    });
  });

  srv.Post(R"(/v1/apps/([^/]+)/revoke)",
           [&kms](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               const std::string app_id = req.matches[1];
               kms.revoke_app(app_id);
               reply(res, 200, {{"app_id", app_id}, {"status", "Revoked"}});
             });
           });

  srv.Get("/v1/audit", [&kms](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      AuditFilter f;
      if (auto v = req.get_param_value("app_id"); !v.empty()) f.app_id = v;
      if (auto v = req.get_param_value("decision"); !v.empty()) {
        f.decision = parse_decision(v);
        if (!f.decision) throw std::invalid_argument("unknown decision '" + v + "'");
      }
      try {
        f.from_ms = parse_ms(req.get_param_value("from"));
        f.to_ms = parse_ms(req.get_param_value("to"));
      } catch (const std::exception&) {
        throw Error(Errc::kMalformedTimeRange, "from/to must be integer milliseconds");
      }
      reply(res, 200, {{"records", kms.query_audit(f)}});
    });
  });
}

KmsHttpServer::~KmsHttpServer() { stop(); }

int KmsHttpServer::start() {
  auto& srv = *impl_->server;
  port_ = config_.port == 0 ? srv.bind_to_any_port(config_.listen_address)
                            : (srv.bind_to_port(config_.listen_address, config_.port)
                                   ? config_.port
                                   : -1);
  if (port_ < 0) throw Error(Errc::kTransport, "cannot bind KMS listener");
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return port_;
}

void KmsHttpServer::listen() {
  port_ = config_.port;
  if (!impl_->server->listen(config_.listen_address, config_.port)) {
    throw Error(Errc::kTransport, "cannot listen on " + url());
  }
}

void KmsHttpServer::stop() {
  if (impl_ && impl_->server) impl_->server->stop();
  if (impl_ && impl_->thread.joinable()) impl_->thread.join();
}

std::string KmsHttpServer::url() const {
  return "https://" + config_.listen_address + ":" + std::to_string(port_);
}

struct KmsHttpClient::Impl {
  explicit Impl(const std::string& url) : client(url) {}
  httplib::Client client;
};

KmsHttpClient::KmsHttpClient(std::string base_url, KmsClientOptions options)
    : impl_(std::make_unique<Impl>(base_url)), base_url_(std::move(base_url)) {
  auto& c = impl_->client;
  if (!c.is_valid()) throw Error(Errc::kTransport, "invalid KMS url " + base_url_);
  c.set_connection_timeout(options.timeout);
  c.set_read_timeout(options.timeout);
  if (options.ca_file.empty()) {
    c.enable_server_certificate_verification(false);
  } else {
    c.set_ca_cert_path(options.ca_file);
    c.enable_server_certificate_verification(true);
  }
}

KmsHttpClient::~KmsHttpClient() = default;

namespace {

json expect_json(const httplib::Result& r, const std::string& what) {
  if (!r) throw Error(Errc::kTransport, what + ": " + httplib::to_string(r.error()));
  auto body = json::parse(r->body, nullptr, false);
  if (body.is_discarded()) throw Error(Errc::kProtocol, what + ": non-JSON response");
  return body;
}

[[noreturn]] void raise_remote(const json& body, int status, const std::string& what) {
  throw Error(errc_from_name(body.value("error", "")),
              what + " (HTTP " + std::to_string(status) + "): " + body.value("message", ""));
}

}  // namespace

envelope::KmsIdentity KmsHttpClient::get_public_key() {
  std::lock_guard lock(mu_);
  auto body = expect_json(impl_->client.Get("/v1/public-key"), "get public key");
  latency_ms_ = body.value("simulated_response_latency_ms", 0.0);
  return body.get<envelope::KmsIdentity>();
}

RegistrationReceipt KmsHttpClient::register_app(const std::string& app_id,
                                                const AppKeyMaterial& material) {
  std::lock_guard lock(mu_);
  json req{{"app_id", app_id}, {"key_material", material}};
  auto r = impl_->client.Post("/v1/apps", req.dump(), "application/json");
  auto body = expect_json(r, "register app");
  if (r->status != 201) raise_remote(body, r->status, "register app");
  return body.get<RegistrationReceipt>();
}

DecryptResult KmsHttpClient::decrypt_data_key(const std::string& app_id,
                                              const std::string& request_id,
                                              const envelope::WrappedKey& wrapped) {
  std::lock_guard lock(mu_);
  json req{{"app_id", app_id}, {"request_id", request_id}, {"wrapped_key", wrapped}};
  auto r = impl_->client.Post("/v1/decrypt", req.dump(), "application/json");
  auto body = expect_json(r, "decrypt");
  if (r->status != 200 && r->status != 403) raise_remote(body, r->status, "decrypt");
  DecryptResult out;
  auto d = parse_decision(body.value("decision", ""));
  if (!d) throw Error(Errc::kProtocol, "decrypt: missing decision");
  out.decision = *d;
  out.seq = body.value("seq", std::uint64_t{0});
  out.cause = body.value("cause", "");
  if (out.granted()) out.key = envelope::DataKey::from_bytes(envelope::b64_field(body, "data_key"));
  return out;
}

void KmsHttpClient::revoke_app(const std::string& app_id) {
  std::lock_guard lock(mu_);
  auto r = impl_->client.Post("/v1/apps/" + app_id + "/revoke");
  auto body = expect_json(r, "revoke");
  if (r->status != 200) raise_remote(body, r->status, "revoke");
}

std::vector<AccessRecord> KmsHttpClient::query_audit(const AuditFilter& filter) {
  httplib::Params params;
  if (filter.app_id) params.emplace("app_id", *filter.app_id);
  if (filter.decision) params.emplace("decision", std::string(to_string(*filter.decision)));
  if (filter.from_ms) params.emplace("from", std::to_string(*filter.from_ms));
  if (filter.to_ms) params.emplace("to", std::to_string(*filter.to_ms));
  std::lock_guard lock(mu_);
  auto r = impl_->client.Get("/v1/audit", params, httplib::Headers{});
  auto body = expect_json(r, "audit");
  if (r->status != 200) raise_remote(body, r->status, "audit");
  return body.at("records").get<std::vector<AccessRecord>>();
}

double KmsHttpClient::response_latency_ms() {
  if (!latency_ms_) get_public_key();
  return *latency_ms_;
}

}  // namespace ssiot::kms

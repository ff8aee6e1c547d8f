// SPDX-License-Identifier: Apache-2.0
#include "ssiot/faas/http.hpp"

#include <httplib.h>

namespace ssiot::faas {
namespace {

using nlohmann::json;

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::string_view code_name(Error::Code c) {
  switch (c) {
    case Error::Code::kDuplicateFunction: return "duplicate-function";
    case Error::Code::kUnknownFunction: return "unknown-function";
    case Error::Code::kInvalidPackage: return "invalid-package";
    case Error::Code::kUnknownBehavior: return "unknown-behavior";
    case Error::Code::kTransport: return "transport";
  }
  return "transport";
}

int code_status(Error::Code c) {
  switch (c) {
    case Error::Code::kDuplicateFunction: return 409;
    case Error::Code::kUnknownFunction: return 404;
    case Error::Code::kInvalidPackage:
    case Error::Code::kUnknownBehavior: return 400;
    case Error::Code::kTransport: return 502;
  }
  return 500;
}

Error::Code code_from(std::string_view name) {
  for (auto c : {Error::Code::kDuplicateFunction, Error::Code::kUnknownFunction,
                 Error::Code::kInvalidPackage, Error::Code::kUnknownBehavior}) {
    if (code_name(c) == name) return c;
  }
  return Error::Code::kTransport;
}

template <class Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    reply(res, code_status(e.code()), {{"error", code_name(e.code())}, {"message", e.what()}});
  } catch (const std::exception& e) {
    reply(res, 400, {{"error", "malformed-request"}, {"message", e.what()}});
  }
}

std::optional<SimTime> requested_time(const httplib::Request& req) {
  if (!req.has_header(kVirtualTimeHeader)) return std::nullopt;
  return at_ms(std::stod(req.get_header_value(kVirtualTimeHeader)));
}

}  // namespace

struct FaasHttpServer::Impl {
  httplib::Server server;
  std::thread thread;
};

FaasHttpServer::FaasHttpServer(FaasService& service, std::string host, int port)
    : impl_(std::make_unique<Impl>()), host_(std::move(host)), port_(port) {
  auto& srv = impl_->server;
  srv.Post("/v1/functions", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      auto id = service.deploy(decode_package(req.body));
      reply(res, 201, {{"function_id", id}});
    });
  });
  srv.Delete(R"(/v1/functions/([^/]+))",
             [&service](const httplib::Request& req, httplib::Response& res) {
               guarded(res, [&] {
                 service.remove(req.matches[1]);
                 reply(res, 200, {{"function_id", req.matches[1]}, {"removed", true}});
               });
             });
  srv.Post(R"(/v1/functions/([^/]+)/invoke)",
           [&service](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               auto request = json::parse(req.body).get<InvocationRequest>();
               auto when = requested_time(req).value_or(service.now());
               reply(res, 200, service.invoke(req.matches[1], request, when));
             });
           });
  srv.Post(R"(/v1/functions/([^/]+)/keep-alive)",
           [&service](const httplib::Request& req, httplib::Response& res) {
             guarded(res, [&] {
               auto when = requested_time(req).value_or(service.now());
               reply(res, 200, service.keep_alive(req.matches[1], when));
             });
           });
  srv.Get("/v1/clock", [&service](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, {{"now_ms", to_ms(service.now())}}); });
  });
}

FaasHttpServer::~FaasHttpServer() { stop(); }

int FaasHttpServer::start() {
  auto& srv = impl_->server;
  port_ = port_ == 0 ? srv.bind_to_any_port(host_)
                     : (srv.bind_to_port(host_, port_) ? port_ : -1);
  if (port_ < 0) throw Error(Error::Code::kTransport, "cannot bind FaaS listener");
  impl_->thread = std::thread([&srv] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  return port_;
}

void FaasHttpServer::listen() {
  if (!impl_->server.listen(host_, port_)) {
    throw Error(Error::Code::kTransport, "cannot listen on " + url());
  }
}

void FaasHttpServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

std::string FaasHttpServer::url() const { return "http://" + host_ + ":" + std::to_string(port_); }

struct FaasHttpClient::Impl {
  explicit Impl(const std::string& url) : client(url) {
    client.set_read_timeout(std::chrono::minutes(5));
  }
  httplib::Client client;
};

FaasHttpClient::FaasHttpClient(std::string base_url)
    : impl_(std::make_unique<Impl>(base_url)) {
  if (!impl_->client.is_valid()) throw Error(Error::Code::kTransport, "invalid url " + base_url);
}

FaasHttpClient::~FaasHttpClient() = default;

namespace {

json checked(const httplib::Result& r, int expected, const std::string& what) {
  if (!r) throw Error(Error::Code::kTransport, what + ": " + httplib::to_string(r.error()));
  auto body = json::parse(r->body, nullptr, false);
  if (body.is_discarded()) throw Error(Error::Code::kTransport, what + ": non-JSON response");
  if (r->status != expected) {
    throw Error(code_from(body.value("error", "")), what + ": " + body.value("message", ""));
  }
  return body;
}

}  // namespace

std::string FaasHttpClient::deploy(const FunctionPackage& package) {
  std::lock_guard lock(mu_);
  const std::string body = encode(package);
  if (record_) sent_.push_back(body);
  auto r = impl_->client.Post("/v1/functions", body, "application/json");
  return checked(r, 201, "deploy").at("function_id").get<std::string>();
}

SimTime FaasHttpClient::now() {
  std::lock_guard lock(mu_);
  return at_ms(checked(impl_->client.Get("/v1/clock"), 200, "clock").at("now_ms").get<double>());
}

void FaasHttpClient::remove(const std::string& function_id) {
  std::lock_guard lock(mu_);
  checked(impl_->client.Delete("/v1/functions/" + function_id), 200, "remove");
}

InvocationRecord FaasHttpClient::invoke(const std::string& function_id,
                                        const InvocationRequest& request, SimTime now) {
  std::lock_guard lock(mu_);
  const std::string body = encode(request);
  if (record_) sent_.push_back(body);
  httplib::Headers headers{{kVirtualTimeHeader, std::to_string(to_ms(now))}};
  auto r = impl_->client.Post("/v1/functions/" + function_id + "/invoke", headers, body,
                              "application/json");
  return checked(r, 200, "invoke").get<InvocationRecord>();
}

InvocationRecord FaasHttpClient::keep_alive(const std::string& function_id, SimTime now) {
  std::lock_guard lock(mu_);
  httplib::Headers headers{{kVirtualTimeHeader, std::to_string(to_ms(now))}};
  auto r = impl_->client.Post("/v1/functions/" + function_id + "/keep-alive", headers, "",
                              "application/json");
  return checked(r, 200, "keep-alive").get<InvocationRecord>();
}

std::vector<std::string> FaasHttpClient::sent_bodies() const {
  std::lock_guard lock(mu_);
  return sent_;
}

}  // namespace ssiot::faas

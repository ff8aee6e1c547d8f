// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <thread>

#include "ssiot/faas/emulator.hpp"

namespace ssiot::faas {

struct ServiceOptions {
  // Use wall-clock time since start as `now` and make blocking invokes take
  // their modelled end-to-end time.
  bool real_time = false;
};

// Thread-safe front of an emulator. Callers from any thread submit work to a
// queue; a single loop thread owns the emulator and applies it in order.
class FaasService final : public FaasEndpoint {
 public:
  explicit FaasService(std::shared_ptr<FaasEmulator> emulator, ServiceOptions options = {});
  ~FaasService() override;
  FaasService(const FaasService&) = delete;
  FaasService& operator=(const FaasService&) = delete;

  std::string deploy(const FunctionPackage& package) override;
  void remove(const std::string& function_id) override;
  InvocationRecord invoke(const std::string& function_id, const InvocationRequest& request,
                          SimTime now) override;
  InvocationRecord keep_alive(const std::string& function_id, SimTime now) override;

  // Asynchronous variant; never sleeps. Without `now` the service clock is used.
  std::future<InvocationRecord> submit(std::string function_id, InvocationRequest request,
                                       std::optional<SimTime> now = std::nullopt);

  // Real time: elapsed since start. Virtual: latest time seen so far.
  SimTime now() const;
  bool real_time() const { return options_.real_time; }

  // Runs `fn(emulator)` on the loop thread and returns its result.
  template <class Fn>
  auto inspect(Fn&& fn) -> decltype(fn(std::declval<FaasEmulator&>())) {
    using R = decltype(fn(std::declval<FaasEmulator&>()));
    auto task = std::make_shared<std::packaged_task<R()>>(
        [this, f = std::forward<Fn>(fn)]() mutable { return f(*emulator_); });
    auto fut = task->get_future();
    post([task] { (*task)(); });
    return fut.get();
  }

 private:
  void post(std::function<void()> task);
  void run();
  SimTime effective_now(std::optional<SimTime> requested);
  void wait_until(SimTime t) const;

  std::shared_ptr<FaasEmulator> emulator_;
  ServiceOptions options_;
  std::chrono::steady_clock::time_point started_;
  std::atomic<double> watermark_ms_{0};

  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::thread loop_;
};

}  // namespace ssiot::faas

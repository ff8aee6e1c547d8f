// SPDX-License-Identifier: Apache-2.0
#include "ssiot/faas/service.hpp"

namespace ssiot::faas {

FaasService::FaasService(std::shared_ptr<FaasEmulator> emulator, ServiceOptions options)
    : emulator_(std::move(emulator)),
      options_(options),
      started_(std::chrono::steady_clock::now()),
      loop_([this] { run(); }) {}

FaasService::~FaasService() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  loop_.join();
}

void FaasService::post(std::function<void()> task) {
  {
    std::lock_guard lock(mu_);
    if (stopping_) throw std::runtime_error("faas service is stopping");
    queue_.push_back(std::move(task));
  }
  cv_.notify_one();
}

void FaasService::run() {
  for (;;) {
    std::function<void()> task;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      task = std::move(queue_.front());
      queue_.pop_front();
    }
    task();
  }
}

SimTime FaasService::now() const {
  if (options_.real_time) {
    return at_ms(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                           started_)
                     .count());
  }
  return at_ms(watermark_ms_.load());
}

SimTime FaasService::effective_now(std::optional<SimTime> requested) {
  if (options_.real_time || !requested) return now();
  // Keep the emulator's input monotone when callers race.
  double want = to_ms(*requested);
  double seen = watermark_ms_.load();
  while (want > seen && !watermark_ms_.compare_exchange_weak(seen, want)) {
  }
  return at_ms(std::max(want, seen));
}

void FaasService::wait_until(SimTime t) const {
  if (!options_.real_time) return;
  std::this_thread::sleep_until(started_ + std::chrono::duration_cast<std::chrono::nanoseconds>(
                                               std::chrono::duration<double, std::milli>(to_ms(t))));
}

std::string FaasService::deploy(const FunctionPackage& package) {
  return inspect([&](FaasEmulator& e) { return e.deploy(package); });
}

void FaasService::remove(const std::string& function_id) {
  inspect([&](FaasEmulator& e) { e.remove(function_id); });
}

std::future<InvocationRecord> FaasService::submit(std::string function_id,
                                                  InvocationRequest request,
                                                  std::optional<SimTime> now) {
  auto task = std::make_shared<std::packaged_task<InvocationRecord()>>(
      [this, function_id = std::move(function_id), request = std::move(request), now] {
        return emulator_->invoke(function_id, request, effective_now(now));
      });
  auto fut = task->get_future();
  post([task] { (*task)(); });
  return fut;
}

InvocationRecord FaasService::invoke(const std::string& function_id,
                                     const InvocationRequest& request, SimTime now) {
  auto rec = submit(function_id, request, now).get();
  wait_until(rec.completed_at);
  return rec;
}

InvocationRecord FaasService::keep_alive(const std::string& function_id, SimTime now) {
  auto rec = inspect([&](FaasEmulator& e) { return e.keep_alive(function_id, effective_now(now)); });
  wait_until(rec.completed_at);
  return rec;
}

}  // namespace ssiot::faas

// SPDX-License-Identifier: Apache-2.0
#include "ssiot/faas/sandbox.hpp"

namespace ssiot::faas {

Sandbox::Sandbox(ByteView input, std::string kms_endpoint, SandboxLimits limits)
    : input_(input), kms_endpoint_(std::move(kms_endpoint)), limits_(limits) {}

Sandbox::~Sandbox() {
  for (auto& [_, data] : scratch_) secure_wipe(data);
}

void Sandbox::write_scratch(const std::string& name, ByteView data) {
  std::size_t previous = 0;
  if (auto it = scratch_.find(name); it != scratch_.end()) previous = it->second.size();
  const std::size_t next = used_ - previous + data.size();
  if (next > limits_.scratch_bytes) {
    throw SandboxViolation("scratch limit exceeded: " + std::to_string(next) + " > " +
                           std::to_string(limits_.scratch_bytes) + " bytes");
  }
  auto& slot = scratch_[name];
  secure_wipe(slot);
  slot.assign(data.begin(), data.end());
  used_ = next;
}

std::optional<Bytes> Sandbox::read_scratch(const std::string& name) const {
  if (auto it = scratch_.find(name); it != scratch_.end()) return it->second;
  return std::nullopt;
}

void Sandbox::connect(const std::string& endpoint) const {
  if (kms_endpoint_.empty() || endpoint != kms_endpoint_) {
    throw SandboxViolation("network access to '" + endpoint + "' is not permitted");
  }
}

void Sandbox::open_file(const std::string& path) const {
  throw SandboxViolation("filesystem access to '" + path + "' is not permitted");
}

}  // namespace ssiot::faas

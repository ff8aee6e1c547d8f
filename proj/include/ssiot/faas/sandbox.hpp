// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "ssiot/common/bytes.hpp"

namespace ssiot::faas {

class SandboxViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SandboxLimits {
  std::size_t scratch_bytes = 64u << 20;
};

// The only authority app code receives. There is no ambient filesystem or
// network access; the sole reachable endpoint is the package's KMS.
class Sandbox {
 public:
  Sandbox(ByteView input, std::string kms_endpoint, SandboxLimits limits = {});
  ~Sandbox();
  Sandbox(const Sandbox&) = delete;
  Sandbox& operator=(const Sandbox&) = delete;

  ByteView input() const { return input_; }

  // Throws SandboxViolation when the total would exceed the scratch limit.
  void write_scratch(const std::string& name, ByteView data);
  std::optional<Bytes> read_scratch(const std::string& name) const;
  std::size_t scratch_used() const { return used_; }

  // Succeeds only for the KMS endpoint.
  void connect(const std::string& endpoint) const;
  // Always a violation.
  [[noreturn]] void open_file(const std::string& path) const;

 private:
  ByteView input_;
  std::string kms_endpoint_;
  SandboxLimits limits_;
  std::map<std::string, Bytes> scratch_;
  std::size_t used_ = 0;
};

// App code: reads the plaintext input from the sandbox, returns the result.
using AppFunction = std::function<Bytes(Sandbox&)>;

}  // namespace ssiot::faas

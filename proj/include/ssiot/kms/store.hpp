// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <fstream>
#include <mutex>
#include <string>
#include <vector>

namespace ssiot::kms {

// Append-only journal backing the KMS: identity, registrations,
// revocations and access records, one JSON entry each.
class KmsStore {
 public:
  virtual ~KmsStore() = default;
  virtual void append(const nlohmann::json& entry) = 0;
  virtual std::vector<nlohmann::json> replay() const = 0;
};

class MemoryStore final : public KmsStore {
 public:
  void append(const nlohmann::json& entry) override;
  std::vector<nlohmann::json> replay() const override;

 private:
  mutable std::mutex mu_;
  std::vector<nlohmann::json> entries_;
};

// JSON-lines file. Each entry is flushed before append() returns.
class FileStore final : public KmsStore {
 public:
  explicit FileStore(std::string path);
  void append(const nlohmann::json& entry) override;
  std::vector<nlohmann::json> replay() const override;
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  mutable std::mutex mu_;
  std::ofstream out_;
};

}  // namespace ssiot::kms

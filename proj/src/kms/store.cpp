// SPDX-License-Identifier: Apache-2.0
#include "ssiot/kms/store.hpp"

#include <sys/stat.h>

#include <filesystem>

#include "ssiot/kms/types.hpp"

namespace ssiot::kms {

void MemoryStore::append(const nlohmann::json& entry) {
  std::lock_guard lock(mu_);
  entries_.push_back(entry);
}

std::vector<nlohmann::json> MemoryStore::replay() const {
  std::lock_guard lock(mu_);
  return entries_;
}

FileStore::FileStore(std::string path) : path_(std::move(path)) {
  auto parent = std::filesystem::path(path_).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  out_.open(path_, std::ios::app);
  if (!out_) throw Error(Errc::kStore, "cannot open KMS store " + path_);
  // Holds app key material.
  ::chmod(path_.c_str(), 0600);
}

void FileStore::append(const nlohmann::json& entry) {
  std::lock_guard lock(mu_);
  out_ << entry.dump() << '\n';
  out_.flush();
  if (!out_) throw Error(Errc::kStore, "write to KMS store failed");
}

std::vector<nlohmann::json> FileStore::replay() const {
  std::lock_guard lock(mu_);
  std::vector<nlohmann::json> entries;
  std::ifstream in(path_);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw Error(Errc::kStore, path_ + ":" + std::to_string(lineno) + ": corrupt entry");
    }
    entries.push_back(std::move(j));
  }
  return entries;
}

}  // namespace ssiot::kms

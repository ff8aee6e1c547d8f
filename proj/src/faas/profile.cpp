// SPDX-License-Identifier: Apache-2.0
#include "ssiot/faas/profile.hpp"

#include <stdexcept>

namespace ssiot::faas {

std::optional<double> WorkloadProfile::local_exec_on(DeviceClass device) const {
  if (auto it = local_exec_ms.find(device); it != local_exec_ms.end()) return it->second;
  return std::nullopt;
}

void WorkloadProfile::validate() const {
  auto bad = [&](const std::string& why) {
    throw std::invalid_argument("profile '" + name + "': " + why);
  };
  if (name.empty()) bad("empty name");
  if (!(warm_exec_ms > 0)) bad("warm_exec_ms must be > 0");
  if (!(cold_init_ms >= 0)) bad("cold_init_ms must be >= 0");
  if (billed_warm.micro() <= 0) bad("billed_warm_gbs must be > 0");
  if (billed_cold < billed_warm) bad("billed_cold_gbs must be >= billed_warm_gbs");
  if (!(memory_gb > 0)) bad("memory_gb must be > 0");
  if (!(local_mem_gb >= 0)) bad("local_mem_gb must be >= 0");
  for (const auto& [device, ms] : local_exec_ms) {
    if (!(ms > 0)) bad("local_exec_ms for " + std::string(to_string(device)) + " must be > 0");
  }
}

void to_json(nlohmann::json& j, const WorkloadProfile& p) {
  nlohmann::json local = nlohmann::json::object();
  for (const auto& [device, ms] : p.local_exec_ms) local[std::string(to_string(device))] = ms;
  j = {{"name", p.name},
       {"warm_exec_ms", p.warm_exec_ms},
       {"cold_init_ms", p.cold_init_ms},
       {"billed_warm_gbs", p.billed_warm.to_double()},
       {"billed_cold_gbs", p.billed_cold.to_double()},
       {"memory_gb", p.memory_gb},
       {"local_exec_ms", local},
       {"local_mem_gb", p.local_mem_gb}};
}

void from_json(const nlohmann::json& j, WorkloadProfile& p) {
  p.name = j.at("name").get<std::string>();
  p.warm_exec_ms = j.at("warm_exec_ms").get<double>();
  p.cold_init_ms = j.value("cold_init_ms", 0.0);
  p.billed_warm = GbSeconds::from_double(j.at("billed_warm_gbs").get<double>());
  p.billed_cold = GbSeconds::from_double(j.at("billed_cold_gbs").get<double>());
  p.memory_gb = j.value("memory_gb", 3.0);
  p.local_exec_ms.clear();
  if (j.contains("local_exec_ms")) {
    for (const auto& [key, ms] : j.at("local_exec_ms").items()) {
      auto device = parse_device_class(key);
      if (!device) throw std::invalid_argument("unknown device class '" + key + "'");
      p.local_exec_ms[*device] = ms.get<double>();
    }
  }
  p.local_mem_gb = j.value("local_mem_gb", 0.0);
  p.validate();
}

std::vector<WorkloadProfile> default_profiles() {
  using D = DeviceClass;
  // Billed GB-seconds are whole 100 ms quanta at 3 GB.
  auto gbs = [](double v) { return GbSeconds::from_double(v); };
  return {
      {"MobileNet", 94, 1100, gbs(0.9), gbs(4.2), 3.0,
       {{D::kRPi, 620}, {D::kJetsonNano, 99}}, 0.5},
      {"DenseNet", 455, 8302, gbs(2.7), gbs(8.4), 3.0,
       {{D::kRPi, 4300}, {D::kJetsonNano, 587}}, 1.0},
      {"Darknet", 6696, 28867, gbs(20.706), gbs(32.4), 3.0,
       {{D::kJetsonNano, 1347}}, 2.0},
      {"SSDMobilenet", 2594, 2000, gbs(8.4), gbs(14.4), 3.0,
       {{D::kJetsonNano, 1196}}, 1.0},
  };
}

ProfileCatalog::ProfileCatalog() {
  for (auto& p : default_profiles()) profiles_.emplace(p.name, std::move(p));
}

ProfileCatalog ProfileCatalog::from_json(const nlohmann::json& j) {
  ProfileCatalog cat;
  if (j.contains("profiles")) {
    for (const auto& entry : j.at("profiles")) cat.put(entry.get<WorkloadProfile>());
  }
  return cat;
}

const WorkloadProfile* ProfileCatalog::find(const std::string& name) const {
  auto it = profiles_.find(name);
  return it == profiles_.end() ? nullptr : &it->second;
}

const WorkloadProfile& ProfileCatalog::at(const std::string& name) const {
  if (const auto* p = find(name)) return *p;
  throw std::out_of_range("unknown workload profile '" + name + "'");
}

void ProfileCatalog::put(WorkloadProfile profile) {
  profile.validate();
  profiles_[profile.name] = std::move(profile);
}

std::vector<std::string> ProfileCatalog::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : profiles_) out.push_back(name);
  return out;
}

}  // namespace ssiot::faas

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ssiot/common/device.hpp"
#include "ssiot/faas/money.hpp"

namespace ssiot::faas {

// Calibration defaults for the remote path. A warm remote round trip is
// network overhead + KMS latency + warm_exec_ms.
inline constexpr double kDefaultNetworkOverheadMs = 190.0;
inline constexpr double kCalibrationKmsLatencyMs = 206.0;

struct WorkloadProfile {
  std::string name;
  double warm_exec_ms = 0;
  // Added before execution when a new instance is spawned.
  double cold_init_ms = 0;
  GbSeconds billed_warm;
  GbSeconds billed_cold;
  double memory_gb = 3.0;
  // Absent device class means the profile cannot run there.
  std::map<DeviceClass, double> local_exec_ms;
  double local_mem_gb = 0;

  std::optional<double> local_exec_on(DeviceClass device) const;
  // Throws std::invalid_argument when an invariant does not hold.
  void validate() const;

  double nominal_warm_e2e_ms(double kms_ms = kCalibrationKmsLatencyMs,
                             double network_ms = kDefaultNetworkOverheadMs) const {
    return network_ms + kms_ms + warm_exec_ms;
  }
  double nominal_cold_e2e_ms(double kms_ms = kCalibrationKmsLatencyMs,
                             double network_ms = kDefaultNetworkOverheadMs) const {
    return nominal_warm_e2e_ms(kms_ms, network_ms) + cold_init_ms;
  }
};

void to_json(nlohmann::json& j, const WorkloadProfile& p);
void from_json(const nlohmann::json& j, WorkloadProfile& p);

// MobileNet, DenseNet, Darknet, SSDMobilenet.
std::vector<WorkloadProfile> default_profiles();

class ProfileCatalog {
 public:
  // Starts with the default profiles.
  ProfileCatalog();
  // Defaults overlaid with {"profiles": [...]}; entries replace by name.
  static ProfileCatalog from_json(const nlohmann::json& j);

  const WorkloadProfile* find(const std::string& name) const;
  const WorkloadProfile& at(const std::string& name) const;
  void put(WorkloadProfile profile);
  std::vector<std::string> names() const;
  const std::map<std::string, WorkloadProfile>& all() const { return profiles_; }

 private:
  std::map<std::string, WorkloadProfile> profiles_;
};

}  // namespace ssiot::faas

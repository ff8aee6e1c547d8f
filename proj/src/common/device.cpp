// SPDX-License-Identifier: Apache-2.0
#include "ssiot/common/device.hpp"

namespace ssiot {

std::string_view to_string(DeviceClass d) {
  switch (d) {
    case DeviceClass::kRPi: return "rpi";
    case DeviceClass::kJetsonNano: return "jetson";
    case DeviceClass::kCustom: return "custom";
  }
  return "custom";
}

std::optional<DeviceClass> parse_device_class(std::string_view s) {
  if (s == "rpi") return DeviceClass::kRPi;
  if (s == "jetson" || s == "jetson-nano") return DeviceClass::kJetsonNano;
  if (s == "custom") return DeviceClass::kCustom;
  return std::nullopt;
}

}  // namespace ssiot

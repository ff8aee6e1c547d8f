// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <string_view>

namespace ssiot {

enum class DeviceClass { kRPi, kJetsonNano, kCustom };

// "rpi", "jetson", "custom"
std::string_view to_string(DeviceClass d);
std::optional<DeviceClass> parse_device_class(std::string_view s);

}  // namespace ssiot

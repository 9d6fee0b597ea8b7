#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wattwise/powercap.hpp"

namespace wattwise {

struct Config {
    int tz_offset_minutes = 0; // datacenter-local fixed UTC offset
    int kwh_sig_figs = 3;
    std::string fixtures_dir = "fixtures";
    std::vector<powercap::DeviceClass> device_classes;

    const powercap::DeviceClass& device_class(const std::string& name) const;
};

Config default_config();
Config config_from_json(const nlohmann::json& j);
Config load_config(const std::string& path);

} // namespace wattwise

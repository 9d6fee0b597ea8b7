#include "wattwise/config.hpp"

#include <fstream>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "wattwise/common.hpp"

namespace wattwise {

const powercap::DeviceClass& Config::device_class(const std::string& name) const {
    for (const powercap::DeviceClass& cls : device_classes) {
        if (cls.name == name) {
            return cls;
        }
    }
    throw DomainError(fmt::format("unknown device class '{}'", name));
}

Config default_config() {
    Config cfg;
    cfg.device_classes = {
        {"V100", 100.0, 250.0, 250.0},
        {"A100", 100.0, 250.0, 250.0},
        {"K80", 100.0, 175.0, 150.0},
        {"T4", 60.0, 70.0, 70.0},
    };
    return cfg;
}

Config config_from_json(const nlohmann::json& j) {
    Config cfg = default_config();
    try {
        cfg.tz_offset_minutes = j.value("tz_offset_minutes", cfg.tz_offset_minutes);
        cfg.kwh_sig_figs = j.value("kwh_sig_figs", cfg.kwh_sig_figs);
        cfg.fixtures_dir = j.value("fixtures_dir", cfg.fixtures_dir);
        if (j.contains("device_classes")) {
            cfg.device_classes.clear();
            for (const nlohmann::json& cj : j.at("device_classes")) {
                powercap::DeviceClass cls;
                cls.name = cj.at("name").get<std::string>();
                cls.min_cap_w = cj.at("min_cap_w").get<double>();
                cls.max_cap_w = cj.at("max_cap_w").get<double>();
                cls.default_cap_w = cj.at("default_cap_w").get<double>();
                if (!(cls.min_cap_w > 0.0) || cls.min_cap_w > cls.default_cap_w ||
                    cls.default_cap_w > cls.max_cap_w) {
                    throw ParseError(fmt::format(
                        "device class '{}': need 0 < min <= default <= max", cls.name));
                }
                cfg.device_classes.push_back(std::move(cls));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("config JSON: {}", e.what()));
    }
    if (cfg.tz_offset_minutes < -720 || cfg.tz_offset_minutes > 840) {
        throw ParseError(fmt::format("tz_offset_minutes {} outside [-720, 840]",
                                     cfg.tz_offset_minutes));
    }
    if (cfg.kwh_sig_figs < 1) {
        throw ParseError("kwh_sig_figs must be at least 1");
    }
    return cfg;
}

Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(fmt::format("cannot open config file '{}'", path));
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("config file '{}': {}", path, e.what()));
    }
    return config_from_json(j);
}

} // namespace wattwise

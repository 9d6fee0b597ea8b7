#include "wattwise/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <utility>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "wattwise/common.hpp"

namespace wattwise::sim {

double Gaussian::operator()() {
    // 53-bit uniforms; u1 in (0,1] so the log is finite.
    const double u1 = 1.0 - static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SimRun simulate_run(const SimDevice& device, const powercap::Workload& workload, double cap_w,
                    std::uint64_t seed, std::int64_t start_ms) {
    if (!(workload.base_duration_s > 0.0)) {
        throw DomainError("workload duration must be positive");
    }
    if (cap_w < device.cap_min_w || cap_w > device.cap_max_w) {
        throw DomainError(fmt::format("cap {} W outside [{}, {}] W for device {}", cap_w,
                                      device.cap_min_w, device.cap_max_w, device.id.str()));
    }
    const powercap::RelPerf rel = powercap::interpolate(device.cap_response, cap_w);
    const double wall_seconds = workload.base_duration_s * rel.rel_time;
    const double mean_power_w = device.nominal_draw_w * rel.rel_energy / rel.rel_time;
    const std::int64_t duration_ms =
        static_cast<std::int64_t>(std::llround(wall_seconds * 1000.0));

    Gaussian gauss(seed);
    SimRun run;
    run.wall_seconds = wall_seconds;
    run.series.device = device.id;
    run.series.nominal_interval_ms = telemetry::kDefaultIntervalMs;
    run.series.samples.reserve(
        static_cast<std::size_t>(duration_ms / telemetry::kDefaultIntervalMs) + 2);

    const auto emit = [&](std::int64_t offset_ms) {
        telemetry::PowerSample s;
        s.ts_ms = start_ms + offset_ms;
        s.device = device.id;
        s.cap_w = cap_w;
        s.power_w =
            std::clamp(mean_power_w + device.noise_stddev_w * gauss(), 0.0, cap_w);
        run.series.samples.push_back(std::move(s));
    };
    for (std::int64_t t = 0; t <= duration_ms; t += telemetry::kDefaultIntervalMs) {
        emit(t);
    }
    if (duration_ms % telemetry::kDefaultIntervalMs != 0) {
        emit(duration_ms);
    }
    return run;
}

SimRun simulate_fraction(const SimDevice& device, const powercap::Workload& workload,
                         double cap_w, std::uint64_t seed, double fraction,
                         std::int64_t start_ms) {
    if (!(fraction > 0.0) || fraction > 1.0) {
        throw DomainError(fmt::format("fraction must be in (0, 1], got {}", fraction));
    }
    powercap::Workload scaled = workload;
    scaled.base_duration_s = workload.base_duration_s * fraction;
    return simulate_run(device, scaled, cap_w, seed, start_ms);
}

std::vector<pue::PueSample> generate_pue_year(const SimDatacenterProfile& profile, int year,
                                              int tz_offset_minutes) {
    if (!(profile.winter_mean_pue >= 1.0) || !(profile.summer_mean_pue >= 1.0)) {
        throw DomainError("mean PUE must be at least 1");
    }
    if (!(profile.it_power_w > 0.0)) {
        throw DomainError("IT power must be positive");
    }
    const double mean = 0.5 * (profile.winter_mean_pue + profile.summer_mean_pue);
    const double seasonal_amp = 0.5 * (profile.summer_mean_pue - profile.winter_mean_pue);
    const double it_j = profile.it_power_w * 3600.0;
    const int ndays = pue::days_in_year(year);
    // Seasonal peak on July 15: days Jan-Jun plus half a month.
    const double peak_days =
        static_cast<double>(181 + (pue::days_in_year(year) == 366 ? 1 : 0)) + 14.5;
    constexpr double kTau = 2.0 * std::numbers::pi;

    Gaussian gauss(profile.seed);
    const std::int64_t year_start =
        pue::ms_from_civil(pue::CivilDate{year, 1, 1}, 0, tz_offset_minutes);
    std::vector<pue::PueSample> out;
    out.reserve(static_cast<std::size_t>(ndays) * 24);
    for (int d = 0; d < ndays; ++d) {
        for (int h = 0; h < 24; ++h) {
            const double t_days = d + h / 24.0;
            const double seasonal =
                seasonal_amp * std::cos(kTau * (t_days - peak_days) / ndays);
            const double diurnal =
                profile.diurnal_amplitude * std::cos(kTau * (h - 14) / 24.0);
            double value = mean + seasonal + diurnal + profile.noise_stddev * gauss();
            value = std::max(value, 1.0);
            const std::int64_t start =
                year_start + (std::int64_t{d} * 24 + h) * 3'600'000;
            out.push_back(pue::PueSample{start, start + 3'600'000, (value - 1.0) * it_j, it_j});
        }
    }
    return out;
}

SimBackend::SimBackend(std::vector<SimDevice> devices) {
    if (devices.empty()) {
        throw DomainError("simulated backend needs at least one device");
    }
    for (SimDevice& d : devices) {
        if (!(d.nominal_draw_w > 0.0)) {
            throw DomainError(fmt::format("device {}: nominal draw must be positive",
                                          d.id.str()));
        }
        if (!(d.cap_min_w > 0.0) || d.cap_min_w > d.default_cap_w ||
            d.default_cap_w > d.cap_max_w) {
            throw DomainError(fmt::format(
                "device {}: cap limits must satisfy 0 < min <= default <= max", d.id.str()));
        }
        State st;
        st.cls = powercap::DeviceClass{d.device_class, d.cap_min_w, d.cap_max_w,
                                       d.default_cap_w};
        st.current_cap_w = d.default_cap_w;
        const telemetry::DeviceId key = d.id;
        st.device = std::move(d);
        if (!states_.emplace(key, std::move(st)).second) {
            throw DomainError(fmt::format("duplicate device {}", key.str()));
        }
    }
}

SimBackend::State& SimBackend::state_for(const telemetry::DeviceId& device) {
    const auto it = states_.find(device);
    if (it == states_.end()) {
        throw DomainError(fmt::format("unknown device {}", device.str()));
    }
    return it->second;
}

const SimBackend::State& SimBackend::state_for(const telemetry::DeviceId& device) const {
    const auto it = states_.find(device);
    if (it == states_.end()) {
        throw DomainError(fmt::format("unknown device {}", device.str()));
    }
    return it->second;
}

const powercap::DeviceClass& SimBackend::device_class(const telemetry::DeviceId& device) const {
    return state_for(device).cls;
}

double SimBackend::get_cap(const telemetry::DeviceId& device) const {
    return state_for(device).current_cap_w;
}

double SimBackend::set_cap(const telemetry::DeviceId& device, double watts) {
    State& st = state_for(device);
    if (watts < st.cls.min_cap_w || watts > st.cls.max_cap_w) {
        throw DomainError(fmt::format("cap {} W outside [{}, {}] W for device {}", watts,
                                      st.cls.min_cap_w, st.cls.max_cap_w, device.str()));
    }
    return std::exchange(st.current_cap_w, watts);
}

powercap::WorkloadRun SimBackend::run(const telemetry::DeviceId& device,
                                      const powercap::Workload& workload) {
    State& st = state_for(device);
    const std::uint64_t run_seed = mix_seed(st.device.seed, st.run_counter++);
    SimRun r = simulate_run(st.device, workload, st.current_cap_w, run_seed);
    return powercap::WorkloadRun{r.wall_seconds, std::move(r.series)};
}

const SimDevice& SimBackend::device(const telemetry::DeviceId& id) const {
    return state_for(id).device;
}

SimDevice device_from_json(const nlohmann::json& j) {
    SimDevice d;
    const auto& id = j.at("id");
    if (id.is_number_integer()) {
        d.id.index = id.get<int>();
    } else {
        d.id = telemetry::DeviceId::parse(id.get<std::string>());
    }
    d.device_class = j.value("class", std::string{"V100"});
    d.nominal_draw_w = j.at("nominal_draw_w").get<double>();
    d.cap_min_w = j.at("cap_min_w").get<double>();
    d.cap_max_w = j.at("cap_max_w").get<double>();
    d.default_cap_w = j.at("default_cap_w").get<double>();
    d.cap_response = powercap::profile_from_json(j.at("cap_response"));
    d.noise_stddev_w = j.contains("noise_stddev_w") ? j.at("noise_stddev_w").get<double>()
                                                    : 0.02 * d.nominal_draw_w;
    d.seed = j.value("seed", std::uint64_t{0});
    if (d.cap_response.default_cap.watts != d.default_cap_w) {
        throw ParseError(fmt::format(
            "device {}: cap_response default ({} W) does not match default_cap_w ({} W)",
            d.id.str(), d.cap_response.default_cap.watts, d.default_cap_w));
    }
    if (d.noise_stddev_w < 0.0) {
        throw ParseError(fmt::format("device {}: noise_stddev_w must be non-negative",
                                     d.id.str()));
    }
    return d;
}

nlohmann::json to_json(const SimDevice& device) {
    nlohmann::json j;
    j["id"] = device.id.str();
    j["class"] = device.device_class;
    j["nominal_draw_w"] = device.nominal_draw_w;
    j["cap_min_w"] = device.cap_min_w;
    j["cap_max_w"] = device.cap_max_w;
    j["default_cap_w"] = device.default_cap_w;
    j["cap_response"] = powercap::to_json(device.cap_response);
    j["noise_stddev_w"] = device.noise_stddev_w;
    j["seed"] = device.seed;
    return j;
}

SimDatacenterProfile datacenter_from_json(const nlohmann::json& j) {
    try {
        SimDatacenterProfile p;
        p.winter_mean_pue = j.at("winter_mean_pue").get<double>();
        p.summer_mean_pue = j.at("summer_mean_pue").get<double>();
        p.diurnal_amplitude = j.value("diurnal_amplitude", p.diurnal_amplitude);
        p.noise_stddev = j.value("noise_stddev", p.noise_stddev);
        p.it_power_w = j.value("it_power_w", p.it_power_w);
        p.seed = j.value("seed", std::uint64_t{0});
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("datacenter profile JSON: {}", e.what()));
    }
}

Scenario scenario_from_json(const nlohmann::json& j) {
    try {
        Scenario sc;
        for (const nlohmann::json& dj : j.at("devices")) {
            sc.devices.push_back(device_from_json(dj));
        }
        if (sc.devices.empty()) {
            throw ParseError("scenario has no devices");
        }
        const nlohmann::json& wj = j.at("workload");
        sc.workload.base_duration_s = wj.at("base_duration_s").get<double>();
        sc.workload.steps = wj.value("steps", 1);
        sc.caps_w = j.value("caps_w", std::vector<double>{});
        if (j.contains("datacenter")) {
            sc.datacenter = datacenter_from_json(j.at("datacenter"));
        }
        return sc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("scenario JSON: {}", e.what()));
    }
}

} // namespace wattwise::sim

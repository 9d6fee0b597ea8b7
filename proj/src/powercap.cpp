#include "wattwise/powercap.hpp"

#include <charconv>
#include <cstdio>
#include <memory>

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "wattwise/common.hpp"
#include "wattwise/energy.hpp"

namespace wattwise::powercap {

namespace {
constexpr double kTieTolerance = 1e-6; // relative; ties go to the higher cap
} // namespace

double CapProfile::min_watts() const {
    if (points.empty()) {
        throw DomainError("cap profile has no points");
    }
    return points.begin()->first;
}

double CapProfile::max_watts() const {
    if (points.empty()) {
        throw DomainError("cap profile has no points");
    }
    return points.rbegin()->first;
}

nlohmann::json to_json(const CapProfile& profile) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& [watts, perf] : profile.points) {
        points.push_back(
            {{"watts", watts}, {"rel_time", perf.rel_time}, {"rel_energy", perf.rel_energy}});
    }
    return {{"default_cap",
             {{"watts", profile.default_cap.watts},
              {"device_class", profile.default_cap.device_class}}},
            {"points", points},
            {"provenance",
             profile.provenance == Provenance::Measured ? "measured" : "configured"}};
}

CapProfile profile_from_json(const nlohmann::json& j) {
    CapProfile profile;
    try {
        profile.default_cap.watts = j.at("default_cap").at("watts").get<double>();
        profile.default_cap.device_class =
            j.at("default_cap").value("device_class", std::string{});
        for (const auto& p : j.at("points")) {
            profile.points[p.at("watts").get<double>()] = RelPerf{
                p.at("rel_time").get<double>(), p.at("rel_energy").get<double>()};
        }
        const std::string prov = j.value("provenance", "configured");
        profile.provenance = prov == "measured" ? Provenance::Measured : Provenance::Configured;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("cap profile: {}", e.what()));
    }
    return profile;
}

CapProfile normalize_profile(const std::map<double, RawMeasurement>& raw,
                             const CapSetting& default_cap, Provenance provenance) {
    const auto base = raw.find(default_cap.watts);
    if (base == raw.end()) {
        throw DomainError(fmt::format("raw measurements lack the default cap {}W",
                                      default_cap.watts));
    }
    CapProfile profile;
    profile.default_cap = default_cap;
    profile.provenance = provenance;
    for (const auto& [watts, m] : raw) {
        if (!(m.seconds > 0.0) || !(m.joules > 0.0)) {
            throw DomainError(fmt::format(
                "measurement at {}W must be positive (got {}s, {}J)", watts, m.seconds,
                m.joules));
        }
        if (watts == default_cap.watts) {
            profile.points[watts] = RelPerf{1.0, 1.0};
        } else {
            profile.points[watts] =
                RelPerf{m.seconds / base->second.seconds, m.joules / base->second.joules};
        }
    }
    return profile;
}

RelPerf interpolate(const CapProfile& profile, double watts) {
    if (profile.points.empty()) {
        throw DomainError("cap profile has no points");
    }
    if (watts < profile.min_watts() || watts > profile.max_watts()) {
        throw DomainError(fmt::format("{}W outside measured range [{}W, {}W]", watts,
                                      profile.min_watts(), profile.max_watts()));
    }
    const auto upper = profile.points.lower_bound(watts);
    if (upper->first == watts) {
        return upper->second;
    }
    const auto lower = std::prev(upper);
    const double t = (watts - lower->first) / (upper->first - lower->first);
    return RelPerf{
        lower->second.rel_time + t * (upper->second.rel_time - lower->second.rel_time),
        lower->second.rel_energy + t * (upper->second.rel_energy - lower->second.rel_energy)};
}

Policy Policy::with_slowdown_budget(double budget) {
    if (!(budget >= 1.0)) {
        throw DomainError(fmt::format("slowdown budget {} must be >= 1", budget));
    }
    return {Kind::MinEnergyWithSlowdownBudget, budget};
}

Policy Policy::parse(std::string_view text) {
    if (text == "min-energy") {
        return min_energy();
    }
    if (text == "min-edp") {
        return min_edp();
    }
    if (text.starts_with("budget:")) {
        const std::string_view num = text.substr(7);
        double budget = 0.0;
        const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), budget);
        if (ec != std::errc{} || ptr != num.data() + num.size()) {
            throw ParseError(fmt::format("malformed budget in policy '{}'", text));
        }
        return with_slowdown_budget(budget);
    }
    throw ParseError(
        fmt::format("unknown policy '{}' (expected min-energy, min-edp, or budget:<ratio>)",
                    text));
}

std::string Policy::str() const {
    switch (kind) {
    case Kind::MinEnergy:
        return "min-energy";
    case Kind::MinEdp:
        return "min-edp";
    case Kind::MinEnergyWithSlowdownBudget:
        return fmt::format("budget:{}", slowdown_budget);
    }
    return "?";
}

CapSetting select_cap(const CapProfile& profile, const Policy& policy) {
    if (profile.points.size() < 2) {
        throw DomainError("cap selection needs at least 2 measured points");
    }
    auto objective = [&](const RelPerf& p) {
        return policy.kind == Policy::Kind::MinEdp ? p.rel_time * p.rel_energy : p.rel_energy;
    };
    bool found = false;
    double best_watts = 0.0;
    double best_value = 0.0;
    // Descending caps: the first of a near-tie is the higher cap, which wins.
    for (auto it = profile.points.rbegin(); it != profile.points.rend(); ++it) {
        if (policy.kind == Policy::Kind::MinEnergyWithSlowdownBudget &&
            it->second.rel_time > policy.slowdown_budget) {
            continue;
        }
        const double value = objective(it->second);
        if (!found || best_value - value > kTieTolerance * best_value) {
            found = true;
            best_watts = it->first;
            best_value = value;
        }
    }
    if (!found) {
        throw DomainError(fmt::format(
            "no cap satisfies the slowdown budget {}", policy.slowdown_budget));
    }
    return CapSetting{best_watts, profile.default_cap.device_class};
}

CapProfile run_sweep(CapBackend& backend, const telemetry::DeviceId& device,
                     const std::vector<double>& caps_w, const Workload& workload) {
    const DeviceClass& cls = backend.device_class(device);
    bool has_default = false;
    for (const double cap : caps_w) {
        if (cap == cls.default_cap_w) {
            has_default = true;
        }
    }
    if (!has_default) {
        throw DomainError(fmt::format("cap sweep must include the default cap {}W",
                                      cls.default_cap_w));
    }

    std::map<double, RawMeasurement> raw;
    try {
        for (const double cap : caps_w) {
            backend.set_cap(device, cap);
            const WorkloadRun run = backend.run(device, workload);
            raw[cap] = RawMeasurement{run.wall_seconds, energy::integrate(run.series).joules};
        }
    } catch (...) {
        backend.set_cap(device, cls.default_cap_w);
        throw;
    }
    backend.set_cap(device, cls.default_cap_w);
    return normalize_profile(raw, CapSetting{cls.default_cap_w, cls.name},
                             Provenance::Measured);
}

namespace {

std::string run_command(const std::string& command) {
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(command.c_str(), "r"), pclose);
    if (!pipe) {
        throw DomainError(fmt::format("failed to launch '{}'", command));
    }
    std::string output;
    char buf[256];
    while (fgets(buf, sizeof buf, pipe.get()) != nullptr) {
        output += buf;
    }
    return output;
}

} // namespace

NvidiaSmiBackend::NvidiaSmiBackend(DeviceClass device_class) : class_(std::move(device_class)) {}

const DeviceClass& NvidiaSmiBackend::device_class(const telemetry::DeviceId&) const {
    return class_;
}

double NvidiaSmiBackend::get_cap(const telemetry::DeviceId& device) const {
    const std::string out = run_command(fmt::format(
        "nvidia-smi -i {} --query-gpu=power.limit --format=csv,noheader,nounits", device.index));
    double watts = 0.0;
    const auto [ptr, ec] = std::from_chars(out.data(), out.data() + out.size(), watts);
    if (ec != std::errc{}) {
        throw DomainError(fmt::format("could not read power limit for device {}: '{}'",
                                      device.str(), out));
    }
    return watts;
}

double NvidiaSmiBackend::set_cap(const telemetry::DeviceId& device, double watts) {
    if (watts < class_.min_cap_w || watts > class_.max_cap_w) {
        throw DomainError(fmt::format("{}W outside cap range [{}W, {}W] for class {}", watts,
                                      class_.min_cap_w, class_.max_cap_w, class_.name));
    }
    const double previous = get_cap(device);
    run_command(fmt::format("nvidia-smi -i {} -pl {}", device.index, watts));
    return previous;
}

WorkloadRun NvidiaSmiBackend::run(const telemetry::DeviceId&, const Workload&) {
    throw DomainError("the nvidia-smi backend controls caps only; run workloads through the "
                      "cluster scheduler and integrate their telemetry instead");
}

} // namespace wattwise::powercap

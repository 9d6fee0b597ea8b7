#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wattwise/powercap.hpp"
#include "wattwise/pue.hpp"
#include "wattwise/telemetry.hpp"

namespace wattwise::sim {

// Standard normal deviates from Box-Muller over mt19937_64. The stdlib
// normal_distribution is implementation-defined, so the same seed would give
// different telemetry across toolchains; this keeps runs bit-reproducible.
class Gaussian {
public:
    explicit Gaussian(std::uint64_t seed) : rng_(seed) {}

    double operator()();

private:
    std::mt19937_64 rng_;
};

struct SimDevice {
    telemetry::DeviceId id;
    std::string device_class = "V100";
    double nominal_draw_w = 0.0; // steady draw of the workload at the default cap
    double cap_min_w = 0.0;
    double cap_max_w = 0.0;
    double default_cap_w = 0.0;
    powercap::CapProfile cap_response; // ground-truth rel_time/rel_energy vs cap
    double noise_stddev_w = 0.0;
    std::uint64_t seed = 0;
};

struct SimRun {
    double wall_seconds = 0.0;
    telemetry::SampleSeries series;
};

// One workload execution under `cap_w`. Wall time scales by rel_time, mean
// power is chosen so that mean * wall reproduces rel_energy; samples land on
// the 100 ms grid with a final sample at the exact end. Gaussian noise is
// clipped to [0, cap_w].
SimRun simulate_run(const SimDevice& device, const powercap::Workload& workload, double cap_w,
                    std::uint64_t seed, std::int64_t start_ms = 0);

// Same run with the workload shortened to `fraction` of its duration; with
// fraction == 1 the output is byte-identical to simulate_run.
SimRun simulate_fraction(const SimDevice& device, const powercap::Workload& workload,
                         double cap_w, std::uint64_t seed, double fraction,
                         std::int64_t start_ms = 0);

struct SimDatacenterProfile {
    double winter_mean_pue = 1.1;
    double summer_mean_pue = 1.5;
    double diurnal_amplitude = 0.05; // half of the within-day swing
    double noise_stddev = 0.0;
    double it_power_w = 1e6; // constant IT load behind the meter
    std::uint64_t seed = 0;
};

// Hourly facility/IT meter readings for a calendar year. PUE follows a
// seasonal cosine peaking mid-July plus a diurnal cosine peaking at 14:00
// local, plus noise, clamped to >= 1.
std::vector<pue::PueSample> generate_pue_year(const SimDatacenterProfile& profile, int year,
                                              int tz_offset_minutes = 0);

// In-process backend for sweep tests and the CLI's simulated mode. Each run
// draws a fresh seed from the device seed and a per-device run counter, so a
// sweep is reproducible end to end.
class SimBackend : public powercap::CapBackend {
public:
    explicit SimBackend(std::vector<SimDevice> devices);

    const powercap::DeviceClass& device_class(const telemetry::DeviceId& device) const override;
    double get_cap(const telemetry::DeviceId& device) const override;
    double set_cap(const telemetry::DeviceId& device, double watts) override;
    powercap::WorkloadRun run(const telemetry::DeviceId& device,
                              const powercap::Workload& workload) override;

    const SimDevice& device(const telemetry::DeviceId& id) const;

private:
    struct State {
        SimDevice device;
        powercap::DeviceClass cls;
        double current_cap_w = 0.0;
        std::uint64_t run_counter = 0;
    };

    State& state_for(const telemetry::DeviceId& device);
    const State& state_for(const telemetry::DeviceId& device) const;

    std::map<telemetry::DeviceId, State> states_;
};

struct Scenario {
    std::vector<SimDevice> devices;
    powercap::Workload workload;
    std::vector<double> caps_w;
    std::optional<SimDatacenterProfile> datacenter;
};

SimDevice device_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SimDevice& device);
SimDatacenterProfile datacenter_from_json(const nlohmann::json& j);
Scenario scenario_from_json(const nlohmann::json& j);

} // namespace wattwise::sim

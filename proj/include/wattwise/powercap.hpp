#pragma once

#include <limits>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wattwise/telemetry.hpp"

namespace wattwise::powercap {

// Cap limits for one GPU model. Shipped as data (see Config) so new hardware
// needs no code change.
struct DeviceClass {
    std::string name;
    double min_cap_w = 0.0;
    double max_cap_w = 0.0;
    double default_cap_w = 0.0;
};

struct CapSetting {
    double watts = 0.0;
    std::string device_class;
};

// Wall time and energy of a run at some cap, as ratios to the same run at the
// device's default cap. (1,1) at the default cap by definition.
struct RelPerf {
    double rel_time = 1.0;
    double rel_energy = 1.0;
};

enum class Provenance { Measured, Configured };

struct CapProfile {
    CapSetting default_cap;
    std::map<double, RelPerf> points; // keyed by cap watts
    Provenance provenance = Provenance::Configured;

    double min_watts() const;
    double max_watts() const;
};

nlohmann::json to_json(const CapProfile& profile);
CapProfile profile_from_json(const nlohmann::json& j);

struct RawMeasurement {
    double seconds = 0.0;
    double joules = 0.0;
};

// Divides every measurement by the default-cap measurement; the default maps
// to exactly (1,1). Throws DomainError on a missing default cap or a
// nonpositive measurement.
CapProfile normalize_profile(const std::map<double, RawMeasurement>& raw,
                             const CapSetting& default_cap,
                             Provenance provenance = Provenance::Measured);

// Piecewise-linear on rel_time and rel_energy independently; exact at
// measured points. Refuses to extrapolate outside [min point, max point].
RelPerf interpolate(const CapProfile& profile, double watts);

// Operating-point selection policy. The budget form reads "at most this much
// slower than the default cap" as a rel_time ratio (1.10 = 10% slower).
struct Policy {
    enum class Kind { MinEnergy, MinEnergyWithSlowdownBudget, MinEdp };

    Kind kind = Kind::MinEnergy;
    double slowdown_budget = std::numeric_limits<double>::infinity();

    static Policy min_energy() { return {Kind::MinEnergy, {}}; }
    static Policy with_slowdown_budget(double budget);
    static Policy min_edp() { return {Kind::MinEdp, {}}; }

    // "min-energy" | "min-edp" | "budget:<ratio>"
    static Policy parse(std::string_view text);
    std::string str() const;
};

// Argmin over measured points only; interpolation is for reporting, not
// optimization. Ties within 1e-6 relative resolve toward the higher cap.
// Throws DomainError when a slowdown budget excludes every point.
CapSetting select_cap(const CapProfile& profile, const Policy& policy);

struct Workload {
    double base_duration_s = 0.0; // wall time at the default cap
    int steps = 1;
};

struct WorkloadRun {
    double wall_seconds = 0.0;
    telemetry::SampleSeries series;
};

// A cap-controllable workload runner. Cap changes are serialized per device
// by the implementation; profiles built from it are immutable.
class CapBackend {
public:
    virtual ~CapBackend() = default;

    virtual const DeviceClass& device_class(const telemetry::DeviceId& device) const = 0;
    virtual double get_cap(const telemetry::DeviceId& device) const = 0;
    // Returns the previous cap so callers can restore it.
    virtual double set_cap(const telemetry::DeviceId& device, double watts) = 0;
    virtual WorkloadRun run(const telemetry::DeviceId& device, const Workload& workload) = 0;
};

// For each cap: set it, run the workload, integrate the telemetry, record
// wall time; then normalize against the default cap. The device is restored
// to its default cap on success and on every error path. The cap list must
// include the device's default cap.
CapProfile run_sweep(CapBackend& backend, const telemetry::DeviceId& device,
                     const std::vector<double>& caps_w, const Workload& workload);

// Adapter over the vendor command-line utility (nvidia-smi). Cap control
// only: it cannot launch workloads, so run() always throws. Untested in CI;
// selected via the WATTWISE_BACKEND environment variable.
class NvidiaSmiBackend : public CapBackend {
public:
    explicit NvidiaSmiBackend(DeviceClass device_class);

    const DeviceClass& device_class(const telemetry::DeviceId& device) const override;
    double get_cap(const telemetry::DeviceId& device) const override;
    double set_cap(const telemetry::DeviceId& device, double watts) override;
    WorkloadRun run(const telemetry::DeviceId& device, const Workload& workload) override;

private:
    DeviceClass class_;
};

} // namespace wattwise::powercap

#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "wattwise/telemetry.hpp"

namespace wattwise::energy {

inline constexpr double kJoulesPerKwh = 3.6e6;

struct EnergyIntegral {
    double joules = 0.0;
    // True when at least one segment spanned a flagged gap and was excluded.
    bool partial = false;
};

// Trapezoidal integral of power over time. 0 or 1 samples integrate to 0 J.
// Segments wider than the gap threshold contribute nothing and mark the
// result partial rather than inventing energy. Throws DomainError on a
// non-strictly-increasing series.
EnergyIntegral integrate(const telemetry::SampleSeries& series);

// Job-scoped energy account with per-device breakdown.
struct EnergyReport {
    std::string job_id;
    std::map<telemetry::DeviceId, double> per_device_j;
    double total_j = 0.0;
    double duration_s = 0.0;
    double mean_power_w = 0.0;
    bool partial = false;
};

// Expects each series already sliced to the job window. Throws DomainError
// naming the device when a listed device has no samples.
EnergyReport aggregate_job(const telemetry::JobRecord& job,
                           const telemetry::SeriesByDevice& series);

// Linear projection under the constant-average-power observation: a run cut
// to the given fraction of its steps consumes that fraction of the energy.
// Fraction must lie in (0, 1].
double project_energy(const EnergyReport& report, double step_fraction);

// Deterministic text block: per-job kWh breakdown, total kWh, and the
// facility-adjusted total when a mean PUE is supplied. Template is stable so
// CI diffs stay meaningful (see README).
std::string render_energy_statement(const std::vector<EnergyReport>& reports,
                                    std::optional<double> mean_pue = std::nullopt,
                                    int kwh_sig_figs = 3);

nlohmann::json to_json(const EnergyReport& report);
EnergyReport report_from_json(const nlohmann::json& j);

} // namespace wattwise::energy

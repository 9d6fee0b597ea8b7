#include "wattwise/energy.hpp"

#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "wattwise/common.hpp"

namespace wattwise::energy {

EnergyIntegral integrate(const telemetry::SampleSeries& series) {
    EnergyIntegral result;
    if (series.samples.size() < 2) {
        return result;
    }
    const std::int64_t gap_threshold =
        std::int64_t{telemetry::kGapFactor} * series.nominal_interval_ms;
    KahanSum sum;
    for (std::size_t i = 1; i < series.samples.size(); ++i) {
        const auto& a = series.samples[i - 1];
        const auto& b = series.samples[i];
        const std::int64_t dt_ms = b.ts_ms - a.ts_ms;
        if (dt_ms <= 0) {
            throw DomainError(fmt::format(
                "series for device {} not strictly increasing at index {} ({} -> {})",
                series.device.str(), i, a.ts_ms, b.ts_ms));
        }
        if (dt_ms > gap_threshold) {
            result.partial = true;
            continue;
        }
        sum.add(0.5 * (a.power_w + b.power_w) * (static_cast<double>(dt_ms) / 1000.0));
    }
    result.joules = sum.value();
    return result;
}

EnergyReport aggregate_job(const telemetry::JobRecord& job,
                           const telemetry::SeriesByDevice& series) {
    if (job.devices.empty()) {
        throw DomainError(fmt::format("job {}: no devices listed", job.job_id));
    }
    EnergyReport report;
    report.job_id = job.job_id;
    KahanSum total;
    for (const telemetry::DeviceId& device : job.devices) {
        const auto it = series.find(device);
        if (it == series.end() || it->second.empty()) {
            throw DomainError(
                fmt::format("job {}: no telemetry for device {}", job.job_id, device.str()));
        }
        const EnergyIntegral integral = integrate(it->second);
        report.per_device_j[device] = integral.joules;
        report.partial = report.partial || integral.partial;
        total.add(integral.joules);
    }
    report.total_j = total.value();
    report.duration_s = static_cast<double>(job.end_ms - job.start_ms) / 1000.0;
    report.mean_power_w = report.total_j / report.duration_s;
    return report;
}

double project_energy(const EnergyReport& report, double step_fraction) {
    if (!(step_fraction > 0.0) || step_fraction > 1.0) {
        throw DomainError(fmt::format("step fraction {} outside (0,1]", step_fraction));
    }
    return report.total_j * step_fraction;
}

std::string render_energy_statement(const std::vector<EnergyReport>& reports,
                                    std::optional<double> mean_pue, int kwh_sig_figs) {
    KahanSum total_j;
    for (const EnergyReport& r : reports) {
        total_j.add(r.total_j);
    }
    const double total_kwh = total_j.value() / kJoulesPerKwh;

    std::string out;
    out += "ENERGY STATEMENT\n";
    out += "----------------\n";
    out += fmt::format("jobs covered: {}\n", reports.size());
    for (const EnergyReport& r : reports) {
        out += fmt::format("  {}  {} kWh{}\n", r.job_id,
                           format_significant(r.total_j / kJoulesPerKwh, kwh_sig_figs),
                           r.partial ? " (partial: telemetry gaps excluded)" : "");
    }
    out += fmt::format(
        "The workloads covered by this statement consumed a total of {} kWh.\n",
        format_significant(total_kwh, kwh_sig_figs));
    if (mean_pue) {
        out += fmt::format(
            "With a facility PUE of {}, facility-adjusted consumption is {} kWh.\n",
            format_significant(*mean_pue, kwh_sig_figs),
            format_significant(total_kwh * *mean_pue, kwh_sig_figs));
    }
    return out;
}

nlohmann::json to_json(const EnergyReport& report) {
    nlohmann::json per_device = nlohmann::json::object();
    for (const auto& [device, joules] : report.per_device_j) {
        per_device[device.str()] = joules;
    }
    return {{"job_id", report.job_id},   {"per_device_j", per_device},
            {"total_j", report.total_j}, {"duration_s", report.duration_s},
            {"mean_power_w", report.mean_power_w}, {"partial", report.partial}};
}

EnergyReport report_from_json(const nlohmann::json& j) {
    EnergyReport report;
    try {
        report.job_id = j.at("job_id").get<std::string>();
        for (const auto& [key, value] : j.at("per_device_j").items()) {
            report.per_device_j[telemetry::DeviceId::parse(key)] = value.get<double>();
        }
        report.total_j = j.at("total_j").get<double>();
        report.duration_s = j.at("duration_s").get<double>();
        report.mean_power_w = j.at("mean_power_w").get<double>();
        report.partial = j.value("partial", false);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("energy report: {}", e.what()));
    }
    return report;
}

} // namespace wattwise::energy

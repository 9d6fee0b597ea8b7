#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <nlohmann/json.hpp>

#include "wattwise/common.hpp"
#include "wattwise/config.hpp"
#include "wattwise/energy.hpp"
#include "wattwise/powercap.hpp"
#include "wattwise/pue.hpp"
#include "wattwise/scheduler.hpp"
#include "wattwise/simulator.hpp"
#include "wattwise/telemetry.hpp"

namespace {

using namespace wattwise;

// Flag combinations CLI11 cannot express on its own (maps to exit code 1).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(fmt::format("cannot open '{}'", path));
    }
    return in;
}

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in = open_input(path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(fmt::format("{}: {}", path, e.what()));
    }
    return j;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw ParseError(fmt::format("cannot open '{}' for writing", path));
    }
    return out;
}

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string format = "json";
    Config cfg;

    void finalize() { cfg = config_path.empty() ? default_config() : load_config(config_path); }
    bool csv() const { return format == "csv"; }
    int tz() const { return cfg.tz_offset_minutes; }
};

// ---------------------------------------------------------------- integrate

struct IntegrateOpts {
    std::string telemetry_path;
    std::string jobs_path;
};

void cmd_integrate(const Globals& g, const IntegrateOpts& o) {
    std::ifstream tin = open_input(o.telemetry_path);
    const telemetry::SeriesByDevice all = telemetry::read_telemetry_csv(tin);
    std::ifstream jin = open_input(o.jobs_path);
    const std::vector<telemetry::JobRecord> jobs = telemetry::read_job_records(jin);

    std::vector<energy::EnergyReport> reports;
    reports.reserve(jobs.size());
    for (const telemetry::JobRecord& job : jobs) {
        telemetry::SeriesByDevice sliced;
        for (const telemetry::DeviceId& dev : job.devices) {
            const auto it = all.find(dev);
            if (it != all.end()) {
                sliced[dev] = telemetry::slice_for_job(it->second, job);
            }
        }
        reports.push_back(energy::aggregate_job(job, sliced));
    }

    if (g.csv()) {
        std::string out = "job_id,total_j,duration_s,mean_power_w,partial\n";
        for (const energy::EnergyReport& r : reports) {
            out += fmt::format("{},{},{},{},{}\n", r.job_id, r.total_j, r.duration_s,
                               r.mean_power_w, r.partial ? 1 : 0);
        }
        std::cout << out;
    } else {
        nlohmann::json arr = nlohmann::json::array();
        for (const energy::EnergyReport& r : reports) {
            arr.push_back(energy::to_json(r));
        }
        std::cout << arr.dump(2) << "\n";
    }
}

// -------------------------------------------------------------------- sweep

struct SweepOpts {
    std::string scenario_path;
    std::string policy = "min-energy";
    std::string device;
    std::vector<double> caps;
};

telemetry::DeviceId pick_device(const sim::Scenario& sc, const std::string& flag) {
    if (!flag.empty()) {
        return telemetry::DeviceId::parse(flag);
    }
    if (sc.devices.size() == 1) {
        return sc.devices.front().id;
    }
    throw UsageError("scenario has multiple devices; pick one with --device");
}

void cmd_sweep(const Globals& g, const SweepOpts& o) {
    sim::Scenario sc = sim::scenario_from_json(load_json_file(o.scenario_path));
    if (g.seed) {
        for (std::size_t i = 0; i < sc.devices.size(); ++i) {
            sc.devices[i].seed = mix_seed(*g.seed, i);
        }
    }
    std::vector<double> caps = o.caps.empty() ? sc.caps_w : o.caps;
    if (caps.empty()) {
        throw UsageError("no caps to sweep (pass --caps or set caps_w in the scenario)");
    }
    const telemetry::DeviceId device = pick_device(sc, o.device);
    const powercap::Policy policy = powercap::Policy::parse(o.policy);

    const char* env = std::getenv("WATTWISE_BACKEND");
    const std::string backend_name = env && *env ? env : "sim";
    std::unique_ptr<powercap::CapBackend> backend;
    if (backend_name == "sim") {
        backend = std::make_unique<sim::SimBackend>(sc.devices);
    } else if (backend_name == "nvidia-smi") {
        const sim::SimDevice* entry = nullptr;
        for (const sim::SimDevice& d : sc.devices) {
            if (d.id == device) {
                entry = &d;
            }
        }
        if (entry == nullptr) {
            throw DomainError(fmt::format("unknown device {}", device.str()));
        }
        backend = std::make_unique<powercap::NvidiaSmiBackend>(powercap::DeviceClass{
            entry->device_class, entry->cap_min_w, entry->cap_max_w, entry->default_cap_w});
    } else {
        throw UsageError(
            fmt::format("WATTWISE_BACKEND='{}' (expected 'sim' or 'nvidia-smi')", backend_name));
    }

    const powercap::CapProfile profile = powercap::run_sweep(*backend, device, caps, sc.workload);
    const powercap::CapSetting chosen = powercap::select_cap(profile, policy);

    if (g.csv()) {
        std::string out = "watts,rel_time,rel_energy\n";
        for (const auto& [watts, perf] : profile.points) {
            out += fmt::format("{},{},{}\n", watts, perf.rel_time, perf.rel_energy);
        }
        out += fmt::format("selected_cap_w,{},\n", chosen.watts);
        std::cout << out;
    } else {
        nlohmann::json j;
        j["device"] = device.str();
        j["policy"] = policy.str();
        j["profile"] = powercap::to_json(profile);
        j["selected_cap_w"] = chosen.watts;
        std::cout << j.dump(2) << "\n";
    }
}

// --------------------------------------------------------------------- plan

struct PlanOpts {
    std::string centers_path;
    std::string meter_path;
    std::string scenario_path;
    std::string job_id = "job";
    double duration_s = 3600.0;
    double it_energy_j = 0.0;
    std::string date;
    std::int64_t step_ms = 3'600'000;
    int horizon_hours = 48;
    int year = 2020;
    std::string candidates_out;
};

// One 24-hour block of duration-weighted hourly means per covered civil day,
// optionally stopping before `before` (exclusive).
std::vector<pue::HourlyPue> hourly_history(const std::vector<pue::PueSample>& samples,
                                           int tz_offset_minutes,
                                           std::optional<pue::CivilDate> before) {
    std::vector<pue::HourlyPue> history;
    if (samples.empty()) {
        return history;
    }
    std::int64_t lo = samples.front().start_ms;
    std::int64_t hi = samples.front().end_ms;
    for (const pue::PueSample& s : samples) {
        lo = std::min(lo, s.start_ms);
        hi = std::max(hi, s.end_ms);
    }
    pue::CivilDate day = pue::civil_from_ms(lo, tz_offset_minutes);
    while (pue::ms_from_civil(day, 0, tz_offset_minutes) < hi) {
        if (before && !(day < *before)) {
            break;
        }
        const auto hours = pue::hourly_averages(samples, day, tz_offset_minutes);
        history.insert(history.end(), hours.begin(), hours.end());
        day = pue::civil_from_ms(
            pue::ms_from_civil(day, 0, tz_offset_minutes) + 86'400'000, tz_offset_minutes);
    }
    return history;
}

void cmd_plan(const Globals& g, const PlanOpts& o) {
    const int modes = int(!o.centers_path.empty()) + int(!o.meter_path.empty()) +
                      int(!o.scenario_path.empty());
    if (modes != 1) {
        throw UsageError("pass exactly one of --centers, --meter, --scenario");
    }
    if (!(o.it_energy_j > 0.0)) {
        throw UsageError("--it-energy-j must be positive");
    }
    const sched::JobSpec job{o.job_id, o.it_energy_j, o.duration_s};

    if (!o.centers_path.empty()) {
        std::map<std::string, double> centers;
        try {
            centers = load_json_file(o.centers_path).get<std::map<std::string, double>>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(fmt::format("{}: {}", o.centers_path, e.what()));
        }
        const std::vector<sched::DatacenterRank> ranks = sched::rank_datacenters(job, centers);
        if (g.csv()) {
            std::string out = "name,mean_pue,facility_j\n";
            for (const sched::DatacenterRank& r : ranks) {
                out += fmt::format("{},{},{}\n", r.name, r.mean_pue, r.facility_j);
            }
            std::cout << out;
        } else {
            nlohmann::json arr = nlohmann::json::array();
            for (const sched::DatacenterRank& r : ranks) {
                arr.push_back({{"name", r.name},
                               {"mean_pue", r.mean_pue},
                               {"facility_j", r.facility_j}});
            }
            std::cout << arr.dump(2) << "\n";
        }
        return;
    }

    std::vector<pue::PueSample> samples;
    if (!o.meter_path.empty()) {
        std::ifstream in = open_input(o.meter_path);
        samples = pue::read_meter_csv(in);
    } else {
        const sim::Scenario sc = sim::scenario_from_json(load_json_file(o.scenario_path));
        if (!sc.datacenter) {
            throw DomainError("scenario has no datacenter profile to plan against");
        }
        sim::SimDatacenterProfile profile = *sc.datacenter;
        if (g.seed) {
            profile.seed = *g.seed;
        }
        samples = sim::generate_pue_year(profile, o.year, g.tz());
    }

    std::optional<pue::CivilDate> date;
    if (!o.date.empty()) {
        date = pue::parse_date(o.date);
    }
    const std::vector<pue::HourlyPue> history = hourly_history(samples, g.tz(), date);
    const pue::PueForecast forecast = pue::forecast_pue(history, o.horizon_hours, g.tz());

    const pue::CivilDate plan_day = date ? *date : pue::civil_from_ms(forecast.start_ms, g.tz());
    sched::CandidateWindow window;
    window.begin_ms = pue::ms_from_civil(plan_day, 0, g.tz());
    window.end_ms = window.begin_ms + 23 * 3'600'000;
    window.step_ms = o.step_ms;

    const std::vector<sched::Candidate> candidates =
        sched::evaluate_candidates(job, window, forecast);
    const sched::Recommendation rec = sched::plan_start(job, window, forecast);

    if (!o.candidates_out.empty()) {
        std::ofstream out = open_output(o.candidates_out);
        out << "candidate_start,mean_pue,facility_j\n";
        for (const sched::Candidate& c : candidates) {
            out << fmt::format("{},{},{}\n", format_rfc3339(c.start_ms, g.tz()), c.mean_pue,
                               c.facility_j);
        }
    }

    if (g.csv()) {
        std::cout << "start,mean_pue,facility_j,savings_vs_worst_pct\n"
                  << fmt::format("{},{},{},{}\n", format_rfc3339(rec.start_ms, g.tz()),
                                 rec.mean_pue, rec.facility_j, rec.savings_vs_worst_pct);
    } else {
        nlohmann::json j;
        j["job_id"] = job.job_id;
        j["start"] = format_rfc3339(rec.start_ms, g.tz());
        j["start_ms"] = rec.start_ms;
        j["mean_pue"] = rec.mean_pue;
        j["facility_j"] = rec.facility_j;
        j["savings_vs_worst_pct"] = rec.savings_vs_worst_pct;
        std::cout << j.dump(2) << "\n";
    }
}

// ------------------------------------------------------------------- report

struct ReportOpts {
    std::string reports_path;
    std::optional<double> pue;
    std::string meter_path;
    int year = 2020;
};

void cmd_report(const Globals& g, const ReportOpts& o) {
    const nlohmann::json arr = load_json_file(o.reports_path);
    if (!arr.is_array()) {
        throw ParseError(fmt::format("{}: expected a JSON array of reports", o.reports_path));
    }
    std::vector<energy::EnergyReport> reports;
    reports.reserve(arr.size());
    for (const nlohmann::json& rj : arr) {
        reports.push_back(energy::report_from_json(rj));
    }
    std::string out = energy::render_energy_statement(reports, o.pue, g.cfg.kwh_sig_figs);
    if (!o.meter_path.empty()) {
        std::ifstream in = open_input(o.meter_path);
        const std::vector<pue::PueSample> samples = pue::read_meter_csv(in);
        out += "\n";
        out += pue::variation_table_csv(pue::variation_table(samples, o.year, g.tz()));
    }
    std::cout << out;
}

// ---------------------------------------------------------------------- pue

struct PueOpts {
    std::string meter_path;
    std::string date;
    std::optional<int> year;
};

void cmd_pue(const Globals& g, const PueOpts& o) {
    std::ifstream in = open_input(o.meter_path);
    const std::vector<pue::PueSample> samples = pue::read_meter_csv(in);

    if (!o.date.empty() == o.year.has_value()) {
        throw UsageError("pass exactly one of --date or --year");
    }
    if (!o.date.empty()) {
        const pue::CivilDate date = pue::parse_date(o.date);
        const auto hourly = pue::hourly_averages(samples, date, g.tz());
        const pue::VariationStat stat = pue::daily_variation(hourly);
        if (g.csv()) {
            std::string out = "hour,mean_pue,sample_count\n";
            for (const pue::HourlyPue& h : hourly) {
                out += h.mean_pue ? fmt::format("{},{},{}\n", h.hour, *h.mean_pue, h.sample_count)
                                  : fmt::format("{},,{}\n", h.hour, h.sample_count);
            }
            out += fmt::format("variation_pct,{},\n", stat.value_pct);
            std::cout << out;
        } else {
            nlohmann::json j;
            j["date"] = date.str();
            nlohmann::json hours = nlohmann::json::array();
            for (const pue::HourlyPue& h : hourly) {
                nlohmann::json hj;
                hj["hour"] = h.hour;
                hj["mean_pue"] = h.mean_pue ? nlohmann::json(*h.mean_pue) : nlohmann::json();
                hj["sample_count"] = h.sample_count;
                hours.push_back(hj);
            }
            j["hourly"] = hours;
            j["variation_pct"] = stat.value_pct;
            j["complete"] = stat.complete;
            std::cout << j.dump(2) << "\n";
        }
        return;
    }

    const pue::VariationTable table = pue::variation_table(samples, *o.year, g.tz());
    if (g.csv()) {
        std::cout << pue::variation_table_csv(table);
    } else {
        nlohmann::json j;
        j["year"] = *o.year;
        nlohmann::json monthly = nlohmann::json::array();
        for (const pue::VariationTable::Row& row : table.monthly) {
            monthly.push_back({{"month", row.month},
                               {"variation_pct", row.stat.value_pct},
                               {"complete", row.stat.complete}});
        }
        j["monthly"] = monthly;
        j["annual"] = table.annual ? nlohmann::json{{"variation_pct", table.annual->value_pct},
                                                    {"complete", table.annual->complete}}
                                   : nlohmann::json();
        std::cout << j.dump(2) << "\n";
    }
}

// ---------------------------------------------------------------------- sim

struct SimRunOpts {
    std::string scenario_path;
    std::string device;
    std::optional<double> cap_w;
    std::int64_t start_ms = 0;
    std::string out_path;
};

void cmd_sim_run(const Globals& g, const SimRunOpts& o) {
    sim::Scenario sc = sim::scenario_from_json(load_json_file(o.scenario_path));
    const telemetry::DeviceId device = pick_device(sc, o.device);
    const sim::SimDevice* entry = nullptr;
    for (const sim::SimDevice& d : sc.devices) {
        if (d.id == device) {
            entry = &d;
        }
    }
    if (entry == nullptr) {
        throw DomainError(fmt::format("unknown device {}", device.str()));
    }
    const double cap = o.cap_w.value_or(entry->default_cap_w);
    const std::uint64_t seed = g.seed.value_or(entry->seed);
    const sim::SimRun run = sim::simulate_run(*entry, sc.workload, cap, seed, o.start_ms);

    if (o.out_path.empty()) {
        telemetry::write_telemetry_csv(std::cout, run.series);
    } else {
        std::ofstream out = open_output(o.out_path);
        telemetry::write_telemetry_csv(out, run.series);
    }
    std::cerr << fmt::format("simulated {}s at cap {} W ({} samples)\n", run.wall_seconds, cap,
                             run.series.size());
}

struct SimPueYearOpts {
    std::string profile_path;
    std::string scenario_path;
    int year = 2020;
    std::string out_path;
};

void cmd_sim_pue_year(const Globals& g, const SimPueYearOpts& o) {
    if (o.profile_path.empty() == o.scenario_path.empty()) {
        throw UsageError("pass exactly one of --profile or --scenario");
    }
    sim::SimDatacenterProfile profile;
    if (!o.profile_path.empty()) {
        profile = sim::datacenter_from_json(load_json_file(o.profile_path));
    } else {
        const sim::Scenario sc = sim::scenario_from_json(load_json_file(o.scenario_path));
        if (!sc.datacenter) {
            throw DomainError("scenario has no datacenter profile");
        }
        profile = *sc.datacenter;
    }
    if (g.seed) {
        profile.seed = *g.seed;
    }
    const std::vector<pue::PueSample> samples = sim::generate_pue_year(profile, o.year, g.tz());
    if (o.out_path.empty()) {
        pue::write_meter_csv(std::cout, samples);
    } else {
        std::ofstream out = open_output(o.out_path);
        pue::write_meter_csv(out, samples);
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"GPU workload energy toolkit: telemetry integration, power-cap sweeps, "
                 "PUE statistics, and energy-aware scheduling"};
    app.require_subcommand(1);

    Globals g;
    app.add_option("--config", g.config_path, "JSON config file");
    app.add_option("--seed", g.seed, "Override scenario/device RNG seeds");
    app.add_option("--format", g.format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();

    IntegrateOpts integrate_opts;
    CLI::App* integrate = app.add_subcommand("integrate", "Integrate telemetry into per-job energy");
    integrate->fallthrough();
    integrate->add_option("--telemetry", integrate_opts.telemetry_path, "Telemetry CSV")
        ->required();
    integrate->add_option("--jobs", integrate_opts.jobs_path, "Job records (JSON lines)")
        ->required();

    SweepOpts sweep_opts;
    CLI::App* sweep = app.add_subcommand("sweep", "Sweep power caps and pick an operating point");
    sweep->fallthrough();
    sweep->add_option("--scenario", sweep_opts.scenario_path, "Scenario JSON")->required();
    sweep->add_option("--policy", sweep_opts.policy,
                      "min-energy | min-edp | budget:<rel_time>")
        ->capture_default_str();
    sweep->add_option("--device", sweep_opts.device, "Device id (host:index or index)");
    sweep->add_option("--caps", sweep_opts.caps, "Caps to sweep (overrides scenario)")
        ->delimiter(',');

    PlanOpts plan_opts;
    CLI::App* plan = app.add_subcommand("plan", "Recommend a start time or rank datacenters");
    plan->fallthrough();
    plan->add_option("--centers", plan_opts.centers_path, "JSON map of name -> mean PUE");
    plan->add_option("--meter", plan_opts.meter_path, "Meter CSV history");
    plan->add_option("--scenario", plan_opts.scenario_path, "Scenario JSON with a datacenter");
    plan->add_option("--job-id", plan_opts.job_id, "Job id")->capture_default_str();
    plan->add_option("--duration-s", plan_opts.duration_s, "Job duration in seconds")
        ->capture_default_str();
    plan->add_option("--it-energy-j", plan_opts.it_energy_j, "Estimated IT energy in joules");
    plan->add_option("--date", plan_opts.date, "Candidate day (YYYY-MM-DD, datacenter-local)");
    plan->add_option("--step-ms", plan_opts.step_ms, "Candidate step")->capture_default_str();
    plan->add_option("--horizon-hours", plan_opts.horizon_hours, "Forecast horizon")
        ->capture_default_str();
    plan->add_option("--year", plan_opts.year, "Year for scenario-generated meter data")
        ->capture_default_str();
    plan->add_option("--candidates-out", plan_opts.candidates_out,
                     "Write per-candidate CSV to this path");

    ReportOpts report_opts;
    CLI::App* report = app.add_subcommand("report", "Render an energy statement");
    report->fallthrough();
    report->add_option("--reports", report_opts.reports_path, "EnergyReports JSON array")
        ->required();
    report->add_option("--pue", report_opts.pue, "Facility PUE for the adjusted total");
    report->add_option("--meter", report_opts.meter_path, "Meter CSV for the variation table");
    report->add_option("--year", report_opts.year, "Year for the variation table")
        ->capture_default_str();

    PueOpts pue_opts;
    CLI::App* pue_cmd = app.add_subcommand("pue", "PUE statistics from meter data");
    pue_cmd->fallthrough();
    pue_cmd->add_option("--meter", pue_opts.meter_path, "Meter CSV")->required();
    pue_cmd->add_option("--date", pue_opts.date, "Hourly means for one day (YYYY-MM-DD)");
    pue_cmd->add_option("--year", pue_opts.year, "Variation table for one year");

    CLI::App* sim_cmd = app.add_subcommand("sim", "Deterministic simulator");
    sim_cmd->fallthrough();
    sim_cmd->require_subcommand(1);
    SimRunOpts sim_run_opts;
    CLI::App* sim_run = sim_cmd->add_subcommand("run", "Emit telemetry for one simulated run");
    sim_run->fallthrough();
    sim_run->add_option("--scenario", sim_run_opts.scenario_path, "Scenario JSON")->required();
    sim_run->add_option("--device", sim_run_opts.device, "Device id");
    sim_run->add_option("--cap", sim_run_opts.cap_w, "Cap in watts (default: device default)");
    sim_run->add_option("--start-ms", sim_run_opts.start_ms, "First sample timestamp")
        ->capture_default_str();
    sim_run->add_option("--out", sim_run_opts.out_path, "Telemetry CSV path (default stdout)");
    SimPueYearOpts sim_year_opts;
    CLI::App* sim_year =
        sim_cmd->add_subcommand("pue-year", "Emit a year of hourly meter readings");
    sim_year->fallthrough();
    sim_year->add_option("--profile", sim_year_opts.profile_path, "Datacenter profile JSON");
    sim_year->add_option("--scenario", sim_year_opts.scenario_path,
                         "Scenario JSON with a datacenter");
    sim_year->add_option("--year", sim_year_opts.year, "Calendar year")->capture_default_str();
    sim_year->add_option("--out", sim_year_opts.out_path, "Meter CSV path (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        g.finalize();
        if (app.got_subcommand(integrate)) {
            cmd_integrate(g, integrate_opts);
        } else if (app.got_subcommand(sweep)) {
            cmd_sweep(g, sweep_opts);
        } else if (app.got_subcommand(plan)) {
            cmd_plan(g, plan_opts);
        } else if (app.got_subcommand(report)) {
            cmd_report(g, report_opts);
        } else if (app.got_subcommand(pue_cmd)) {
            cmd_pue(g, pue_opts);
        } else if (app.got_subcommand(sim_cmd)) {
            if (sim_cmd->got_subcommand(sim_run)) {
                cmd_sim_run(g, sim_run_opts);
            } else {
                cmd_sim_pue_year(g, sim_year_opts);
            }
        }
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}

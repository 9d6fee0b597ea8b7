#pragma once

#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

#include <doctest.h>

#include "wattwise/powercap.hpp"
#include "wattwise/pue.hpp"
#include "wattwise/simulator.hpp"
#include "wattwise/telemetry.hpp"

namespace testing {

// Inference-serving response curve (measured values at 100/150/200 W).
inline wattwise::powercap::CapProfile inference_profile() {
    wattwise::powercap::CapProfile p;
    p.default_cap = {250.0, "V100"};
    p.points[100.0] = {2.14, 0.890};
    p.points[150.0] = {1.227, 0.758};
    p.points[200.0] = {1.082, 0.880};
    p.points[250.0] = {1.0, 1.0};
    p.provenance = wattwise::powercap::Provenance::Configured;
    return p;
}

// MLM training response curve (150 W point measured, rest filled in).
inline wattwise::powercap::CapProfile bert_profile() {
    wattwise::powercap::CapProfile p;
    p.default_cap = {250.0, "V100"};
    p.points[100.0] = {1.314, 0.893};
    p.points[150.0] = {1.085, 0.877};
    p.points[200.0] = {1.011, 0.948};
    p.points[250.0] = {1.0, 1.0};
    p.provenance = wattwise::powercap::Provenance::Configured;
    return p;
}

inline wattwise::sim::SimDevice make_device(std::string host = "gpu", int index = 0,
                                            double nominal_w = 140.0, double noise_w = 0.0,
                                            std::uint64_t seed = 1) {
    wattwise::sim::SimDevice d;
    d.id = {index, std::move(host)};
    d.device_class = "V100";
    d.nominal_draw_w = nominal_w;
    d.cap_min_w = 100.0;
    d.cap_max_w = 250.0;
    d.default_cap_w = 250.0;
    d.cap_response = bert_profile();
    d.noise_stddev_w = noise_w;
    d.seed = seed;
    return d;
}

inline wattwise::telemetry::SampleSeries constant_series(
    const wattwise::telemetry::DeviceId& device, std::int64_t start_ms, int count,
    std::int64_t dt_ms, double power_w, double cap_w = 250.0) {
    wattwise::telemetry::SampleSeries s;
    s.device = device;
    for (int i = 0; i < count; ++i) {
        wattwise::telemetry::PowerSample p;
        p.ts_ms = start_ms + i * dt_ms;
        p.device = device;
        p.power_w = power_w;
        p.cap_w = cap_w;
        s.samples.push_back(p);
    }
    return s;
}

// 24 hourly means for one day; NaN marks an absent hour.
inline std::array<wattwise::pue::HourlyPue, 24> hourly_day(const std::array<double, 24>& values,
                                                           wattwise::pue::CivilDate day = {2020,
                                                                                           7,
                                                                                           27}) {
    std::array<wattwise::pue::HourlyPue, 24> hours;
    for (int h = 0; h < 24; ++h) {
        hours[h].day = day;
        hours[h].hour = h;
        if (!std::isnan(values[h])) {
            hours[h].mean_pue = values[h];
            hours[h].sample_count = 1;
        }
    }
    return hours;
}

inline wattwise::pue::PueForecast make_forecast(std::int64_t start_ms,
                                                std::vector<double> hourly) {
    wattwise::pue::PueForecast f;
    f.start_ms = start_ms;
    f.hourly = std::move(hourly);
    return f;
}

// Scratch file removed on scope exit.
class TempFile {
public:
    explicit TempFile(const std::string& content, const std::string& suffix = ".tmp") {
        static std::atomic<int> counter{0};
        path_ = (std::filesystem::temp_directory_path() /
                 ("wattwise_test_" + std::to_string(::getpid()) + "_" +
                  std::to_string(counter++) + suffix))
                    .string();
        std::ofstream out(path_);
        out << content;
    }
    ~TempFile() { std::filesystem::remove(path_); }
    TempFile(const TempFile&) = delete;
    TempFile& operator=(const TempFile&) = delete;

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

inline std::string fixtures_dir() {
    const char* env = std::getenv("WATTWISE_FIXTURES");
    return env ? env : "fixtures";
}

inline std::string fixture_path(const std::string& name) {
    return fixtures_dir() + "/" + name;
}

struct CliResult {
    int exit_code = -1;
    std::string out;
};

// Runs the CLI under test (WATTWISE_BIN) with stderr dropped.
inline CliResult run_cli(const std::string& args) {
    const char* bin = std::getenv("WATTWISE_BIN");
    REQUIRE_MESSAGE(bin != nullptr, "WATTWISE_BIN must point at the wattwise binary");
    const std::string cmd = std::string(bin) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult result;
    char buf[4096];
    std::size_t n = 0;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) {
        result.out.append(buf, n);
    }
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

} // namespace testing

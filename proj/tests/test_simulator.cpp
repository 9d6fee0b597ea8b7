#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <vector>

#include "helpers.hpp"
#include "wattwise/common.hpp"
#include "wattwise/energy.hpp"
#include "wattwise/powercap.hpp"
#include "wattwise/pue.hpp"
#include "wattwise/simulator.hpp"

using namespace wattwise;
using namespace wattwise::sim;

TEST_CASE("gaussian stream is seeded and well-behaved") {
    Gaussian a(123);
    Gaussian b(123);
    Gaussian c(124);
    bool all_equal = true;
    bool any_differs = false;
    double sum = 0.0;
    double sum_sq = 0.0;
    constexpr int kN = 10000;
    for (int i = 0; i < kN; ++i) {
        const double va = a();
        all_equal = all_equal && va == b();
        any_differs = any_differs || va != c();
        REQUIRE(std::isfinite(va));
        sum += va;
        sum_sq += va * va;
    }
    CHECK(all_equal);
    CHECK(any_differs);
    const double mean = sum / kN;
    const double stddev = std::sqrt(sum_sq / kN - mean * mean);
    CHECK(std::abs(mean) < 0.05);
    CHECK(stddev == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("noise-free runs reproduce the configured tradeoff exactly") {
    const SimDevice dev = testing::make_device("gpu", 0, 140.0, 0.0, 9);
    const powercap::Workload workload{30.0, 1};

    const SimRun base = simulate_run(dev, workload, 250.0, 1);
    CHECK(base.wall_seconds == doctest::Approx(30.0).epsilon(1e-12));
    CHECK(energy::integrate(base.series).joules ==
          doctest::Approx(140.0 * 30.0).epsilon(1e-9));
    for (const auto& s : base.series.samples) {
        CHECK(s.power_w == doctest::Approx(140.0).epsilon(1e-12));
        CHECK(s.cap_w == 250.0);
    }

    for (const double cap : {100.0, 150.0, 200.0}) {
        const powercap::RelPerf rel = powercap::interpolate(dev.cap_response, cap);
        const SimRun run = simulate_run(dev, workload, cap, 1);
        CHECK(run.wall_seconds / base.wall_seconds ==
              doctest::Approx(rel.rel_time).epsilon(1e-9));
        CHECK(energy::integrate(run.series).joules / energy::integrate(base.series).joules ==
              doctest::Approx(rel.rel_energy).epsilon(1e-6));
    }
}

TEST_CASE("samples land on the 100 ms grid with an exact final sample") {
    const SimDevice dev = testing::make_device();
    const SimRun run = simulate_run(dev, {1.2345, 1}, 250.0, 1, 5000);
    // 1234.5 ms rounds to 1235: grid samples at 0..1200 plus the end point.
    REQUIRE(run.series.samples.size() == 14);
    CHECK(run.series.samples.front().ts_ms == 5000);
    CHECK(run.series.samples[1].ts_ms == 5100);
    CHECK(run.series.samples[12].ts_ms == 5000 + 1200);
    CHECK(run.series.samples.back().ts_ms == 5000 + 1235);
    CHECK(run.series.nominal_interval_ms == 100);
    CHECK(run.series.device == dev.id);
}

TEST_CASE("runs are validated") {
    const SimDevice dev = testing::make_device();
    CHECK_THROWS_AS(simulate_run(dev, {0.0, 1}, 250.0, 1), DomainError);
    CHECK_THROWS_AS(simulate_run(dev, {-3.0, 1}, 250.0, 1), DomainError);
    CHECK_THROWS_AS(simulate_run(dev, {1.0, 1}, 99.0, 1), DomainError);
    CHECK_THROWS_AS(simulate_run(dev, {1.0, 1}, 251.0, 1), DomainError);
}

TEST_CASE("noise is clipped to the cap") {
    const SimDevice dev = testing::make_device("gpu", 0, 140.0, 500.0, 3);
    const SimRun run = simulate_run(dev, {5.0, 1}, 150.0, 3);
    bool touched_floor = false;
    bool touched_cap = false;
    for (const auto& s : run.series.samples) {
        CHECK(s.power_w >= 0.0);
        CHECK(s.power_w <= 150.0);
        touched_floor = touched_floor || s.power_w == 0.0;
        touched_cap = touched_cap || s.power_w == 150.0;
    }
    // With a 500 W stddev both bounds are hit many times.
    CHECK(touched_floor);
    CHECK(touched_cap);
}

TEST_CASE("the same seed reproduces a run bit for bit") {
    const SimDevice dev = testing::make_device("gpu", 0, 140.0, 2.8, 7);
    const SimRun a = simulate_run(dev, {10.0, 1}, 200.0, 55);
    const SimRun b = simulate_run(dev, {10.0, 1}, 200.0, 55);
    const SimRun c = simulate_run(dev, {10.0, 1}, 200.0, 56);
    REQUIRE(a.series.samples.size() == b.series.samples.size());
    CHECK(a.series.samples == b.series.samples);
    CHECK(a.series.samples != c.series.samples);
}

TEST_CASE("fractional runs scale duration and energy together") {
    const SimDevice quiet = testing::make_device("gpu", 0, 140.0, 0.0, 7);
    const powercap::Workload workload{60.0, 1};

    SUBCASE("fraction 1 is byte-identical to the full run") {
        const SimRun full = simulate_run(quiet, workload, 150.0, 9);
        const SimRun same = simulate_fraction(quiet, workload, 150.0, 9, 1.0);
        CHECK(full.wall_seconds == same.wall_seconds);
        CHECK(full.series.samples == same.series.samples);
    }

    SUBCASE("smaller fractions scale linearly") {
        const SimDevice noisy = testing::make_device("gpu", 0, 140.0, 2.8, 7);
        const double full_j = energy::integrate(simulate_run(noisy, workload, 150.0, 9).series).joules;
        for (const double fraction : {0.25, 0.5, 0.75}) {
            const SimRun run = simulate_fraction(noisy, workload, 150.0, 9, fraction);
            CHECK(run.wall_seconds ==
                  doctest::Approx(fraction * 60.0 * 1.085).epsilon(1e-9));
            CHECK(energy::integrate(run.series).joules ==
                  doctest::Approx(fraction * full_j).epsilon(0.02));
        }
    }

    SUBCASE("fraction bounds") {
        CHECK_THROWS_AS(simulate_fraction(quiet, workload, 150.0, 9, 0.0), DomainError);
        CHECK_THROWS_AS(simulate_fraction(quiet, workload, 150.0, 9, -0.5), DomainError);
        CHECK_THROWS_AS(simulate_fraction(quiet, workload, 150.0, 9, 1.0001), DomainError);
    }
}

TEST_CASE("backend tracks caps per device") {
    SimBackend backend({testing::make_device("a", 0), testing::make_device("b", 1)});
    const telemetry::DeviceId a{0, "a"};
    const telemetry::DeviceId b{1, "b"};

    CHECK(backend.get_cap(a) == 250.0);
    CHECK(backend.device_class(a).name == "V100");
    CHECK(backend.set_cap(a, 150.0) == 250.0); // returns the previous cap
    CHECK(backend.get_cap(a) == 150.0);
    CHECK(backend.get_cap(b) == 250.0); // untouched

    CHECK_THROWS_AS(backend.set_cap(a, 99.0), DomainError);
    CHECK(backend.get_cap(a) == 150.0); // rejected change leaves the cap alone

    const telemetry::DeviceId ghost{7, "nowhere"};
    CHECK_THROWS_AS(backend.get_cap(ghost), DomainError);
    CHECK_THROWS_AS(backend.set_cap(ghost, 150.0), DomainError);
    CHECK_THROWS_AS(backend.run(ghost, {1.0, 1}), DomainError);
    CHECK(backend.device(a).id == a);
}

TEST_CASE("backend construction rejects bad fleets") {
    CHECK_THROWS_AS(SimBackend({}), DomainError);
    CHECK_THROWS_AS(SimBackend({testing::make_device("a", 0), testing::make_device("a", 0)}),
                    DomainError);
    SimDevice bad = testing::make_device();
    bad.nominal_draw_w = 0.0;
    CHECK_THROWS_AS(SimBackend({bad}), DomainError);
    bad = testing::make_device();
    bad.cap_min_w = 0.0;
    CHECK_THROWS_AS(SimBackend({bad}), DomainError);
    bad = testing::make_device();
    bad.default_cap_w = 300.0; // above cap_max_w
    CHECK_THROWS_AS(SimBackend({bad}), DomainError);
}

TEST_CASE("backend runs are reproducible across instances, fresh per call") {
    const SimDevice dev = testing::make_device("gpu", 0, 140.0, 2.8, 41);
    SimBackend first({dev});
    SimBackend second({dev});
    const powercap::Workload workload{5.0, 1};

    const auto r1 = first.run(dev.id, workload);
    const auto r2 = first.run(dev.id, workload);
    CHECK(r1.series.samples != r2.series.samples); // per-run counter advances

    CHECK(second.run(dev.id, workload).series.samples == r1.series.samples);
    CHECK(second.run(dev.id, workload).series.samples == r2.series.samples);
}

TEST_CASE("a sweep over the backend recovers the configured curve") {
    // 2% relative noise, the default when a scenario omits noise_stddev_w.
    const SimDevice dev = testing::make_device("gpu", 0, 140.0, 2.8, 21);
    SimBackend backend({dev});
    const auto profile =
        powercap::run_sweep(backend, dev.id, {100.0, 150.0, 200.0, 250.0}, {60.0, 1});
    for (const auto& [cap, perf] : profile.points) {
        const powercap::RelPerf expect = powercap::interpolate(dev.cap_response, cap);
        CHECK(perf.rel_time == doctest::Approx(expect.rel_time).epsilon(1e-6));
        CHECK(perf.rel_energy == doctest::Approx(expect.rel_energy).epsilon(0.01));
    }
}

TEST_CASE("generated meter years are contiguous hourly readings") {
    SimDatacenterProfile profile;
    profile.winter_mean_pue = 1.05;
    profile.summer_mean_pue = 1.49;
    profile.diurnal_amplitude = 0.075;
    profile.noise_stddev = 0.005;
    profile.it_power_w = 1e6;
    profile.seed = 77;

    const auto year = generate_pue_year(profile, 2020);
    REQUIRE(year.size() == 8784); // leap year
    CHECK(generate_pue_year(profile, 2021).size() == 8760);
    CHECK(year.front().start_ms == pue::ms_from_civil({2020, 1, 1}));
    for (std::size_t i = 0; i < year.size(); ++i) {
        CHECK(year[i].end_ms - year[i].start_ms == 3'600'000);
        if (i > 0) {
            CHECK(year[i].start_ms == year[i - 1].end_ms);
        }
        CHECK(year[i].it_j == 1e6 * 3600.0);
        CHECK(year[i].facility_j >= 0.0);
    }

    SUBCASE("determinism per seed") {
        const auto again = generate_pue_year(profile, 2020);
        REQUIRE(again.size() == year.size());
        for (std::size_t i = 0; i < year.size(); ++i) {
            CHECK(again[i].facility_j == year[i].facility_j);
        }
        SimDatacenterProfile reseeded = profile;
        reseeded.seed = 78;
        const auto other = generate_pue_year(reseeded, 2020);
        bool differs = false;
        for (std::size_t i = 0; i < year.size() && !differs; ++i) {
            differs = other[i].facility_j != year[i].facility_j;
        }
        CHECK(differs);
    }

    SUBCASE("seasonal structure matches the configured means") {
        auto monthly_mean = [&](int month) {
            double sum = 0.0;
            int n = 0;
            for (int day = 1; day <= pue::days_in_month(2020, month); ++day) {
                const auto hours = pue::hourly_averages(year, {2020, month, day});
                for (const auto& h : hours) {
                    REQUIRE(h.mean_pue.has_value());
                    sum += *h.mean_pue;
                    ++n;
                }
            }
            return sum / n;
        };
        CHECK(monthly_mean(1) == doctest::Approx(1.05).epsilon(0.02));
        CHECK(monthly_mean(7) == doctest::Approx(1.49).epsilon(0.02));
        CHECK(monthly_mean(7) > monthly_mean(1));
    }

    SUBCASE("diurnal structure peaks mid-afternoon") {
        SimDatacenterProfile quiet = profile;
        quiet.noise_stddev = 0.0;
        const auto smooth = generate_pue_year(quiet, 2020);
        std::array<double, 24> by_hour{};
        for (int day = 1; day <= 31; ++day) {
            const auto hours = pue::hourly_averages(smooth, {2020, 7, day});
            for (int h = 0; h < 24; ++h) {
                by_hour[static_cast<std::size_t>(h)] += *hours[h].mean_pue;
            }
        }
        const auto max_it = std::max_element(by_hour.begin(), by_hour.end());
        const auto min_it = std::min_element(by_hour.begin(), by_hour.end());
        CHECK(max_it - by_hour.begin() == 14);
        CHECK(min_it - by_hour.begin() == 2);
    }

    SUBCASE("flat profile generates a constant meter") {
        SimDatacenterProfile flat;
        flat.winter_mean_pue = 1.3;
        flat.summer_mean_pue = 1.3;
        flat.diurnal_amplitude = 0.0;
        flat.noise_stddev = 0.0;
        const auto steady = generate_pue_year(flat, 2021);
        for (const auto& s : steady) {
            CHECK(pue::compute_pue(s.facility_j, s.it_j) ==
                  doctest::Approx(1.3).epsilon(1e-12));
        }
        const auto hours = pue::hourly_averages(steady, {2021, 3, 14});
        CHECK(pue::daily_variation(hours).value_pct == doctest::Approx(0.0).epsilon(1e-9));
    }

    SUBCASE("profile bounds are enforced") {
        SimDatacenterProfile bad = profile;
        bad.winter_mean_pue = 0.95;
        CHECK_THROWS_AS(generate_pue_year(bad, 2020), DomainError);
        bad = profile;
        bad.it_power_w = 0.0;
        CHECK_THROWS_AS(generate_pue_year(bad, 2020), DomainError);
    }
}

TEST_CASE("devices round trip through json") {
    const SimDevice dev = testing::make_device("node3", 2, 140.0, 2.8, 17);
    const SimDevice back = device_from_json(to_json(dev));
    CHECK(back.id == dev.id);
    CHECK(back.device_class == dev.device_class);
    CHECK(back.nominal_draw_w == dev.nominal_draw_w);
    CHECK(back.cap_min_w == dev.cap_min_w);
    CHECK(back.cap_max_w == dev.cap_max_w);
    CHECK(back.default_cap_w == dev.default_cap_w);
    CHECK(back.noise_stddev_w == dev.noise_stddev_w);
    CHECK(back.seed == dev.seed);
    CHECK(back.cap_response.points.size() == dev.cap_response.points.size());
}

TEST_CASE("device json applies defaults and validation") {
    nlohmann::json j = to_json(testing::make_device("node3", 2, 140.0, 2.8, 17));

    SUBCASE("noise defaults to 2% of nominal draw") {
        j.erase("noise_stddev_w");
        CHECK(device_from_json(j).noise_stddev_w == doctest::Approx(0.02 * 140.0));
    }
    SUBCASE("integer ids select a bare index") {
        j["id"] = 4;
        const SimDevice d = device_from_json(j);
        CHECK(d.id.index == 4);
        CHECK(d.id.host.empty());
    }
    SUBCASE("the cap response must agree with the default cap") {
        j["default_cap_w"] = 200.0;
        CHECK_THROWS_AS(device_from_json(j), ParseError);
    }
    SUBCASE("negative noise is rejected") {
        j["noise_stddev_w"] = -1.0;
        CHECK_THROWS_AS(device_from_json(j), ParseError);
    }
}

TEST_CASE("scenarios load from fixture files") {
    std::ifstream in(testing::fixture_path("bert_v100.json"));
    REQUIRE(in.good());
    const Scenario sc = scenario_from_json(nlohmann::json::parse(in));
    REQUIRE(sc.devices.size() == 1);
    CHECK(sc.devices[0].id.str() == "bert:0");
    CHECK(sc.devices[0].default_cap_w == 250.0);
    CHECK(sc.workload.base_duration_s == 60.0);
    CHECK(sc.caps_w == std::vector<double>{100.0, 150.0, 200.0, 250.0});
    CHECK_FALSE(sc.datacenter.has_value());

    std::ifstream in2(testing::fixture_path("bert_v100_datacenter.json"));
    REQUIRE(in2.good());
    const Scenario with_dc = scenario_from_json(nlohmann::json::parse(in2));
    REQUIRE(with_dc.datacenter.has_value());
    CHECK(with_dc.datacenter->summer_mean_pue == 1.49);
    CHECK(with_dc.datacenter->winter_mean_pue == 1.05);
}

TEST_CASE("scenario json is validated") {
    CHECK_THROWS_AS(scenario_from_json(nlohmann::json::object()), ParseError);
    CHECK_THROWS_AS(scenario_from_json({{"devices", nlohmann::json::array()},
                                        {"workload", {{"base_duration_s", 1.0}}}}),
                    ParseError);
    const nlohmann::json dev = to_json(testing::make_device());
    CHECK_THROWS_AS(scenario_from_json({{"devices", {dev}}}), ParseError); // no workload
    CHECK_THROWS_AS(scenario_from_json({{"devices", {dev}},
                                        {"workload", {{"base_duration_s", "fast"}}}}),
                    ParseError);
    // caps_w is optional: the CLI can supply caps at the command line.
    const Scenario minimal = scenario_from_json(
        {{"devices", {dev}}, {"workload", {{"base_duration_s", 2.5}}}});
    CHECK(minimal.caps_w.empty());
    CHECK(minimal.workload.steps == 1);
}

#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "wattwise/common.hpp"
#include "wattwise/telemetry.hpp"

using namespace wattwise;
using namespace wattwise::telemetry;

TEST_CASE("device ids parse and order") {
    CHECK(DeviceId::parse("0") == DeviceId{0, ""});
    CHECK(DeviceId::parse("node7:3") == DeviceId{3, "node7"});
    CHECK(DeviceId{3, "node7"}.str() == "node7:3");
    CHECK(DeviceId{0, ""}.str() == "0");
    CHECK(DeviceId{0, "a"} < DeviceId{0, "b"});
    CHECK_THROWS_AS(DeviceId::parse("node7:x"), ParseError);
    CHECK_THROWS_AS(DeviceId::parse(""), ParseError);
    CHECK_THROWS_AS(DeviceId::parse("node7:-1"), ParseError);
}

TEST_CASE("csv schema accepts reordered and extra columns") {
    const CsvSchema schema = CsvSchema::from_header("device,ts_ms,cap_w,power_w,vendor_flag");
    const PowerSample s = parse_sample_line("0,1500,250,97.5,zz", schema, 2);
    CHECK(s.ts_ms == 1500);
    CHECK(s.power_w == 97.5);
    CHECK(s.cap_w == 250.0);
    CHECK_FALSE(s.util_pct.has_value());
    CHECK_FALSE(s.temp_c.has_value());

    CHECK_THROWS_AS(CsvSchema::from_header("ts_ms,device,power_w"), ParseError); // cap_w missing
    CHECK_THROWS_AS(CsvSchema::from_header("ts_ms,ts_ms,device,power_w,cap_w"), ParseError);
}

TEST_CASE("sample parsing rejects bad values with line context") {
    const CsvSchema& schema = CsvSchema::canonical();
    CHECK_THROWS_WITH_AS(parse_sample_line("5,0,abc,250,,", schema, 7),
                         doctest::Contains("line 7"), ParseError);
    CHECK_THROWS_AS(parse_sample_line("5,0,-1,250,,", schema, 1), ParseError);  // negative power
    CHECK_THROWS_AS(parse_sample_line("5,0,100,0,,", schema, 1), ParseError);   // cap must be > 0
    CHECK_THROWS_AS(parse_sample_line("5,0,100,250,101,", schema, 1), ParseError);
    CHECK_THROWS_AS(parse_sample_line("5,0,100", schema, 1), ParseError);       // short row
}

TEST_CASE("format and parse compose to the identity") {
    const CsvSchema& schema = CsvSchema::canonical();
    PowerSample s;
    s.ts_ms = 123456;
    s.device = {1, "host"};
    s.power_w = 101.25;
    s.cap_w = 250.0;
    s.util_pct = 88.5;
    const std::string line = format_sample_line(s, schema);
    CHECK(parse_sample_line(line, schema) == s);
}

TEST_CASE("telemetry csv round trip groups by device") {
    std::stringstream buf;
    SeriesByDevice series;
    const DeviceId a{0, ""};
    const DeviceId b{1, "host"};
    series[a] = testing::constant_series(a, 0, 5, 100, 120.0);
    series[b] = testing::constant_series(b, 0, 5, 100, 80.0);
    write_telemetry_csv(buf, series);
    const SeriesByDevice back = read_telemetry_csv(buf);
    REQUIRE(back.size() == 2);
    CHECK(back.at(a).samples == series.at(a).samples);
    CHECK(back.at(b).samples == series.at(b).samples);
}

TEST_CASE("telemetry reader needs a header") {
    std::stringstream empty;
    CHECK_THROWS_AS(read_telemetry_csv(empty), ParseError);
    std::stringstream noheader("0,0,100,250,,\n");
    CHECK_THROWS_AS(read_telemetry_csv(noheader), ParseError);
}

TEST_CASE("job slicing is half-open") {
    const DeviceId dev{0, ""};
    const SampleSeries s = testing::constant_series(dev, 0, 11, 100, 100.0);
    JobRecord job{"j", {dev}, 200, 700, 250.0};
    const SampleSeries cut = slice_for_job(s, job);
    REQUIRE(cut.size() == 5); // 200,300,400,500,600
    CHECK(cut.samples.front().ts_ms == 200);
    CHECK(cut.samples.back().ts_ms == 600);

    job.start_ms = 2000;
    job.end_ms = 3000;
    CHECK(slice_for_job(s, job).empty());
}

TEST_CASE("validation flags order, duplicates, gaps, and excursions") {
    const DeviceId dev{0, ""};
    SampleSeries s = testing::constant_series(dev, 0, 4, 100, 100.0);
    s.samples.push_back(s.samples.back()); // duplicate ts 300
    PowerSample late;
    late.ts_ms = 250; // goes backwards
    late.device = dev;
    late.power_w = 100.0;
    late.cap_w = 250.0;
    s.samples.push_back(late);
    PowerSample after_gap = late;
    after_gap.ts_ms = 2000; // 1750 ms > 10 * 100 ms
    s.samples.push_back(after_gap);
    PowerSample hot = after_gap;
    hot.ts_ms = 2100;
    hot.power_w = 270.0; // above 250 * 1.05
    s.samples.push_back(hot);

    const ValidationReport report = validate_series(s);
    CHECK(report.duplicates.size() == 1);
    CHECK(report.out_of_order.size() == 1);
    REQUIRE(report.gaps.size() == 1);
    CHECK(report.gaps[0].span_ms == 1750);
    REQUIRE(report.excursions.size() == 1);
    CHECK(report.excursions[0].power_w == 270.0);
    CHECK_FALSE(report.clean());
}

TEST_CASE("readings inside the 5% headroom band are not excursions") {
    // 260 W under a 250 W cap stays below 250 * 1.05 = 262.5 W.
    const DeviceId dev{0, ""};
    SampleSeries s = testing::constant_series(dev, 0, 3, 100, 260.0, 250.0);
    CHECK(validate_series(s).excursions.empty());
    s.samples[1].power_w = 262.5; // boundary: not strictly above
    CHECK(validate_series(s).excursions.empty());
    s.samples[1].power_w = 262.6;
    CHECK(validate_series(s).excursions.size() == 1);
}

TEST_CASE("clean series validates clean") {
    const DeviceId dev{0, ""};
    const SampleSeries s = testing::constant_series(dev, 0, 100, 100, 100.0);
    CHECK(validate_series(s).clean());
}

TEST_CASE("job records parse from json lines") {
    std::stringstream in(
        R"({"job_id":"a","devices":["0","host:1"],"start_ms":0,"end_ms":10,"cap_w":250})"
        "\n\n"
        R"({"job_id":"b","devices":[2],"start_ms":5,"end_ms":6,"cap_w":150})"
        "\n");
    const std::vector<JobRecord> jobs = read_job_records(in);
    REQUIRE(jobs.size() == 2);
    CHECK(jobs[0].devices == std::vector<DeviceId>{{0, ""}, {1, "host"}});
    CHECK(jobs[1].devices == std::vector<DeviceId>{{2, ""}});
    CHECK(jobs[1].cap_w == 150.0);

    std::stringstream bad_window(
        R"({"job_id":"a","devices":["0"],"start_ms":10,"end_ms":10,"cap_w":250})");
    CHECK_THROWS_AS(read_job_records(bad_window), ParseError);
    std::stringstream no_devices(
        R"({"job_id":"a","devices":[],"start_ms":0,"end_ms":10,"cap_w":250})");
    CHECK_THROWS_AS(read_job_records(no_devices), ParseError);
    std::stringstream garbage("not json");
    CHECK_THROWS_AS(read_job_records(garbage), ParseError);
}

TEST_CASE("job record formatting round trips") {
    const JobRecord job{"late-train", {{0, ""}, {3, "n7"}}, 100, 5000, 200.0};
    std::stringstream in(format_job_record(job));
    const std::vector<JobRecord> back = read_job_records(in);
    REQUIRE(back.size() == 1);
    CHECK(back[0].job_id == job.job_id);
    CHECK(back[0].devices == job.devices);
    CHECK(back[0].start_ms == job.start_ms);
    CHECK(back[0].end_ms == job.end_ms);
    CHECK(back[0].cap_w == job.cap_w);
}

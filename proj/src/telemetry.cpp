#include "wattwise/telemetry.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>

#include <fmt/core.h>
#include <fmt/ranges.h>
#include <nlohmann/json.hpp>

#include "wattwise/common.hpp"

namespace wattwise::telemetry {

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            cells.push_back(line.substr(start));
            break;
        }
        cells.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return cells;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

double parse_double(std::string_view cell, const char* column, std::size_t line_no) {
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw ParseError(
            fmt::format("line {}: column '{}': malformed number '{}'", line_no, column, cell));
    }
    return value;
}

std::int64_t parse_int64(std::string_view cell, const char* column, std::size_t line_no) {
    std::int64_t value = 0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw ParseError(
            fmt::format("line {}: column '{}': malformed integer '{}'", line_no, column, cell));
    }
    return value;
}

std::string format_double(double v) {
    return fmt::format("{}", v); // shortest round-trip representation
}

} // namespace

std::string DeviceId::str() const {
    if (host.empty()) {
        return fmt::format("{}", index);
    }
    return fmt::format("{}:{}", host, index);
}

DeviceId DeviceId::parse(std::string_view text) {
    DeviceId id;
    const std::size_t colon = text.rfind(':');
    std::string_view index_part = text;
    if (colon != std::string_view::npos) {
        id.host = std::string(text.substr(0, colon));
        index_part = text.substr(colon + 1);
    }
    int index = 0;
    const auto [ptr, ec] =
        std::from_chars(index_part.data(), index_part.data() + index_part.size(), index);
    if (ec != std::errc{} || ptr != index_part.data() + index_part.size() || index < 0) {
        throw ParseError(fmt::format("invalid device identifier '{}'", text));
    }
    id.index = index;
    return id;
}

CsvSchema CsvSchema::from_header(std::string_view header_line) {
    CsvSchema schema;
    const auto cells = split_csv(header_line);
    schema.count_ = cells.size();
    const auto assign = [&](int& slot, std::string_view name, int col) {
        if (slot >= 0) {
            throw ParseError(fmt::format("telemetry header repeats column '{}'", name));
        }
        slot = col;
    };
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const std::string_view name = trim(cells[i]);
        const int col = static_cast<int>(i);
        if (name == "ts_ms") {
            assign(schema.ts_, name, col);
        } else if (name == "device") {
            assign(schema.device_, name, col);
        } else if (name == "power_w") {
            assign(schema.power_, name, col);
        } else if (name == "cap_w") {
            assign(schema.cap_, name, col);
        } else if (name == "util_pct") {
            assign(schema.util_, name, col);
        } else if (name == "temp_c") {
            assign(schema.temp_, name, col);
        }
        // unknown columns pass through untouched
    }
    for (const auto& [col, name] :
         {std::pair{schema.ts_, "ts_ms"}, {schema.device_, "device"}, {schema.power_, "power_w"},
          {schema.cap_, "cap_w"}}) {
        if (col < 0) {
            throw ParseError(fmt::format("telemetry header missing required column '{}'", name));
        }
    }
    return schema;
}

const CsvSchema& CsvSchema::canonical() {
    static const CsvSchema schema = from_header("ts_ms,device,power_w,cap_w,util_pct,temp_c");
    return schema;
}

PowerSample parse_sample_line(std::string_view line, const CsvSchema& schema,
                              std::size_t line_no) {
    const auto cells = split_csv(line);
    auto cell = [&](int col, const char* column) -> std::string_view {
        if (col < 0 || static_cast<std::size_t>(col) >= cells.size()) {
            throw ParseError(fmt::format("line {}: missing column '{}'", line_no, column));
        }
        return trim(cells[static_cast<std::size_t>(col)]);
    };

    PowerSample sample;
    sample.ts_ms = parse_int64(cell(schema.ts_col(), "ts_ms"), "ts_ms", line_no);
    try {
        sample.device = DeviceId::parse(cell(schema.device_col(), "device"));
    } catch (const ParseError& e) {
        throw ParseError(fmt::format("line {}: column 'device': {}", line_no, e.what()));
    }
    sample.power_w = parse_double(cell(schema.power_col(), "power_w"), "power_w", line_no);
    sample.cap_w = parse_double(cell(schema.cap_col(), "cap_w"), "cap_w", line_no);
    if (sample.power_w < 0.0) {
        throw ParseError(
            fmt::format("line {}: column 'power_w': negative power {}", line_no, sample.power_w));
    }
    if (sample.cap_w <= 0.0) {
        throw ParseError(
            fmt::format("line {}: column 'cap_w': cap must be positive, got {}", line_no,
                        sample.cap_w));
    }
    if (schema.util_col() >= 0 &&
        static_cast<std::size_t>(schema.util_col()) < cells.size()) {
        const auto text = trim(cells[static_cast<std::size_t>(schema.util_col())]);
        if (!text.empty()) {
            const double util = parse_double(text, "util_pct", line_no);
            if (util < 0.0 || util > 100.0) {
                throw ParseError(fmt::format(
                    "line {}: column 'util_pct': {} outside [0,100]", line_no, util));
            }
            sample.util_pct = util;
        }
    }
    if (schema.temp_col() >= 0 &&
        static_cast<std::size_t>(schema.temp_col()) < cells.size()) {
        const auto text = trim(cells[static_cast<std::size_t>(schema.temp_col())]);
        if (!text.empty()) {
            sample.temp_c = parse_double(text, "temp_c", line_no);
        }
    }
    return sample;
}

std::string format_sample_line(const PowerSample& sample, const CsvSchema& schema) {
    std::vector<std::string> cells(schema.column_count());
    auto put = [&](int col, std::string text) {
        if (col >= 0 && static_cast<std::size_t>(col) < cells.size()) {
            cells[static_cast<std::size_t>(col)] = std::move(text);
        }
    };
    put(schema.ts_col(), fmt::format("{}", sample.ts_ms));
    put(schema.device_col(), sample.device.str());
    put(schema.power_col(), format_double(sample.power_w));
    put(schema.cap_col(), format_double(sample.cap_w));
    if (sample.util_pct) {
        put(schema.util_col(), format_double(*sample.util_pct));
    }
    if (sample.temp_c) {
        put(schema.temp_col(), format_double(*sample.temp_c));
    }
    return fmt::format("{}", fmt::join(cells, ","));
}

SampleSeries slice_for_job(const SampleSeries& series, const JobRecord& job) {
    SampleSeries out;
    out.device = series.device;
    out.nominal_interval_ms = series.nominal_interval_ms;
    const auto begin = std::lower_bound(
        series.samples.begin(), series.samples.end(), job.start_ms,
        [](const PowerSample& s, std::int64_t t) { return s.ts_ms < t; });
    const auto end = std::lower_bound(
        begin, series.samples.end(), job.end_ms,
        [](const PowerSample& s, std::int64_t t) { return s.ts_ms < t; });
    out.samples.assign(begin, end);
    return out;
}

ValidationReport validate_series(const SampleSeries& series) {
    ValidationReport report;
    const std::int64_t gap_threshold =
        std::int64_t{kGapFactor} * series.nominal_interval_ms;
    for (std::size_t i = 0; i < series.samples.size(); ++i) {
        const PowerSample& s = series.samples[i];
        if (i > 0) {
            const std::int64_t prev = series.samples[i - 1].ts_ms;
            if (s.ts_ms < prev) {
                report.out_of_order.push_back({i, prev, s.ts_ms});
            } else if (s.ts_ms == prev) {
                report.duplicates.push_back({i, prev, s.ts_ms});
            } else if (s.ts_ms - prev > gap_threshold) {
                report.gaps.push_back({i, prev, s.ts_ms, s.ts_ms - prev});
            }
        }
        if (s.power_w > s.cap_w * kCapHeadroom) {
            report.excursions.push_back({i, s.power_w, s.cap_w});
        }
    }
    return report;
}

SeriesByDevice read_telemetry_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("telemetry input is empty (header required)");
    }
    const CsvSchema schema = CsvSchema::from_header(line);
    SeriesByDevice out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        PowerSample sample = parse_sample_line(line, schema, line_no);
        auto [it, inserted] = out.try_emplace(sample.device);
        if (inserted) {
            it->second.device = sample.device;
        }
        it->second.samples.push_back(std::move(sample));
    }
    return out;
}

void write_telemetry_csv(std::ostream& out, const SampleSeries& series) {
    out << "ts_ms,device,power_w,cap_w,util_pct,temp_c\n";
    for (const PowerSample& s : series.samples) {
        out << format_sample_line(s, CsvSchema::canonical()) << '\n';
    }
}

void write_telemetry_csv(std::ostream& out, const SeriesByDevice& series) {
    out << "ts_ms,device,power_w,cap_w,util_pct,temp_c\n";
    for (const auto& [device, s] : series) {
        for (const PowerSample& sample : s.samples) {
            out << format_sample_line(sample, CsvSchema::canonical()) << '\n';
        }
    }
}

std::vector<JobRecord> read_job_records(std::istream& in) {
    std::vector<JobRecord> jobs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(fmt::format("jobs line {}: {}", line_no, e.what()));
        }
        JobRecord job;
        try {
            job.job_id = j.at("job_id").get<std::string>();
            for (const auto& d : j.at("devices")) {
                if (d.is_string()) {
                    job.devices.push_back(DeviceId::parse(d.get<std::string>()));
                } else {
                    const int idx = d.get<int>();
                    if (idx < 0) {
                        throw ParseError("device index must be non-negative");
                    }
                    job.devices.push_back(DeviceId{idx, {}});
                }
            }
            job.start_ms = j.at("start_ms").get<std::int64_t>();
            job.end_ms = j.at("end_ms").get<std::int64_t>();
            job.cap_w = j.at("cap_w").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(fmt::format("jobs line {}: {}", line_no, e.what()));
        }
        if (job.end_ms <= job.start_ms) {
            throw ParseError(fmt::format("jobs line {}: end_ms must exceed start_ms", line_no));
        }
        if (job.devices.empty()) {
            throw ParseError(fmt::format("jobs line {}: devices must be non-empty", line_no));
        }
        jobs.push_back(std::move(job));
    }
    return jobs;
}

std::string format_job_record(const JobRecord& job) {
    nlohmann::json devices = nlohmann::json::array();
    for (const DeviceId& d : job.devices) {
        if (d.host.empty()) {
            devices.push_back(d.index);
        } else {
            devices.push_back(d.str());
        }
    }
    const nlohmann::json j = {{"job_id", job.job_id},
                              {"devices", devices},
                              {"start_ms", job.start_ms},
                              {"end_ms", job.end_ms},
                              {"cap_w", job.cap_w}};
    return j.dump();
}

} // namespace wattwise::telemetry

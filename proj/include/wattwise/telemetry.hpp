#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wattwise::telemetry {

// GPU identity: non-negative index, optionally qualified by host ("node3:1").
struct DeviceId {
    int index = 0;
    std::string host;

    auto operator<=>(const DeviceId&) const = default;
    bool operator==(const DeviceId&) const = default;

    std::string str() const;
    static DeviceId parse(std::string_view text);
};

// One 100ms power reading for one device.
struct PowerSample {
    std::int64_t ts_ms = 0;
    DeviceId device;
    double power_w = 0.0;
    double cap_w = 0.0;
    std::optional<double> util_pct;
    std::optional<double> temp_c;

    bool operator==(const PowerSample&) const = default;
};

inline constexpr std::int64_t kDefaultIntervalMs = 100;
// Instantaneous draw may transiently exceed the enforced limit; readings above
// cap * kCapHeadroom are flagged as suspect.
inline constexpr double kCapHeadroom = 1.05;
// A spacing wider than kGapFactor * nominal_interval is reported as a gap.
inline constexpr int kGapFactor = 10;

// Timestamp-ordered readings from a single device. Ordering is an intended
// invariant, not enforced on construction: raw input may violate it, and
// validate_series() is how violations surface.
struct SampleSeries {
    DeviceId device;
    std::vector<PowerSample> samples;
    std::int64_t nominal_interval_ms = kDefaultIntervalMs;

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }
};

using SeriesByDevice = std::map<DeviceId, SampleSeries>;

// A schedulable workload window as recorded by the cluster scheduler.
struct JobRecord {
    std::string job_id;
    std::vector<DeviceId> devices; // non-empty
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0; // > start_ms
    double cap_w = 0.0;
};

// Column layout of a telemetry CSV, declared by its header line. Required
// columns: ts_ms, device, power_w, cap_w. Optional: util_pct, temp_c.
// Unknown columns are ignored.
class CsvSchema {
public:
    static CsvSchema from_header(std::string_view header_line);

    int ts_col() const { return ts_; }
    int device_col() const { return device_; }
    int power_col() const { return power_; }
    int cap_col() const { return cap_; }
    int util_col() const { return util_; }
    int temp_col() const { return temp_; }
    std::size_t column_count() const { return count_; }

    // Canonical header: ts_ms,device,power_w,cap_w,util_pct,temp_c
    static const CsvSchema& canonical();

private:
    int ts_ = -1, device_ = -1, power_ = -1, cap_ = -1, util_ = -1, temp_ = -1;
    std::size_t count_ = 0;
};

// Throws ParseError naming the offending column and line on malformed numbers,
// missing required cells, negative power, nonpositive cap, or util outside
// [0,100].
PowerSample parse_sample_line(std::string_view line, const CsvSchema& schema,
                              std::size_t line_no = 0);

// Inverse of parse_sample_line for clean samples; numbers are rendered in
// shortest round-trip form so parse/format compose to the identity on
// canonical lines.
std::string format_sample_line(const PowerSample& sample, const CsvSchema& schema);

// Subsequence with job.start_ms <= ts < job.end_ms. Empty result is valid.
SampleSeries slice_for_job(const SampleSeries& series, const JobRecord& job);

struct ValidationReport {
    struct OrderViolation {
        std::size_t index; // sample whose timestamp is not greater than its predecessor's
        std::int64_t prev_ts_ms;
        std::int64_t ts_ms;
    };
    struct Gap {
        std::size_t index; // sample following the gap
        std::int64_t from_ts_ms;
        std::int64_t to_ts_ms;
        std::int64_t span_ms;
    };
    struct Excursion {
        std::size_t index;
        double power_w;
        double cap_w;
    };

    std::vector<OrderViolation> out_of_order; // strictly decreasing pairs
    std::vector<OrderViolation> duplicates;   // equal timestamps
    std::vector<Gap> gaps;                    // spacing > kGapFactor * nominal
    std::vector<Excursion> excursions;        // power > cap * kCapHeadroom

    bool clean() const {
        return out_of_order.empty() && duplicates.empty() && gaps.empty() && excursions.empty();
    }
};

// Never fails; reports what it finds. Gaps are surfaced, not repaired.
ValidationReport validate_series(const SampleSeries& series);

// Telemetry CSV (header required). Groups rows by device in file order.
SeriesByDevice read_telemetry_csv(std::istream& in);
void write_telemetry_csv(std::ostream& out, const SeriesByDevice& series);
void write_telemetry_csv(std::ostream& out, const SampleSeries& series);

// Job records as JSON lines: {"job_id","devices","start_ms","end_ms","cap_w"}.
std::vector<JobRecord> read_job_records(std::istream& in);
std::string format_job_record(const JobRecord& job);

} // namespace wattwise::telemetry

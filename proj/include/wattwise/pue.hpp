#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace wattwise::pue {

// One facility/IT meter interval. facility_j is all non-IT overhead
// (cooling, power distribution); it_j is the computing hardware itself.
struct PueSample {
    std::int64_t start_ms = 0;
    std::int64_t end_ms = 0; // > start_ms
    double facility_j = 0.0; // >= 0
    double it_j = 0.0;       // > 0
};

// (facility + it) / it, always >= 1. Throws DomainError when it <= 0 or
// facility < 0.
double compute_pue(double facility_j, double it_j);

// Calendar date in the datacenter-local fixed-offset timezone. No DST
// handling in variation statistics.
struct CivilDate {
    int year = 1970;
    int month = 1; // 1-12
    int day = 1;   // 1-31

    auto operator<=>(const CivilDate&) const = default;
    bool operator==(const CivilDate&) const = default;
    std::string str() const; // "2020-07-27"
};

CivilDate civil_from_ms(std::int64_t epoch_ms, int tz_offset_minutes = 0);
std::int64_t ms_from_civil(const CivilDate& date, int hour = 0, int tz_offset_minutes = 0);
CivilDate parse_date(std::string_view text); // "YYYY-MM-DD"
int days_in_month(int year, int month);
int days_in_year(int year);

struct HourlyPue {
    CivilDate day;
    int hour = 0; // 0-23
    std::optional<double> mean_pue;
    int sample_count = 0;
};

// Duration-weighted mean of per-sample PUE per hour of the given day.
// Intervals straddling hour (or day) boundaries are split proportionally by
// time; hours with no overlap stay absent.
std::array<HourlyPue, 24> hourly_averages(const std::vector<PueSample>& samples,
                                          const CivilDate& day, int tz_offset_minutes = 0);

enum class Scope { Day, Month, Year };

struct VariationStat {
    Scope scope = Scope::Day;
    double value_pct = 0.0;
    bool complete = false; // all constituent hours/days present
};

// 100 * (high - low) / low. The denominator is the minimum.
double percent_difference(double low, double high);

// Percent difference between the day's max and min hourly means. Needs at
// least 2 present hours; complete when all 24 are present.
VariationStat daily_variation(const std::array<HourlyPue, 24>& hourly);

// Arithmetic mean of daily variations. When expected_days is given,
// completeness additionally requires that many constituent days.
VariationStat monthly_variation(const std::vector<VariationStat>& days,
                                std::optional<int> expected_days = std::nullopt);

// Mean over all days of the year, explicitly not the mean of the 12 monthly
// values.
VariationStat annual_variation(const std::vector<VariationStat>& days,
                               std::optional<int> expected_days = std::nullopt);

// Hourly PUE prediction covering [start_ms, start_ms + hourly.size() hours).
struct PueForecast {
    std::int64_t start_ms = 0;
    std::vector<double> hourly;

    std::int64_t end_ms() const {
        return start_ms + static_cast<std::int64_t>(hourly.size()) * 3'600'000;
    }
    // Duration-weighted mean over [from_ms, to_ms). Throws DomainError when
    // the window leaves forecast coverage.
    double mean_over(std::int64_t from_ms, std::int64_t to_ms) const;
};

// Baseline predictor: each future hour takes the mean of the same hour of
// day over the trailing 7 complete days of history. Forecast starts at the
// midnight after the last complete history day.
PueForecast forecast_pue(const std::vector<HourlyPue>& history, int horizon_hours,
                         int tz_offset_minutes = 0);

// Forecast backed directly by meter data: hourly duration-weighted means over
// the requested window. Every hour must be covered.
PueForecast forecast_from_samples(const std::vector<PueSample>& samples, std::int64_t start_ms,
                                  int hours);

// Meter CSV: start_ms,end_ms,facility_j,it_j (header required).
std::vector<PueSample> read_meter_csv(std::istream& in);
void write_meter_csv(std::ostream& out, const std::vector<PueSample>& samples);

// Month rows plus an annual row, in the layout month,variation_pct.
struct VariationTable {
    struct Row {
        int month = 0; // 1-12
        VariationStat stat;
    };
    std::vector<Row> monthly;
    std::optional<VariationStat> annual;
};

VariationTable variation_table(const std::vector<PueSample>& samples, int year,
                               int tz_offset_minutes = 0);
std::string variation_table_csv(const VariationTable& table);

} // namespace wattwise::pue

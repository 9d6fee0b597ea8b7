#include "wattwise/pue.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <istream>
#include <map>
#include <ostream>

#include <fmt/core.h>

#include "wattwise/common.hpp"

namespace wattwise::pue {

namespace {

constexpr std::int64_t kHourMs = 3'600'000;
constexpr std::int64_t kDayMs = 86'400'000;

const char* kMonthNames[12] = {"January", "February", "March",     "April",   "May",
                               "June",    "July",     "August",    "September",
                               "October", "November", "December"};

std::chrono::sys_days to_sys_days(const CivilDate& date) {
    return std::chrono::sys_days{std::chrono::year{date.year} /
                                 std::chrono::month{static_cast<unsigned>(date.month)} /
                                 std::chrono::day{static_cast<unsigned>(date.day)}};
}

double sample_pue(const PueSample& s) { return compute_pue(s.facility_j, s.it_j); }

} // namespace

double compute_pue(double facility_j, double it_j) {
    if (!(it_j > 0.0)) {
        throw DomainError(fmt::format("IT energy must be positive, got {}", it_j));
    }
    if (facility_j < 0.0) {
        throw DomainError(fmt::format("facility energy must be non-negative, got {}", facility_j));
    }
    return (facility_j + it_j) / it_j;
}

std::string CivilDate::str() const {
    return fmt::format("{:04}-{:02}-{:02}", year, month, day);
}

CivilDate civil_from_ms(std::int64_t epoch_ms, int tz_offset_minutes) {
    using namespace std::chrono;
    const std::int64_t local_ms = epoch_ms + std::int64_t{tz_offset_minutes} * 60'000;
    const auto day = floor<days>(milliseconds{local_ms});
    const year_month_day ymd{sys_days{day}};
    return CivilDate{int(ymd.year()), static_cast<int>(unsigned(ymd.month())),
                     static_cast<int>(unsigned(ymd.day()))};
}

std::int64_t ms_from_civil(const CivilDate& date, int hour, int tz_offset_minutes) {
    using namespace std::chrono;
    const std::int64_t day_ms =
        duration_cast<milliseconds>(to_sys_days(date).time_since_epoch()).count();
    return day_ms + std::int64_t{hour} * kHourMs - std::int64_t{tz_offset_minutes} * 60'000;
}

CivilDate parse_date(std::string_view text) {
    CivilDate date;
    const auto parse_part = [&](std::string_view part, int& out) {
        const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
        return ec == std::errc{} && ptr == part.data() + part.size();
    };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' ||
        !parse_part(text.substr(0, 4), date.year) || !parse_part(text.substr(5, 2), date.month) ||
        !parse_part(text.substr(8, 2), date.day)) {
        throw ParseError(fmt::format("invalid date '{}' (expected YYYY-MM-DD)", text));
    }
    const std::chrono::year_month_day ymd{std::chrono::year{date.year},
                                          std::chrono::month{static_cast<unsigned>(date.month)},
                                          std::chrono::day{static_cast<unsigned>(date.day)}};
    if (!ymd.ok()) {
        throw ParseError(fmt::format("invalid calendar date '{}'", text));
    }
    return date;
}

int days_in_month(int year, int month) {
    using namespace std::chrono;
    const year_month_day_last last{std::chrono::year{year} / std::chrono::month{static_cast<unsigned>(month)} /
                                   std::chrono::last};
    return static_cast<int>(unsigned(last.day()));
}

int days_in_year(int year) { return std::chrono::year{year}.is_leap() ? 366 : 365; }

std::array<HourlyPue, 24> hourly_averages(const std::vector<PueSample>& samples,
                                          const CivilDate& day, int tz_offset_minutes) {
    std::array<HourlyPue, 24> hours;
    std::array<double, 24> weighted{};
    std::array<double, 24> weights{};
    for (int h = 0; h < 24; ++h) {
        hours[h].day = day;
        hours[h].hour = h;
    }
    const std::int64_t day_start = ms_from_civil(day, 0, tz_offset_minutes);
    for (const PueSample& s : samples) {
        if (s.end_ms <= day_start || s.start_ms >= day_start + kDayMs) {
            continue;
        }
        const double pue = sample_pue(s);
        const int first_hour =
            static_cast<int>(std::max<std::int64_t>(0, (s.start_ms - day_start) / kHourMs));
        const int last_hour = static_cast<int>(
            std::min<std::int64_t>(23, (s.end_ms - 1 - day_start) / kHourMs));
        for (int h = first_hour; h <= last_hour; ++h) {
            const std::int64_t bucket_start = day_start + h * kHourMs;
            const std::int64_t overlap = std::min(s.end_ms, bucket_start + kHourMs) -
                                         std::max(s.start_ms, bucket_start);
            if (overlap <= 0) {
                continue;
            }
            weighted[h] += pue * static_cast<double>(overlap);
            weights[h] += static_cast<double>(overlap);
            hours[h].sample_count += 1;
        }
    }
    for (int h = 0; h < 24; ++h) {
        if (weights[h] > 0.0) {
            hours[h].mean_pue = weighted[h] / weights[h];
        }
    }
    return hours;
}

double percent_difference(double low, double high) {
    if (!(low > 0.0)) {
        throw DomainError(fmt::format("percent difference needs a positive minimum, got {}", low));
    }
    return 100.0 * (high - low) / low;
}

VariationStat daily_variation(const std::array<HourlyPue, 24>& hourly) {
    double min_pue = 0.0;
    double max_pue = 0.0;
    int present = 0;
    for (const HourlyPue& h : hourly) {
        if (!h.mean_pue) {
            continue;
        }
        if (present == 0) {
            min_pue = max_pue = *h.mean_pue;
        } else {
            min_pue = std::min(min_pue, *h.mean_pue);
            max_pue = std::max(max_pue, *h.mean_pue);
        }
        ++present;
    }
    if (present < 2) {
        throw DomainError(
            fmt::format("daily variation needs at least 2 present hours, got {}", present));
    }
    return VariationStat{Scope::Day, percent_difference(min_pue, max_pue), present == 24};
}

namespace {

VariationStat mean_variation(const std::vector<VariationStat>& days, Scope scope,
                             std::optional<int> expected_days) {
    if (days.empty()) {
        throw DomainError("variation statistic needs at least one day");
    }
    KahanSum sum;
    bool complete = true;
    for (const VariationStat& d : days) {
        sum.add(d.value_pct);
        complete = complete && d.complete;
    }
    if (expected_days) {
        complete = complete && static_cast<int>(days.size()) == *expected_days;
    }
    return VariationStat{scope, sum.value() / static_cast<double>(days.size()), complete};
}

} // namespace

VariationStat monthly_variation(const std::vector<VariationStat>& days,
                                std::optional<int> expected_days) {
    return mean_variation(days, Scope::Month, expected_days);
}

VariationStat annual_variation(const std::vector<VariationStat>& days,
                               std::optional<int> expected_days) {
    return mean_variation(days, Scope::Year, expected_days);
}

double PueForecast::mean_over(std::int64_t from_ms, std::int64_t to_ms) const {
    if (to_ms <= from_ms) {
        throw DomainError("forecast window must have positive length");
    }
    if (from_ms < start_ms || to_ms > end_ms()) {
        throw DomainError(fmt::format(
            "window [{}, {}) leaves forecast coverage [{}, {})", from_ms, to_ms, start_ms,
            end_ms()));
    }
    KahanSum weighted;
    const std::size_t first = static_cast<std::size_t>((from_ms - start_ms) / kHourMs);
    const std::size_t last = static_cast<std::size_t>((to_ms - 1 - start_ms) / kHourMs);
    for (std::size_t i = first; i <= last; ++i) {
        const std::int64_t bucket_start = start_ms + static_cast<std::int64_t>(i) * kHourMs;
        const std::int64_t overlap =
            std::min(to_ms, bucket_start + kHourMs) - std::max(from_ms, bucket_start);
        weighted.add(hourly[i] * static_cast<double>(overlap));
    }
    return weighted.value() / static_cast<double>(to_ms - from_ms);
}

PueForecast forecast_pue(const std::vector<HourlyPue>& history, int horizon_hours,
                         int tz_offset_minutes) {
    if (horizon_hours < 1) {
        throw DomainError("forecast horizon must be at least 1 hour");
    }
    std::map<CivilDate, std::array<std::optional<double>, 24>> by_day;
    for (const HourlyPue& h : history) {
        if (h.mean_pue && h.hour >= 0 && h.hour < 24) {
            by_day[h.day][static_cast<std::size_t>(h.hour)] = h.mean_pue;
        }
    }
    std::vector<std::pair<CivilDate, const std::array<std::optional<double>, 24>*>> complete;
    for (const auto& [date, hours] : by_day) {
        const bool all = std::all_of(hours.begin(), hours.end(),
                                     [](const auto& v) { return v.has_value(); });
        if (all) {
            complete.emplace_back(date, &hours);
        }
    }
    if (complete.size() < 7) {
        throw DomainError(fmt::format(
            "forecast needs at least 7 complete days of hourly history, got {}",
            complete.size()));
    }

    std::array<double, 24> hour_means{};
    for (int h = 0; h < 24; ++h) {
        KahanSum sum;
        for (std::size_t d = complete.size() - 7; d < complete.size(); ++d) {
            sum.add(*(*complete[d].second)[static_cast<std::size_t>(h)]);
        }
        hour_means[h] = sum.value() / 7.0;
    }

    // Midnight after the last complete history day.
    const CivilDate last = complete.back().first;
    const std::int64_t start =
        ms_from_civil(last, 0, tz_offset_minutes) + kDayMs;
    PueForecast forecast;
    forecast.start_ms = start;
    forecast.hourly.reserve(static_cast<std::size_t>(horizon_hours));
    for (int i = 0; i < horizon_hours; ++i) {
        forecast.hourly.push_back(hour_means[static_cast<std::size_t>(i % 24)]);
    }
    return forecast;
}

PueForecast forecast_from_samples(const std::vector<PueSample>& samples, std::int64_t start_ms,
                                  int hours) {
    if (hours < 1) {
        throw DomainError("forecast needs at least 1 hour");
    }
    PueForecast forecast;
    forecast.start_ms = start_ms;
    forecast.hourly.assign(static_cast<std::size_t>(hours), 0.0);
    std::vector<double> weights(static_cast<std::size_t>(hours), 0.0);
    for (const PueSample& s : samples) {
        if (s.end_ms <= start_ms || s.start_ms >= start_ms + hours * kHourMs) {
            continue;
        }
        const double pue = sample_pue(s);
        const std::int64_t first =
            std::max<std::int64_t>(0, (s.start_ms - start_ms) / kHourMs);
        const std::int64_t last = std::min<std::int64_t>(
            hours - 1, (s.end_ms - 1 - start_ms) / kHourMs);
        for (std::int64_t i = first; i <= last; ++i) {
            const std::int64_t bucket_start = start_ms + i * kHourMs;
            const std::int64_t overlap =
                std::min(s.end_ms, bucket_start + kHourMs) - std::max(s.start_ms, bucket_start);
            if (overlap > 0) {
                forecast.hourly[static_cast<std::size_t>(i)] +=
                    pue * static_cast<double>(overlap);
                weights[static_cast<std::size_t>(i)] += static_cast<double>(overlap);
            }
        }
    }
    for (std::size_t i = 0; i < forecast.hourly.size(); ++i) {
        if (weights[i] <= 0.0) {
            throw DomainError(fmt::format(
                "meter data has no coverage for forecast hour starting at {}",
                start_ms + static_cast<std::int64_t>(i) * kHourMs));
        }
        forecast.hourly[i] /= weights[i];
    }
    return forecast;
}

std::vector<PueSample> read_meter_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) {
        throw ParseError("meter input is empty (header required)");
    }
    // Fixed column order; validate the header names.
    {
        std::string header = line;
        if (!header.empty() && header.back() == '\r') {
            header.pop_back();
        }
        if (header != "start_ms,end_ms,facility_j,it_j") {
            throw ParseError(fmt::format(
                "meter header must be 'start_ms,end_ms,facility_j,it_j', got '{}'", header));
        }
    }
    std::vector<PueSample> samples;
    std::size_t line_no = 1;
    auto parse_cell = [&](std::string_view cell, const char* col, double& out) {
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
        if (ec != std::errc{} || ptr != cell.data() + cell.size()) {
            throw ParseError(
                fmt::format("meter line {}: column '{}': malformed number '{}'", line_no, col,
                            cell));
        }
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::string_view view{line};
        std::array<std::string_view, 4> cells;
        std::size_t start = 0;
        for (int i = 0; i < 4; ++i) {
            const std::size_t comma = view.find(',', start);
            if (i < 3 && comma == std::string_view::npos) {
                throw ParseError(fmt::format("meter line {}: expected 4 columns", line_no));
            }
            cells[static_cast<std::size_t>(i)] =
                i < 3 ? view.substr(start, comma - start) : view.substr(start);
            start = comma + 1;
        }
        PueSample s;
        double start_d = 0.0;
        double end_d = 0.0;
        parse_cell(cells[0], "start_ms", start_d);
        parse_cell(cells[1], "end_ms", end_d);
        parse_cell(cells[2], "facility_j", s.facility_j);
        parse_cell(cells[3], "it_j", s.it_j);
        s.start_ms = static_cast<std::int64_t>(start_d);
        s.end_ms = static_cast<std::int64_t>(end_d);
        if (s.end_ms <= s.start_ms) {
            throw ParseError(fmt::format("meter line {}: end_ms must exceed start_ms", line_no));
        }
        if (!(s.it_j > 0.0) || s.facility_j < 0.0) {
            throw ParseError(fmt::format(
                "meter line {}: it_j must be positive and facility_j non-negative", line_no));
        }
        samples.push_back(s);
    }
    return samples;
}

void write_meter_csv(std::ostream& out, const std::vector<PueSample>& samples) {
    out << "start_ms,end_ms,facility_j,it_j\n";
    for (const PueSample& s : samples) {
        out << fmt::format("{},{},{},{}\n", s.start_ms, s.end_ms, s.facility_j, s.it_j);
    }
}

VariationTable variation_table(const std::vector<PueSample>& samples, int year,
                               int tz_offset_minutes) {
    VariationTable table;
    if (samples.empty()) {
        return table;
    }
    std::array<std::vector<VariationStat>, 12> by_month;
    std::vector<VariationStat> all_days;
    for (int month = 1; month <= 12; ++month) {
        for (int day = 1; day <= days_in_month(year, month); ++day) {
            const CivilDate date{year, month, day};
            const auto hourly = hourly_averages(samples, date, tz_offset_minutes);
            const int present = static_cast<int>(
                std::count_if(hourly.begin(), hourly.end(),
                              [](const HourlyPue& h) { return h.mean_pue.has_value(); }));
            if (present < 2) {
                continue; // day not covered by the meter data
            }
            const VariationStat stat = daily_variation(hourly);
            by_month[static_cast<std::size_t>(month - 1)].push_back(stat);
            all_days.push_back(stat);
        }
    }
    for (int month = 1; month <= 12; ++month) {
        const auto& days = by_month[static_cast<std::size_t>(month - 1)];
        if (!days.empty()) {
            table.monthly.push_back(
                {month, monthly_variation(days, days_in_month(year, month))});
        }
    }
    if (!all_days.empty()) {
        table.annual = annual_variation(all_days, days_in_year(year));
    }
    return table;
}

std::string variation_table_csv(const VariationTable& table) {
    std::string out = "month,variation_pct\n";
    for (const auto& row : table.monthly) {
        out += fmt::format("{},{:.2f}\n", kMonthNames[row.month - 1], row.stat.value_pct);
    }
    if (table.annual) {
        out += fmt::format("annual,{:.2f}\n", table.annual->value_pct);
    }
    return out;
}

} // namespace wattwise::pue

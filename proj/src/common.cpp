#include "wattwise/common.hpp"

#include <chrono>

#include <fmt/core.h>

namespace wattwise {

std::string format_rfc3339(std::int64_t epoch_ms, int tz_offset_minutes) {
    using namespace std::chrono;
    const std::int64_t local_ms = epoch_ms + std::int64_t{tz_offset_minutes} * 60'000;
    const auto day = floor<days>(milliseconds{local_ms});
    const year_month_day ymd{sys_days{day}};
    std::int64_t rem = local_ms - duration_cast<milliseconds>(day).count();
    const int hour = static_cast<int>(rem / 3'600'000);
    rem %= 3'600'000;
    const int minute = static_cast<int>(rem / 60'000);
    rem %= 60'000;
    const int second = static_cast<int>(rem / 1'000);
    const int milli = static_cast<int>(rem % 1'000);

    std::string offset;
    if (tz_offset_minutes == 0) {
        offset = "Z";
    } else {
        const int abs_min = std::abs(tz_offset_minutes);
        offset = fmt::format("{}{:02}:{:02}", tz_offset_minutes < 0 ? '-' : '+', abs_min / 60,
                             abs_min % 60);
    }
    return fmt::format("{:04}-{:02}-{:02}T{:02}:{:02}:{:02}.{:03}{}", int(ymd.year()),
                       unsigned(ymd.month()), unsigned(ymd.day()), hour, minute, second, milli,
                       offset);
}

std::string format_significant(double value, int significant_digits) {
    if (significant_digits < 1) {
        throw DomainError("significant_digits must be >= 1");
    }
    if (value == 0.0 || !std::isfinite(value)) {
        return fmt::format("{}", value);
    }
    const double mag = std::floor(std::log10(std::abs(value)));
    const double scale = std::pow(10.0, significant_digits - 1 - mag);
    double rounded = std::round(value * scale) / scale;
    // Rounding can bump the magnitude (0.9996 -> 1.00), so re-derive decimals.
    const double mag2 = std::floor(std::log10(std::abs(rounded)));
    const int decimals = std::max(0, significant_digits - 1 - static_cast<int>(mag2));
    return fmt::format("{:.{}f}", rounded, decimals);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed ^ (salt + 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace wattwise

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace wattwise {

// Bad input data (malformed CSV/JSON, unreadable file). CLI maps this to exit 2.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Violated precondition or domain contract (out-of-range argument, missing
// device, no feasible cap). CLI maps this to exit 3.
class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Neumaier-compensated accumulator. Keeps day-long 100ms series (~864k terms)
// accurate to 1e-9 relative.
class KahanSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            carry_ += (sum_ - t) + x;
        } else {
            carry_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

// "2020-07-27T14:00:00.000Z" (or "+HH:MM" suffix for nonzero offsets).
std::string format_rfc3339(std::int64_t epoch_ms, int tz_offset_minutes = 0);

// Rounds to the given number of significant figures and renders without
// exponent notation: 782.04 -> "782", 1.494 -> "1.49", 0.5 -> "0.500".
std::string format_significant(double value, int significant_digits);

// Deterministic seed combiner (splitmix64 finalizer over a xor mix).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

} // namespace wattwise

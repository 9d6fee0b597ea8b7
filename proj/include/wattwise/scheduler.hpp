#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "wattwise/pue.hpp"

namespace wattwise::sched {

// A job to be placed on the calendar: IT-side energy is assumed independent of
// the start time; only the facility overhead varies with it.
struct JobSpec {
    std::string job_id;
    double it_energy_j = 0.0;
    double duration_s = 0.0;

    std::int64_t duration_ms() const;
};

struct Candidate {
    std::int64_t start_ms = 0;
    double mean_pue = 0.0;
    double facility_j = 0.0; // it_energy_j * mean_pue over the run window
};

struct Recommendation {
    std::int64_t start_ms = 0;
    double mean_pue = 0.0;
    double facility_j = 0.0;
    double savings_vs_worst_pct = 0.0;
};

// Facility-adjusted energy for one placement. Throws DomainError when the
// forecast does not cover the run or the forecast PUE dips below 1.
double facility_energy(const JobSpec& job, std::int64_t start_ms,
                       const pue::PueForecast& forecast);

struct CandidateWindow {
    std::int64_t begin_ms = 0;
    std::int64_t end_ms = 0; // inclusive last candidate start
    std::int64_t step_ms = 3'600'000;
};

std::vector<Candidate> evaluate_candidates(const JobSpec& job, const CandidateWindow& window,
                                           const pue::PueForecast& forecast);

// Exhaustive argmin over candidate starts; the earliest start wins ties.
Recommendation plan_start(const JobSpec& job, const CandidateWindow& window,
                          const pue::PueForecast& forecast);

// Percent saved by moving a fixed IT load from one PUE regime to another,
// relative to where it runs today.
double estimate_shift_savings(double from_pue, double to_pue);

struct DatacenterRank {
    std::string name;
    double mean_pue = 0.0;
    double facility_j = 0.0;
};

// Orders sites by facility-adjusted energy for the same job; name breaks
// exact ties so the order is stable across runs. The ordering is independent
// of it_energy_j (a common factor).
std::vector<DatacenterRank> rank_datacenters(const JobSpec& job,
                                             const std::map<std::string, double>& centers);

} // namespace wattwise::sched

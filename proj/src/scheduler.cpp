#include "wattwise/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>

#include "wattwise/common.hpp"

namespace wattwise::sched {

std::int64_t JobSpec::duration_ms() const {
    return static_cast<std::int64_t>(std::llround(duration_s * 1000.0));
}

double facility_energy(const JobSpec& job, std::int64_t start_ms,
                       const pue::PueForecast& forecast) {
    if (!(job.it_energy_j > 0.0)) {
        throw DomainError(fmt::format("job '{}' has non-positive IT energy", job.job_id));
    }
    if (job.duration_ms() <= 0) {
        throw DomainError(fmt::format("job '{}' has non-positive duration", job.job_id));
    }
    const double mean = forecast.mean_over(start_ms, start_ms + job.duration_ms());
    if (mean < 1.0) {
        throw DomainError(
            fmt::format("forecast PUE {} below 1 over the run window", mean));
    }
    return job.it_energy_j * mean;
}

std::vector<Candidate> evaluate_candidates(const JobSpec& job, const CandidateWindow& window,
                                           const pue::PueForecast& forecast) {
    if (window.step_ms <= 0) {
        throw DomainError("candidate step must be positive");
    }
    if (window.end_ms < window.begin_ms) {
        throw DomainError("candidate window is empty");
    }
    std::vector<Candidate> out;
    for (std::int64_t start = window.begin_ms; start <= window.end_ms;
         start += window.step_ms) {
        Candidate c;
        c.start_ms = start;
        c.facility_j = facility_energy(job, start, forecast);
        c.mean_pue = c.facility_j / job.it_energy_j;
        out.push_back(c);
    }
    return out;
}

Recommendation plan_start(const JobSpec& job, const CandidateWindow& window,
                          const pue::PueForecast& forecast) {
    const std::vector<Candidate> candidates = evaluate_candidates(job, window, forecast);
    if (candidates.empty()) {
        throw DomainError("no candidate start times");
    }
    const Candidate* best = &candidates.front();
    const Candidate* worst = &candidates.front();
    for (const Candidate& c : candidates) {
        if (c.facility_j < best->facility_j) {
            best = &c;
        }
        if (c.facility_j > worst->facility_j) {
            worst = &c;
        }
    }
    Recommendation rec;
    rec.start_ms = best->start_ms;
    rec.mean_pue = best->mean_pue;
    rec.facility_j = best->facility_j;
    rec.savings_vs_worst_pct = 100.0 * (1.0 - best->facility_j / worst->facility_j);
    return rec;
}

double estimate_shift_savings(double from_pue, double to_pue) {
    if (!(from_pue > 0.0) || !(to_pue > 0.0)) {
        throw DomainError(
            fmt::format("PUE values must be positive, got {} and {}", from_pue, to_pue));
    }
    return 100.0 * (1.0 - to_pue / from_pue);
}

std::vector<DatacenterRank> rank_datacenters(const JobSpec& job,
                                             const std::map<std::string, double>& centers) {
    if (centers.empty()) {
        throw DomainError("no datacenters to rank");
    }
    if (!(job.it_energy_j > 0.0)) {
        throw DomainError(fmt::format("job '{}' has non-positive IT energy", job.job_id));
    }
    std::vector<DatacenterRank> ranks;
    ranks.reserve(centers.size());
    for (const auto& [name, mean_pue] : centers) {
        if (!(mean_pue >= 1.0)) {
            throw DomainError(fmt::format("datacenter '{}' has PUE {} below 1", name, mean_pue));
        }
        DatacenterRank r;
        r.name = name;
        r.mean_pue = mean_pue;
        r.facility_j = job.it_energy_j * mean_pue;
        ranks.push_back(std::move(r));
    }
    std::sort(ranks.begin(), ranks.end(), [](const DatacenterRank& a, const DatacenterRank& b) {
        if (a.facility_j != b.facility_j) {
            return a.facility_j < b.facility_j;
        }
        return a.name < b.name;
    });
    return ranks;
}

} // namespace wattwise::sched

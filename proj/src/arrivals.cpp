#include "amfs/arrivals.hpp"

#include "amfs/messages.hpp"

#include <cmath>
#include <random>

namespace amfs {

std::vector<SimTime> generate_arrivals(const MaterialFlowRelation& relation, SimTime horizon, std::uint64_t seed)
{
    std::vector<SimTime> out;
    if (horizon <= 0) throw Error("horizon must be > 0");
    if (relation.required_throughput <= 0.0) return out;
    const double mean = 60.0 / relation.required_throughput;

    if (relation.variability <= 0.0) {
        for (std::int64_t k = 0;; ++k) {
            SimTime t = seconds_to_ms(static_cast<double>(k) * mean);
            if (t >= horizon) break;
            out.push_back(t);
        }
        return out;
    }

    const double cv = relation.variability;
    const double sigma2 = std::log1p(cv * cv);
    std::lognormal_distribution<double> gap(std::log(mean) - sigma2 / 2.0, std::sqrt(sigma2));
    std::mt19937_64 rng(seed ^ fnv1a(relation.relation_id));
    double t = 0.0;
    while (true) {
        SimTime ms = seconds_to_ms(t);
        if (ms >= horizon) break;
        out.push_back(ms);
        t += gap(rng);
    }
    return out;
}

}  // namespace amfs

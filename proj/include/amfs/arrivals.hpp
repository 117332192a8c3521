#pragma once

#include "amfs/routing.hpp"

#include <cstdint>
#include <vector>

namespace amfs {

/// Release times in [0, horizon). Mean spacing is 60 / required_throughput
/// seconds; variability > 0 draws lognormal gaps with that coefficient of
/// variation from a generator seeded by (seed, relation id).
std::vector<SimTime> generate_arrivals(const MaterialFlowRelation& relation, SimTime horizon, std::uint64_t seed);

}  // namespace amfs

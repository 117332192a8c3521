#pragma once

// Offline planning: startup registration and route negotiation only.

#include "amfs/coordinator.hpp"
#include "amfs/scenario.hpp"

#include <string>
#include <vector>

namespace amfs {

struct RoutePlan {
    CoordinatorState coordinator;
    std::vector<RouteId> installed;
    std::vector<std::pair<RelationId, std::string>> rejected;
    std::vector<std::string> registration_errors;
    bool complete() const { return rejected.empty() && registration_errors.empty(); }
};

/// Registers the initial layout in module id order and negotiates every relation.
RoutePlan plan_routes(const ScenarioConfig& config);

/// JSON export of a route set, rejections included.
std::string route_plan_json(const RouteSet& routes, const std::vector<std::pair<RelationId, std::string>>& rejected = {});

}  // namespace amfs

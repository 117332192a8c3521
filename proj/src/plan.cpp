#include "amfs/plan.hpp"

#include "amfs/json_io.hpp"

#include <algorithm>

namespace amfs {

RoutePlan plan_routes(const ScenarioConfig& config)
{
    RoutePlan plan;
    auto& c = plan.coordinator;
    c.tolerance = config.parameters.tolerance;
    auto modules = config.modules;
    std::sort(modules.begin(), modules.end(),
              [](const auto& a, const auto& b) { return a.placement.module_id < b.placement.module_id; });
    if (!modules.empty()) {
        c.active = true;
        c.host = modules.front().placement.module_id;
    }
    for (const auto& m : modules) {
        try {
            c = register_module(c, m.descriptor, m.placement, 0, m.descriptor_ref).state;
        } catch (const Error& e) {
            plan.registration_errors.push_back(m.placement.module_id + ": " + e.what());
        }
    }
    for (const auto& r : config.relations) c.routes.relations[r.relation_id] = r;
    auto batch = negotiate_pending(c.topology, c.routes);
    c.routes = std::move(batch.route_set);
    plan.installed = std::move(batch.installed);
    plan.rejected = std::move(batch.rejected);
    return plan;
}

std::string route_plan_json(const RouteSet& routes, const std::vector<std::pair<RelationId, std::string>>& rejected)
{
    Json out = {{"revision", routes.revision}, {"routes", Json::array()}, {"rejected", Json::array()}};
    for (const auto& [id, r] : routes.routes) {
        Json hops = Json::array();
        for (const auto& h : r.hops)
            hops.push_back({{"module_id", h.module_id}, {"from", h.link_from}, {"to", h.link_to},
                            {"process_time", ms_to_seconds(h.process_time)}});
        out["routes"].push_back({{"route_id", id},
                                 {"relation_id", r.relation_id},
                                 {"path", r.path},
                                 {"hops", hops},
                                 {"reserved_capacity", r.reserved_capacity},
                                 {"expected_process_time", r.expected_process_time},
                                 {"status", to_string(r.status)}});
    }
    for (const auto& [rel, why] : rejected) out["rejected"].push_back({{"relation_id", rel}, {"reason", why}});
    return out.dump(2) + "\n";
}

}  // namespace amfs

#include "amfs/plan.hpp"
#include "amfs/routing.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace amfs;
namespace t = amfs::testing;

namespace {

Topology startup_topology(const std::string& scenario)
{
    return plan_routes(load_scenario(t::scenario_path(scenario))).coordinator.topology;
}

MaterialFlowRelation rel(std::string id, std::string s, std::string k, double thr, int prio = 0)
{
    return {std::move(id), std::move(s), std::move(k), thr, 0.0, prio};
}

}  // namespace

TEST_CASE("shortest path agrees with the exhaustive oracle on random topologies")
{
    std::mt19937_64 rng(99);
    int compared = 0, reachable = 0;
    for (int i = 0; i < 60; ++i) {
        auto topo = t::random_topology(rng, 6);
        RouteSet rs;
        auto ids = std::vector<ModuleId>();
        for (auto& [id, e] : topo.modules) ids.push_back(id);
        auto src = ids[rng() % ids.size()];
        auto snk = ids[rng() % ids.size()];
        if (src == snk) continue;
        auto relation = rel("r", src, snk, 2.0);
        auto g = feasible_subgraph(topo, rs, relation);
        auto oracle = t::oracle_shortest_path(topo, rs, 2.0, src, snk);
        if (!g.modules.count(src) || !g.modules.count(snk)) {
            CHECK_THROWS_AS(shortest_process_time_path(g, src, snk), UnknownModuleError);
            continue;
        }
        auto got = shortest_process_time_path(g, src, snk);
        ++compared;
        REQUIRE(got.has_value() == oracle.has_value());
        if (!got) continue;
        ++reachable;
        CHECK(got->cost == oracle->cost);
        CHECK(got->path == oracle->path);
        CHECK(got->hops == oracle->hops);
    }
    CHECK(compared > 30);
    CHECK(reachable > 5);
}

TEST_CASE("equal cost paths resolve to the smaller module sequence")
{
    auto topo = startup_topology("diamond.json");
    RouteSet rs;
    auto g = feasible_subgraph(topo, rs, rel("x", "L", "R", 1));
    auto p = shortest_process_time_path(g, "L", "R");
    REQUIRE(p);
    CHECK(p->path == std::vector<ModuleId>{"L", "D", "R"});
    CHECK(p->cost == 30'000);
    REQUIRE(p->hops.size() == 3);
    CHECK(!p->hops[0].entry);
    CHECK(*p->hops[0].exit == "d");
    CHECK(!p->hops[2].exit);
}

TEST_CASE("opposing relations take distinct diamond branches")
{
    auto plan = plan_routes(load_scenario(t::scenario_path("diamond.json")));
    REQUIRE(plan.complete());
    auto* lr = plan.coordinator.routes.active_route("LR");
    auto* rl = plan.coordinator.routes.active_route("RL");
    REQUIRE(lr);
    REQUIRE(rl);
    CHECK(lr->path[1] != rl->path[1]);
    CHECK(check_capacity(plan.coordinator.routes, plan.coordinator.topology).empty());
}

TEST_CASE("reversible links pool capacity across both orientations")
{
    auto topo = startup_topology("diamond.json");
    RouteSet rs;
    auto a = negotiate_route(topo, rs, rel("a", "L", "R", 7));
    REQUIRE(a.route_id);
    auto b = negotiate_route(topo, a.route_set, rel("b", "R", "L", 7));
    REQUIRE(b.route_id);
    CHECK(b.route_set.routes.at(*b.route_id).path[1] == "U");
    CHECK(residual(b.route_set, topo, {"D", "a", "b"}) == doctest::Approx(5));
    CHECK(residual(b.route_set, topo, {"D", "b", "a"}) == doctest::Approx(5));
    auto c = negotiate_route(topo, b.route_set, rel("c", "L", "R", 6));
    CHECK(!c.route_id);
    CHECK(*c.rejection == kNoCapacityPath);
    CHECK(c.route_set.routes.size() == b.route_set.routes.size());
}

TEST_CASE("revocation restores residuals exactly")
{
    auto topo = startup_topology("diamond.json");
    RouteSet rs;
    auto before = residual_capacity(rs, topo);
    auto a = negotiate_route(topo, rs, rel("a", "L", "R", 3.3));
    REQUIRE(a.route_id);
    CHECK(residual_capacity(a.route_set, topo) != before);
    auto after = a.route_set;
    CHECK(revoke_route(after, *a.route_id));
    CHECK(residual_capacity(after, topo) == before);
    CHECK(!revoke_route(after, *a.route_id));
}

TEST_CASE("negotiate_pending serves higher priority first")
{
    auto topo = startup_topology("diamond.json");
    RouteSet rs;
    rs.relations["low"] = rel("low", "L", "R", 8, 0);
    rs.relations["high"] = rel("high", "L", "R", 8, 5);
    auto out = negotiate_pending(topo, rs);
    REQUIRE(out.installed.size() == 2);
    CHECK(out.route_set.routes.at(out.installed[0]).relation_id == "high");
    CHECK(out.route_set.routes.at(out.installed[0]).path[1] == "D");
    rs.relations["third"] = rel("third", "L", "R", 8, 1);
    auto more = negotiate_pending(topo, rs);
    CHECK(more.rejected.size() == 1);
    CHECK(more.rejected[0].first == "low");
}

TEST_CASE("demand change renegotiates only the affected relation")
{
    auto topo = startup_topology("diamond.json");
    RouteSet rs;
    rs.relations["a"] = rel("a", "L", "R", 4);
    rs.relations["b"] = rel("b", "R", "L", 4);
    rs = negotiate_pending(topo, rs).route_set;
    auto* b = rs.active_route("b");
    REQUIRE(b);
    auto b_id = b->route_id;

    auto out = renegotiate(rs, topo, DemandChanged{"a", 10});
    CHECK(out.revoked.size() == 1);
    CHECK(out.installed.size() == 1);
    CHECK(out.route_set.active_route("b")->route_id == b_id);
    CHECK(out.route_set.active_route("a")->reserved_capacity == doctest::Approx(10));
    CHECK(check_capacity(out.route_set, topo).empty());
}

TEST_CASE("layout change moves routes off a failed module")
{
    auto topo = startup_topology("diamond.json");
    RouteSet rs;
    rs.relations["a"] = rel("a", "L", "R", 4);
    rs = negotiate_pending(topo, rs).route_set;
    REQUIRE(rs.active_route("a")->path[1] == "D");
    auto faulty = with_status(topo, "D", OperationalState::fault);
    CHECK(!route_valid(*rs.active_route("a"), faulty));
    auto out = renegotiate(rs, faulty, LayoutChanged{{"D"}});
    REQUIRE(out.route_set.active_route("a"));
    CHECK(out.route_set.active_route("a")->path[1] == "U");
}

TEST_CASE("operator overrides are validated with a named constraint")
{
    auto topo = startup_topology("diamond.json");
    RouteSet rs;
    rs.relations["a"] = rel("a", "L", "R", 10);
    rs.relations["b"] = rel("b", "R", "L", 10);
    rs = negotiate_pending(topo, rs).route_set;
    auto a_id = rs.active_route("a")->route_id;

    auto constraint = [&](const RouteId& id, std::vector<ModuleId> path, const Topology& tp) -> std::string {
        try {
            renegotiate(rs, tp, OperatorOverride{id, std::move(path)});
            return "accepted";
        } catch (const OverrideRejected& e) {
            return e.constraint();
        }
    };
    CHECK(constraint("ssr-99", {"L", "U", "R"}, topo) == "unknown_entity");
    CHECK(constraint(a_id, {"D", "R"}, topo) == "endpoint_mismatch");
    CHECK(constraint(a_id, {"L", "R"}, topo) == "disconnected_path");
    CHECK(constraint(a_id, {"L", "U", "R"}, topo) == "capacity_violation");
    CHECK(constraint(a_id, {"L", "U", "R"}, with_status(topo, "U", OperationalState::fault)) == "module_not_operational");

    auto out = renegotiate(rs, topo, OperatorOverride{a_id, {"L", "D", "R"}});
    CHECK(out.route_set.active_route("a")->path == std::vector<ModuleId>{"L", "D", "R"});
}

TEST_CASE("path search rejects unknown endpoints")
{
    auto topo = startup_topology("diamond.json");
    auto g = full_subgraph(topo);
    CHECK_THROWS_AS(shortest_process_time_path(g, "L", "nope"), UnknownModuleError);
    auto self = shortest_process_time_path(g, "L", "L");
    REQUIRE(self);
    CHECK(self->path.size() == 1);
}

// Acceptance suite: one PASS/FAIL line per criterion.

#include "amfs/plan.hpp"
#include "amfs/simulation.hpp"
#include "../support.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <random>
#include <sstream>

using namespace amfs;
namespace t = amfs::testing;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::size_t g_sequence_runs = 0;
std::vector<std::string> g_sequence_failures;

/// Every acceptance run passes through here so sink order is checked everywhere.
RunResult observed_run(const ScenarioConfig& c)
{
    auto r = run_scenario(c);
    ++g_sequence_runs;
    for (const auto& rel : t::sequence_violations(r.log))
        g_sequence_failures.push_back(c.name + "/seed " + std::to_string(c.seed) + "/" + rel);
    return r;
}

void observe(const Simulation& sim)
{
    ++g_sequence_runs;
    for (const auto& rel : t::sequence_violations(sim.log()))
        g_sequence_failures.push_back(sim.config().name + "/" + rel);
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, x);
    return buf;
}

Outcome throughput_gain()
{
    auto base = load_scenario(t::scenario_path("diamond.json"));
    auto t0 = std::chrono::steady_clock::now();
    double sum_ssr = 0, sum_base = 0;
    int seeds_won = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto c = base;
        c.seed = seed;
        c.strategy = RoutingStrategy::ssr;
        double s = observed_run(c).metrics.total_throughput();
        c.strategy = RoutingStrategy::baseline_occupancy;
        double b = observed_run(c).metrics.total_throughput();
        sum_ssr += s;
        sum_base += b;
        seeds_won += s > b;
    }
    double elapsed = seconds_since(t0);
    double ratio = sum_base > 0 ? sum_ssr / sum_base : 0.0;
    Outcome o;
    o.pass = sum_base > 0 && ratio >= 1.30 && elapsed < 30.0;
    o.detail = "ratio " + fmt("%.3f", ratio) + " (ssr " + fmt("%.3f", sum_ssr / 10) + " vs baseline " +
               fmt("%.3f", sum_base / 10) + " TU/min), ssr ahead on " + std::to_string(seeds_won) + "/10 seeds, " +
               fmt("%.1f", elapsed) + " s";
    return o;
}

Outcome dedicated_branches()
{
    auto config = load_scenario(t::scenario_path("diamond.json"));
    auto plan = plan_routes(config);
    auto* lr = plan.coordinator.routes.active_route("LR");
    auto* rl = plan.coordinator.routes.active_route("RL");
    Outcome o;
    if (!lr || !rl) {
        o.detail = "a relation has no route";
        return o;
    }
    Simulation sim(config);
    sim.run_until(1000);
    auto* slr = sim.coordinator().routes.active_route("LR");
    auto* srl = sim.coordinator().routes.active_route("RL");
    std::set<ModuleId> a(lr->path.begin() + 1, lr->path.end() - 1);
    std::set<ModuleId> b(rl->path.begin() + 1, rl->path.end() - 1);
    bool disjoint = !a.empty() && !b.empty() && std::none_of(a.begin(), a.end(), [&](auto& m) { return b.count(m); });
    bool sim_same = slr && srl && slr->path == lr->path && srl->path == rl->path;
    o.pass = disjoint && sim_same;
    o.detail = "LR via " + *a.begin() + ", RL via " + *b.begin() + (sim_same ? "" : " (simulation disagrees)");
    return o;
}

MaterialFlowRelation random_relation(std::mt19937_64& rng, const Topology& topo, const std::string& id)
{
    std::vector<ModuleId> ids;
    for (const auto& [m, e] : topo.modules) ids.push_back(m);
    std::uniform_int_distribution<std::size_t> pick(0, ids.size() - 1);
    auto src = ids[pick(rng)];
    auto snk = ids[pick(rng)];
    while (snk == src) snk = ids[pick(rng)];
    double thr = std::uniform_int_distribution<int>(1, 16)(rng) * 0.5;
    return {id, src, snk, thr, 0.0, 0};
}

Outcome path_oracle()
{
    std::mt19937_64 rng(20240601);
    const int topologies = 200;
    int queries = 0, agree = 0, routed = 0, tied = 0;
    std::string first_mismatch;
    for (int i = 0; i < topologies; ++i) {
        auto topo = t::random_topology(rng, 8);
        RouteSet rs;
        int preload = std::uniform_int_distribution<int>(0, 3)(rng);
        for (int k = 0; k < preload; ++k)
            rs = negotiate_route(topo, rs, random_relation(rng, topo, "p" + std::to_string(k))).route_set;
        double required = std::uniform_int_distribution<int>(1, 8)(rng) * 0.5;
        for (const auto& [src, a] : topo.modules)
            for (const auto& [snk, b] : topo.modules) {
                if (src == snk) continue;
                ++queries;
                MaterialFlowRelation rel{"q", src, snk, required, 0.0, 0};
                int optimal = 0;
                auto expected = t::oracle_shortest_path(topo, rs, required, src, snk, &optimal);
                auto g = feasible_subgraph(topo, rs, rel);
                std::optional<PathResult> got;
                bool absent = false;
                try {
                    got = shortest_process_time_path(g, src, snk);
                } catch (const UnknownModuleError&) {
                    absent = true;
                }
                bool ok = false;
                if (absent) ok = !expected;
                else if (!got || !expected) ok = !got && !expected;
                else ok = got->cost == expected->cost && got->path == expected->path && got->hops == expected->hops;
                agree += ok;
                routed += expected.has_value();
                tied += optimal > 1;
                if (!ok && first_mismatch.empty())
                    first_mismatch = "; first mismatch on topology " + std::to_string(i) + " " + src + "->" + snk;
            }
    }
    return {agree == queries, std::to_string(agree) + "/" + std::to_string(queries) + " queries agree over " +
                                  std::to_string(topologies) + " topologies (" + std::to_string(routed) +
                                  " with a path, " + std::to_string(tied) + " with tied optima)" + first_mismatch};
}

bool capacity_respected(const RouteSet& rs, const Topology& topo, std::string& why)
{
    for (const auto& [id, e] : topo.modules)
        for (const auto& l : e.descriptor.internal_links) {
            double used = t::oracle_reserved(rs, id, l);
            if (used > l.capacity + 1e-9) {
                why = id + " " + l.from_interface + "->" + l.to_interface + " reserved " + std::to_string(used);
                return false;
            }
        }
    if (auto v = check_capacity(rs, topo); !v.empty()) {
        why = v.front();
        return false;
    }
    return true;
}

Outcome capacity_safety()
{
    std::mt19937_64 rng(777);
    int sequences = 500, ops = 0, revocations = 0;
    std::string failure;
    for (int s = 0; s < sequences && failure.empty(); ++s) {
        Topology topo;
        do topo = t::random_topology(rng, 8);
        while (topo.modules.size() < 3);
        RouteSet rs;
        int relations = 0;
        int steps = std::uniform_int_distribution<int>(5, 15)(rng);
        for (int k = 0; k < steps && failure.empty(); ++k) {
            ++ops;
            int op = std::uniform_int_distribution<int>(0, 4)(rng);
            auto active = [&] {
                std::vector<RouteId> out;
                for (const auto& [id, r] : rs.routes)
                    if (r.status == RouteStatus::active) out.push_back(id);
                return out;
            }();
            if (op == 0 || active.empty()) {
                auto before = residual_capacity(rs, topo);
                auto out = negotiate_route(topo, rs, random_relation(rng, topo, "r" + std::to_string(relations++)));
                if (out.route_id) {
                    auto probe = out.route_set;
                    revoke_route(probe, *out.route_id);
                    ++revocations;
                    if (residual_capacity(probe, topo) != before) failure = "revocation did not restore residuals";
                }
                rs = out.route_set;
            } else if (op == 1) {
                auto& r = rs.routes.at(active[rng() % active.size()]);
                double thr = std::uniform_int_distribution<int>(1, 24)(rng) * 0.5;
                rs = renegotiate(rs, topo, DemandChanged{r.relation_id, thr}).route_set;
            } else if (op == 2) {
                auto it = std::next(topo.modules.begin(), static_cast<long>(rng() % topo.modules.size()));
                auto state = it->second.status.operational_state == OperationalState::operational ? OperationalState::fault
                                                                                                 : OperationalState::operational;
                topo = with_status(topo, it->first, state);
                rs = renegotiate(rs, topo, LayoutChanged{{it->first}}).route_set;
            } else if (op == 3) {
                auto id = active[rng() % active.size()];
                const auto& r = rs.routes.at(id);
                auto g = full_subgraph(topo);
                std::vector<ModuleId> path{r.path.front()};
                for (int hop = 0; hop < 6 && path.back() != r.path.back(); ++hop) {
                    std::vector<ModuleId> next;
                    for (const auto& [a, b] : g.edges())
                        if (a == path.back() && std::find(path.begin(), path.end(), b) == path.end()) next.push_back(b);
                    if (next.empty()) break;
                    path.push_back(next[rng() % next.size()]);
                }
                try {
                    rs = renegotiate(rs, topo, OperatorOverride{id, path}).route_set;
                } catch (const OverrideRejected&) {
                }
            } else {
                auto id = active[rng() % active.size()];
                auto without = rs;
                revoke_route(without, id);
                auto never = rs;
                never.routes.erase(id);
                ++revocations;
                if (residual_capacity(without, topo) != residual_capacity(never, topo))
                    failure = "revoked route still draws capacity";
                rs = without;
            }
            std::string why;
            if (failure.empty() && !capacity_respected(rs, topo, why)) failure = "capacity exceeded: " + why;
        }
    }
    return {failure.empty(), std::to_string(sequences) + " sequences, " + std::to_string(ops) + " operations, " +
                                 std::to_string(revocations) + " revocation checks" +
                                 (failure.empty() ? "" : "; " + failure)};
}

ScenarioConfig random_run_config(std::mt19937_64& rng, int i)
{
    static const char* bases[] = {"diamond.json", "ring_kill.json", "demonstrator.json", "practical.json"};
    auto c = load_scenario(t::scenario_path(bases[rng() % 4]));
    c.script.clear();
    c.name = "random-" + std::to_string(i);
    c.seed = rng();
    c.horizon = std::uniform_int_distribution<SimTime>(240, 600)(rng) * 1000;
    c.strategy = static_cast<RoutingStrategy>(rng() % 3);
    std::vector<ModuleId> ids;
    for (const auto& m : c.modules) ids.push_back(m.placement.module_id);
    c.relations.clear();
    int n = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int k = 0; k < n; ++k) {
        auto src = ids[rng() % ids.size()];
        auto snk = ids[rng() % ids.size()];
        while (snk == src) snk = ids[rng() % ids.size()];
        c.relations.push_back({"r" + std::to_string(k), src, snk,
                               static_cast<double>(std::uniform_int_distribution<int>(2, 12)(rng)),
                               std::uniform_int_distribution<int>(0, 5)(rng) * 0.1, 0});
    }
    return c;
}

Outcome anisotropy_and_deadlock()
{
    std::mt19937_64 rng(4242);
    int runs = 200;
    std::size_t scheduled = 0, overlaps = 0, breaches = 0, halted = 0;
    SimTime latest = 0;
    std::string first;
    for (int i = 0; i < runs; ++i) {
        auto c = random_run_config(rng, i);
        auto r = observed_run(c);
        auto o = t::opposing_overlaps(r.log);
        auto b = t::schedule_breaches(r.log, c.parameters.scheduling_horizon);
        for (const auto& rec : r.log.records()) {
            scheduled += rec.kind == record_kind::tu_scheduled;
            if (rec.kind == record_kind::tu_delivered) latest = std::max(latest, rec.t - c.horizon);
        }
        bool protocol = false;
        for (const auto& d : r.diagnostics) protocol = protocol || d.find("protocol violation") != std::string::npos;
        overlaps += o.size();
        breaches += b.size();
        halted += protocol;
        if (first.empty() && (!o.empty() || !b.empty() || protocol)) first = "; first failure in " + c.name;
    }
    return {overlaps == 0 && breaches == 0 && halted == 0,
            std::to_string(runs) + " runs, " + std::to_string(scheduled) + " scheduled TUs, " +
                std::to_string(overlaps) + " opposing overlaps, " + std::to_string(breaches) +
                " TUs off schedule or undelivered, " + std::to_string(halted) + " halted, last delivery " +
                fmt("%.1f", ms_to_seconds(latest)) + " s after horizon" + first};
}

/// Registry, topology and route table agree with each other.
std::vector<std::string> invariant_violations(const Simulation& sim)
{
    std::vector<std::string> out;
    const auto& c = sim.coordinator();
    if (!c.active) out.push_back("no active coordinator");
    std::set<ModuleId> alive = alive_modules(c.registry);
    std::set<ModuleId> topo;
    for (const auto& [id, e] : c.topology.modules) topo.insert(id);
    if (alive != topo) out.push_back("registry and topology disagree");
    for (const auto& con : c.topology.connections)
        if (!topo.count(con.a.module_id) || !topo.count(con.b.module_id)) out.push_back("dangling connection");
    std::map<RelationId, int> active;
    for (const auto& [id, r] : c.routes.routes) {
        if (r.status != RouteStatus::active) continue;
        ++active[r.relation_id];
        if (!route_valid(r, c.topology)) out.push_back("route " + id + " invalid");
    }
    for (const auto& [rel, n] : active)
        if (n > 1) out.push_back("relation " + rel + " has " + std::to_string(n) + " active routes");
    for (const auto& v : check_capacity(c.routes, c.topology)) out.push_back(v);
    for (const auto& id : alive) {
        auto it = sim.agents().find(id);
        if (it == sim.agents().end() || it->second.configuration.phase != RegistrationPhase::registered)
            out.push_back("module " + id + " not registered at its agent");
    }
    return out;
}

std::string conservation_text(const t::Conservation& c)
{
    return std::to_string(c.released) + " released = " + std::to_string(c.delivered) + " delivered + " +
           std::to_string(c.pending) + " pending";
}

Outcome reconfiguration()
{
    std::vector<std::string> notes, failures;
    auto check_common = [&](const std::string& name, Simulation& sim) {
        for (const auto& v : invariant_violations(sim)) failures.push_back(name + ": " + v);
        auto cons = t::conservation(sim);
        if (!cons.exact()) failures.push_back(name + ": conservation " + conservation_text(cons));
        if (auto h = sim.horizon_counts(); !h || h->released != h->delivered + h->in_flight + h->blocked + h->waiting)
            failures.push_back(name + ": horizon accounting does not balance");
        if (sim.halted()) failures.push_back(name + ": halted");
        observe(sim);
        return cons;
    };

    {  // startup
        auto c = load_scenario(t::scenario_path("diamond.json"));
        Simulation sim(c);
        sim.run_until(1000);
        for (const auto& v : invariant_violations(sim)) failures.push_back("startup: " + v);
        if (sim.coordinator().registry.entries.size() != 4 || sim.coordinator().topology.connections.size() != 4)
            failures.push_back("startup: expected 4 modules and 4 connections");
        if (sim.coordinator().routes.routes.size() != 2) failures.push_back("startup: expected 2 routes");
        sim.run_to_completion();
        auto cons = check_common("startup", sim);
        notes.push_back("startup " + conservation_text(cons));
    }
    {  // add module
        auto c = load_scenario(t::scenario_path("portal_add.json"));
        SimTime added = c.script.at(0).at;
        Simulation sim(c);
        sim.run_to_completion();
        std::map<ModuleId, int> via;
        for (const auto& r : sim.log().records())
            if (r.kind == record_kind::tu_scheduled && r.t > added)
                for (const char* p : {"P1", "P2"})
                    if (r.detail.find(p) != std::string::npos) ++via[p];
        if (via["P1"] == 0 || via["P2"] == 0) failures.push_back("add-module: orders not spread over both portals");
        if (!sim.coordinator().registry.entries.count("P2")) failures.push_back("add-module: P2 not registered");
        auto cons = check_common("add-module", sim);
        notes.push_back("add-module P1/P2 " + std::to_string(via["P1"]) + "/" + std::to_string(via["P2"]));
        (void)cons;
    }
    {  // remove module
        auto c = load_scenario(t::scenario_path("diamond_remove.json"));
        Simulation sim(c);
        sim.run_to_completion();
        const auto& gone = c.script.at(0).module_id;
        if (sim.coordinator().registry.entries.count(gone) || sim.coordinator().topology.find(gone))
            failures.push_back("remove-module: " + gone + " still present");
        for (const auto& [id, r] : sim.coordinator().routes.routes)
            if (r.status == RouteStatus::active && r.traverses(gone)) failures.push_back("remove-module: route via " + gone);
        auto cons = check_common("remove-module", sim);
        notes.push_back("remove-module " + conservation_text(cons));
    }
    {  // coordinator kill
        auto c = load_scenario(t::scenario_path("ring_kill.json"));
        Simulation sim(c);
        sim.run_to_completion();
        const auto& f = sim.last_failover();
        if (!f) {
            failures.push_back("kill: no failover");
        } else {
            SimTime took = f->elected_at - f->killed_at;
            if (took > 3 * c.parameters.heartbeat_period)
                failures.push_back("kill: failover took " + std::to_string(took) + " ms");
            if (!(f->registry_at_kill == f->registry_at_election)) failures.push_back("kill: registry lost in failover");
            notes.push_back("failover " + f->failed + "->" + f->successor + " in " + fmt("%.2f", ms_to_seconds(took)) +
                            " s");
        }
        check_common("kill", sim);
    }
    std::string detail;
    for (const auto& n : notes) detail += (detail.empty() ? "" : "; ") + n;
    for (const auto& f : failures) detail += "; FAIL " + f;
    return {failures.empty(), detail};
}

Outcome determinism()
{
    int pairs = 0;
    std::vector<std::string> differ;
    for (auto name : {"diamond.json", "portal_add.json", "diamond_remove.json", "ring_kill.json", "demonstrator.json",
                      "practical.json"}) {
        auto c = load_scenario(t::scenario_path(name));
        for (auto s : {RoutingStrategy::ssr, RoutingStrategy::baseline_occupancy}) {
            c.strategy = s;
            auto a = observed_run(c).log.to_jsonl();
            auto b = observed_run(c).log.to_jsonl();
            ++pairs;
            if (a != b) differ.push_back(std::string(name) + "/" + std::string(to_string(s)));
        }
    }
    std::string detail = std::to_string(pairs) + " run pairs byte-identical";
    if (!differ.empty()) detail = std::to_string(differ.size()) + " pairs differ, first " + differ.front();
    return {differ.empty(), detail};
}

Outcome effort()
{
    int cases = 0, bad = 0;
    for (double ie_mas : {0.0, 10.0, 50.0, 100.5, 240.0})
        for (double ie_con : {0.0, 5.0, 20.0, 100.5, 150.0})
            for (double ce_man : {0.0, 0.5, 3.0, 7.0, 12.25})
                for (double n : {0.0, 1.0, 5.0, 12.0, 40.0}) {
                    ++cases;
                    auto r = effort_model({ie_mas, ie_con, ce_man, n});
                    bool ok = r.te_con == ie_con + n * ce_man && r.te_mas == ie_mas;
                    if (ce_man > 0) {
                        long long expected = std::max(0LL, static_cast<long long>(std::ceil((ie_mas - ie_con) / ce_man)));
                        ok = ok && r.n_breakeven && *r.n_breakeven == expected;
                    } else {
                        ok = ok && (ie_con >= ie_mas ? r.n_breakeven == 0LL : !r.n_breakeven);
                    }
                    bad += !ok;
                }
    return {bad == 0, std::to_string(cases - bad) + "/" + std::to_string(cases) + " grid points match"};
}

}  // namespace

int main()
{
    struct Criterion {
        int id;
        const char* name;
        Outcome (*run)();
    };
    const Criterion criteria[] = {
        {1, "throughput gain on the diamond", throughput_gain},
        {2, "dedicated branches", dedicated_branches},
        {3, "path oracle", path_oracle},
        {4, "capacity safety", capacity_safety},
        {5, "anisotropy and deadlock freedom", anisotropy_and_deadlock},
        {7, "reconfiguration scenarios", reconfiguration},
        {8, "determinism", determinism},
        {9, "effort model", effort},
    };
    std::map<int, std::pair<std::string, Outcome>> results;
    for (const auto& c : criteria) {
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        results[c.id] = {c.name, o};
    }
    Outcome seq{g_sequence_failures.empty(), std::to_string(g_sequence_runs) + " runs checked"};
    if (!seq.pass) seq.detail += ", " + std::to_string(g_sequence_failures.size()) + " relations out of order, first " +
                                 g_sequence_failures.front();
    results[6] = {"sequence preservation", seq};

    bool all = true;
    for (const auto& [id, r] : results) {
        all = all && r.second.pass;
        std::cout << "criterion " << id << " (" << r.first << "): " << (r.second.pass ? "PASS" : "FAIL") << " - "
                  << r.second.detail << "\n";
    }
    return all ? 0 : 1;
}

#pragma once

// Shared fixtures and independent oracles for the unit and acceptance tests.

#include "amfs/routing.hpp"
#include "amfs/simulation.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace amfs::testing {

inline std::filesystem::path scenario_dir() { return AMFS_SCENARIO_DIR; }
inline std::filesystem::path scenario_path(const std::string& name) { return scenario_dir() / name; }

/// Descriptor without geometry; interfaces are named i0..i{n-1}.
inline ModuleDescriptor abstract_module(const ModuleId& id, int interfaces, std::vector<InternalLink> links)
{
    ModuleDescriptor d;
    d.module_id = id;
    d.footprint = {1000, 1000};
    d.abilities = {Ability{AbilityKind::transport, {}}};
    for (int i = 0; i < interfaces; ++i)
        d.interfaces.push_back({"i" + std::to_string(i), {0, 0}, 0, Flow::bidirectional, "euro"});
    d.internal_links = std::move(links);
    return d;
}

inline Topology add_abstract(Topology t, const ModuleDescriptor& d)
{
    t.modules[d.module_id] = ModuleEntry{d, Placement{d.module_id, {0, 0}, 0}, {}};
    return t;
}

/// Random topology of 2..max_modules modules, each with 2..4 interfaces.
/// Process times are whole seconds from a small range so ties are common.
inline Topology random_topology(std::mt19937_64& rng, int max_modules = 8)
{
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    Topology t;
    const int n = pick(2, max_modules);
    std::vector<std::pair<ModuleId, int>> free_ifaces;
    for (int m = 0; m < n; ++m) {
        ModuleId id = "m" + std::to_string(m);
        int k = pick(2, 4);
        std::vector<InternalLink> links;
        for (int a = 0; a < k; ++a)
            for (int b = a + 1; b < k; ++b) {
                if (pick(0, 3) == 0) continue;
                InternalLink l;
                bool flip = pick(0, 1) == 1;
                l.from_interface = "i" + std::to_string(flip ? b : a);
                l.to_interface = "i" + std::to_string(flip ? a : b);
                l.process_time = pick(1, 4);
                l.capacity = pick(3, 12);
                l.reversible = pick(0, 1) == 1;
                links.push_back(l);
            }
        t = add_abstract(std::move(t), abstract_module(id, k, links));
        for (int a = 0; a < k; ++a) free_ifaces.push_back({id, a});
    }
    std::shuffle(free_ifaces.begin(), free_ifaces.end(), rng);
    while (free_ifaces.size() > 1) {
        auto [ma, ia] = free_ifaces.back();
        free_ifaces.pop_back();
        auto partner = std::find_if(free_ifaces.begin(), free_ifaces.end(), [&](const auto& x) { return x.first != ma; });
        if (partner == free_ifaces.end()) break;
        auto [mb, ib] = *partner;
        free_ifaces.erase(partner);
        if (pick(0, 7) == 0) continue;
        static constexpr AllowedDirections dirs[] = {AllowedDirections::both, AllowedDirections::both,
                                                     AllowedDirections::a_to_b, AllowedDirections::b_to_a};
        t.connections.insert(make_connection({ma, "i" + std::to_string(ia)}, {mb, "i" + std::to_string(ib)},
                                             dirs[pick(0, 3)]));
    }
    for (auto& [id, e] : t.modules)
        if (pick(0, 11) == 0) e.status.operational_state = OperationalState::fault;
    return t;
}

/// Reserved capacity on a link, summed straight from the active routes.
inline double oracle_reserved(const RouteSet& rs, const ModuleId& m, const InternalLink& l)
{
    double sum = 0;
    for (const auto& [id, r] : rs.routes) {
        if (r.status != RouteStatus::active) continue;
        for (const auto& h : r.hops) {
            if (h.module_id != m) continue;
            bool same = h.link_from == l.from_interface && h.link_to == l.to_interface;
            bool opposite = h.link_from == l.to_interface && h.link_to == l.from_interface;
            if (same || (l.reversible && opposite)) sum += r.reserved_capacity;
        }
    }
    return sum;
}

struct OraclePath {
    std::vector<ModuleId> path;
    std::vector<RouteHop> hops;
    SimTime cost = 0;
};

inline auto oracle_hop_key(const RouteHop& h) { return std::tie(h.module_id, h.entry, h.exit, h.link_from, h.link_to); }

inline bool oracle_hops_less(const std::vector<RouteHop>& a, const std::vector<RouteHop>& b)
{
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(),
                                        [](const RouteHop& x, const RouteHop& y) { return oracle_hop_key(x) < oracle_hop_key(y); });
}

/// Exhaustive enumeration of module-simple paths and all their link
/// realizations over operational modules whose links keep `required` residual.
/// Best = least summed process time, then smallest module sequence, then
/// smallest hop sequence.
inline std::optional<OraclePath> oracle_shortest_path(const Topology& t, const RouteSet& rs, double required,
                                                      const ModuleId& source, const ModuleId& sink,
                                                      int* optimal_count = nullptr)
{
    struct Link {
        InterfaceId from, to;
        SimTime ms;
        bool reversible;
        int concurrency;
    };
    std::map<ModuleId, std::vector<Link>> links;
    std::set<ModuleId> ok;
    for (const auto& [id, e] : t.modules) {
        if (e.status.operational_state != OperationalState::operational) continue;
        ok.insert(id);
        for (const auto& l : e.descriptor.internal_links) {
            if (l.capacity - oracle_reserved(rs, id, l) + 1e-9 < required) continue;
            SimTime ms = std::max<SimTime>(1, static_cast<SimTime>(l.process_time * 1000.0 + 0.5));
            int conc = std::max(1, static_cast<int>(l.capacity * l.process_time / 60.0));
            links[id].push_back({l.from_interface, l.to_interface, ms, l.reversible, conc});
            if (l.reversible) links[id].push_back({l.to_interface, l.from_interface, ms, true, conc});
        }
    }
    if (!ok.count(source) || !ok.count(sink)) return std::nullopt;
    if (source == sink) return OraclePath{{source}, {}, 0};

    // directed arcs between interfaces
    std::set<std::pair<Endpoint, Endpoint>> arcs;
    for (const auto& c : t.connections) {
        if (!ok.count(c.a.module_id) || !ok.count(c.b.module_id)) continue;
        if (c.allowed != AllowedDirections::b_to_a) arcs.insert({c.a, c.b});
        if (c.allowed != AllowedDirections::a_to_b) arcs.insert({c.b, c.a});
    }
    std::set<ModuleId> buffers;
    for (const auto& [id, e] : t.modules)
        for (const auto& a : e.descriptor.abilities)
            if (a.kind == AbilityKind::buffer) buffers.insert(id);

    std::optional<OraclePath> best;
    int ties = 0;
    auto consider = [&](const OraclePath& p) {
        if (!best || p.cost < best->cost) ties = 0;
        if (!best || p.cost <= best->cost) ++ties;
        if (!best || p.cost < best->cost ||
            (p.cost == best->cost && (p.path < best->path || (p.path == best->path && oracle_hops_less(p.hops, best->hops)))))
            best = p;
    };

    std::vector<ModuleId> seq{source};
    std::set<ModuleId> used{source};
    std::function<void()> extend_modules;
    auto realize = [&] {
        OraclePath cur{seq, {}, 0};
        std::function<void(std::size_t, std::optional<InterfaceId>)> layer = [&](std::size_t i, std::optional<InterfaceId> entry) {
            const auto& m = seq[i];
            for (const auto& l : links[m]) {
                if (entry && l.from != *entry) continue;
                RouteHop h{m, entry, std::nullopt, l.from, l.to, l.ms, l.reversible, l.concurrency, buffers.count(m) > 0};
                if (i + 1 == seq.size()) {
                    cur.hops.push_back(h);
                    cur.cost += l.ms;
                    consider(cur);
                    cur.cost -= l.ms;
                    cur.hops.pop_back();
                    continue;
                }
                for (const auto& [from, to] : arcs) {
                    if (from.module_id != m || from.interface_id != l.to || to.module_id != seq[i + 1]) continue;
                    h.exit = l.to;
                    cur.hops.push_back(h);
                    cur.cost += l.ms;
                    layer(i + 1, to.interface_id);
                    cur.cost -= l.ms;
                    cur.hops.pop_back();
                }
            }
        };
        layer(0, std::nullopt);
    };
    extend_modules = [&] {
        const auto& last = seq.back();
        if (last == sink) {
            realize();
            return;
        }
        std::set<ModuleId> next;
        for (const auto& [from, to] : arcs)
            if (from.module_id == last && !used.count(to.module_id)) next.insert(to.module_id);
        for (const auto& n : next) {
            seq.push_back(n);
            used.insert(n);
            extend_modules();
            used.erase(n);
            seq.pop_back();
        }
    };
    extend_modules();
    if (optimal_count) *optimal_count = ties;
    return best;
}

/// Opposing traversals of one link whose occupancy intervals overlap.
struct TraversalConflict {
    ModuleId module;
    TuId a = 0;
    TuId b = 0;
};

inline std::vector<TraversalConflict> opposing_overlaps(const EventLog& log)
{
    struct Interval {
        TuId tu;
        InterfaceId from, to;
        SimTime start, end;
    };
    std::map<ModuleId, std::vector<Interval>> done;
    std::map<std::pair<ModuleId, TuId>, Interval> open;
    for (const auto& r : log.records()) {
        if (!r.tu) continue;
        if (r.kind == record_kind::tu_enter) {
            open[{r.module, *r.tu}] = {*r.tu, r.from, r.to, r.t, r.t};
        } else if (r.kind == record_kind::tu_exit) {
            auto it = open.find({r.module, *r.tu});
            if (it == open.end()) continue;
            it->second.end = r.t;
            done[r.module].push_back(it->second);
            open.erase(it);
        }
    }
    for (auto& [key, iv] : open) {
        iv.end = std::numeric_limits<SimTime>::max();
        done[key.first].push_back(iv);
    }
    std::vector<TraversalConflict> out;
    for (const auto& [m, ivs] : done)
        for (std::size_t i = 0; i < ivs.size(); ++i)
            for (std::size_t j = i + 1; j < ivs.size(); ++j) {
                const auto& x = ivs[i];
                const auto& y = ivs[j];
                bool opposing = x.from == y.to && x.to == y.from;
                if (opposing && x.start < y.end && y.start < x.end) out.push_back({m, x.tu, y.tu});
            }
    return out;
}

/// Relations whose sink-arrival order differs from their release order.
inline std::vector<RelationId> sequence_violations(const EventLog& log)
{
    std::map<RelationId, std::vector<TuId>> released, delivered;
    for (const auto& r : log.records()) {
        if (!r.tu) continue;
        if (r.kind == record_kind::tu_release) released[r.relation].push_back(*r.tu);
        if (r.kind == record_kind::tu_delivered) delivered[r.relation].push_back(*r.tu);
    }
    std::vector<RelationId> out;
    for (const auto& [rel, order] : delivered) {
        const auto& rel_order = released[rel];
        std::vector<TuId> expected;
        std::set<TuId> got(order.begin(), order.end());
        for (TuId t : rel_order)
            if (got.count(t)) expected.push_back(t);
        if (expected != order) out.push_back(rel);
    }
    return out;
}

/// Scheduled TUs that were never delivered, were delivered at a time other
/// than their booked arrival, or started later than `slack` after booking.
inline std::vector<TuId> schedule_breaches(const EventLog& log, SimTime slack)
{
    std::map<TuId, SimTime> booked_at, booked, first_enter, delivered;
    for (const auto& r : log.records()) {
        if (!r.tu) continue;
        if (r.kind == record_kind::tu_scheduled && r.value) {
            booked_at[*r.tu] = r.t;
            booked[*r.tu] = *r.value;
        }
        if (r.kind == record_kind::tu_enter) first_enter.emplace(*r.tu, r.t);
        if (r.kind == record_kind::tu_delivered) delivered[*r.tu] = r.t;
    }
    std::vector<TuId> out;
    for (const auto& [tu, arrival] : booked) {
        auto d = delivered.find(tu);
        auto e = first_enter.find(tu);
        bool ok = d != delivered.end() && d->second == arrival && e != first_enter.end() &&
                  e->second - booked_at[tu] <= slack;
        if (!ok) out.push_back(tu);
    }
    return out;
}

/// Released = delivered + in flight + waiting/blocked, counted from the log.
struct Conservation {
    std::size_t released = 0, delivered = 0, pending = 0, tracked = 0, stray = 0;
    bool exact() const { return stray == 0 && tracked == released && released == delivered + pending; }
};

inline Conservation conservation(const Simulation& sim)
{
    Conservation c;
    std::set<TuId> rel, del;
    for (const auto& r : sim.log().records()) {
        if (!r.tu) continue;
        if (r.kind == record_kind::tu_release) rel.insert(*r.tu);
        if (r.kind == record_kind::tu_delivered) del.insert(*r.tu);
    }
    c.released = rel.size();
    c.delivered = del.size();
    c.tracked = sim.tus().size();
    for (const auto& [id, tu] : sim.tus())
        if (tu.state != TuState::delivered) ++c.pending;
    for (TuId t : del)
        if (!rel.count(t)) ++c.stray;
    return c;
}

}  // namespace amfs::testing

#include "amfs/routing.hpp"

#include <algorithm>
#include <functional>
#include <limits>
#include <queue>
#include <tuple>

namespace amfs {

namespace {

constexpr double kCapacityEpsilon = 1e-9;
constexpr SimTime kUnreachable = std::numeric_limits<SimTime>::max();

SimTime link_time_ms(const InternalLink& l) { return std::max<SimTime>(1, seconds_to_ms(l.process_time)); }

auto hop_tie(const RouteHop& h) { return std::tie(h.module_id, h.entry, h.exit, h.link_from, h.link_to); }

bool operational(const ModuleEntry& e) { return e.status.operational_state == OperationalState::operational; }

RouteHop make_hop(const FeasibleSubgraph& g, const ModuleId& m, std::optional<InterfaceId> entry,
                  std::optional<InterfaceId> exit, const OrientedLink& l)
{
    return {m, std::move(entry), std::move(exit), l.from, l.to, l.process_time, l.reversible, l.concurrency,
            g.buffers.count(m) > 0};
}

std::map<Endpoint, std::vector<const Arc*>> arcs_by_origin(const FeasibleSubgraph& g)
{
    std::map<Endpoint, std::vector<const Arc*>> out;
    for (const auto& a : g.arcs) out[a.from].push_back(&a);
    return out;
}

// Explicit state graph: a state is (module, entry interface); the source
// state has no entry. One extra terminal node stands for leaving the sink.
class StateGraph {
public:
    struct Edge {
        int to;  // -1 = terminal
        SimTime cost;
        RouteHop hop;
    };

    StateGraph(const FeasibleSubgraph& g, const ModuleId& source, const ModuleId& sink) : source_(source), sink_(sink)
    {
        start_ = node(source, std::nullopt);
        for (const auto& a : g.arcs)
            if (a.to.module_id != source) node(a.to.module_id, a.to.interface_id);

        auto by_origin = arcs_by_origin(g);
        edges_.resize(keys_.size());
        for (std::size_t s = 0; s < keys_.size(); ++s) {
            const auto& [m, entry] = keys_[s];
            auto lit = g.links.find(m);
            if (lit == g.links.end()) continue;
            for (const auto& l : lit->second) {
                if (entry && l.from != *entry) continue;
                if (m == sink) {
                    if (!entry) continue;
                    edges_[s].push_back({-1, l.process_time, make_hop(g, m, entry, std::nullopt, l)});
                    continue;
                }
                auto ait = by_origin.find(Endpoint{m, l.to});
                if (ait == by_origin.end()) continue;
                for (const Arc* a : ait->second) {
                    if (a->to.module_id == source) continue;
                    int t = index_of(a->to.module_id, a->to.interface_id);
                    edges_[s].push_back({t, l.process_time, make_hop(g, m, entry, l.to, l)});
                }
            }
        }
        compute_distances();
    }

    int start() const { return start_; }
    const ModuleId& module(int s) const { return keys_[static_cast<std::size_t>(s)].first; }
    const std::vector<Edge>& edges(int s) const { return edges_[static_cast<std::size_t>(s)]; }
    SimTime dist(int s) const { return s < 0 ? 0 : dist_[static_cast<std::size_t>(s)]; }
    bool is_sink(int s) const { return module(s) == sink_; }

private:
    using Key = std::pair<ModuleId, std::optional<InterfaceId>>;

    int node(const ModuleId& m, std::optional<InterfaceId> entry)
    {
        Key k{m, std::move(entry)};
        auto [it, inserted] = index_.emplace(k, static_cast<int>(keys_.size()));
        if (inserted) keys_.push_back(k);
        return it->second;
    }
    int index_of(const ModuleId& m, const InterfaceId& entry) const { return index_.at(Key{m, entry}); }

    // Reverse Dijkstra from the terminal node.
    void compute_distances()
    {
        std::size_t n = keys_.size();
        dist_.assign(n, kUnreachable);
        std::vector<std::vector<std::pair<int, SimTime>>> rev(n);
        using Item = std::pair<SimTime, int>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        for (std::size_t s = 0; s < n; ++s) {
            for (const auto& e : edges_[s]) {
                if (e.to < 0) {
                    if (e.cost < dist_[s]) dist_[s] = e.cost;
                } else {
                    rev[static_cast<std::size_t>(e.to)].push_back({static_cast<int>(s), e.cost});
                }
            }
        }
        for (std::size_t s = 0; s < n; ++s)
            if (dist_[s] != kUnreachable) pq.push({dist_[s], static_cast<int>(s)});
        while (!pq.empty()) {
            auto [d, u] = pq.top();
            pq.pop();
            if (d != dist_[static_cast<std::size_t>(u)]) continue;
            for (auto [v, c] : rev[static_cast<std::size_t>(u)]) {
                SimTime nd = d + c;
                if (nd < dist_[static_cast<std::size_t>(v)]) {
                    dist_[static_cast<std::size_t>(v)] = nd;
                    pq.push({nd, v});
                }
            }
        }
    }

    ModuleId source_;
    ModuleId sink_;
    int start_ = 0;
    std::map<Key, int> index_;
    std::vector<Key> keys_;
    std::vector<std::vector<Edge>> edges_;
    std::vector<SimTime> dist_;
};

// Lexicographically smallest module sequence among optimal walks.
std::vector<ModuleId> greedy_module_sequence(const StateGraph& sg, SimTime opt)
{
    std::vector<ModuleId> seq{sg.module(sg.start())};
    std::map<int, SimTime> frontier{{sg.start(), 0}};
    while (true) {
        if (sg.is_sink(frontier.begin()->first)) return seq;
        std::optional<ModuleId> best;
        std::map<int, SimTime> next;
        for (auto [s, g] : frontier) {
            for (const auto& e : sg.edges(s)) {
                if (e.to < 0) continue;
                SimTime d = sg.dist(e.to);
                if (d == kUnreachable || g + e.cost + d != opt) continue;
                const auto& m = sg.module(e.to);
                if (!best || m < *best) {
                    best = m;
                    next.clear();
                }
                if (m == *best) next[e.to] = g + e.cost;
            }
        }
        if (!best) return {};  // unreachable with a consistent distance table
        seq.push_back(*best);
        frontier = std::move(next);
    }
}

struct Candidate {
    SimTime cost;
    std::vector<ModuleId> path;
    std::vector<RouteHop> hops;
};

bool candidate_less(const Candidate& a, const Candidate& b)
{
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.path != b.path) return a.path < b.path;
    return hops_key_less(a.hops, b.hops);
}

// Exact branch-and-bound over module-simple paths; used only when the
// optimal walk revisits a module.
std::optional<Candidate> exact_simple_search(const StateGraph& sg)
{
    std::optional<Candidate> best;
    std::set<ModuleId> visited{sg.module(sg.start())};
    Candidate cur{0, {sg.module(sg.start())}, {}};

    std::function<void(int)> dfs = [&](int s) {
        for (const auto& e : sg.edges(s)) {
            if (e.to >= 0 && sg.dist(e.to) == kUnreachable) continue;
            SimTime lower = cur.cost + e.cost + sg.dist(e.to);
            if (best && lower > best->cost) continue;
            cur.cost += e.cost;
            cur.hops.push_back(e.hop);
            if (e.to < 0) {
                if (!best || candidate_less(cur, *best)) best = cur;
            } else if (!visited.count(sg.module(e.to))) {
                const auto& m = sg.module(e.to);
                visited.insert(m);
                cur.path.push_back(m);
                dfs(e.to);
                cur.path.pop_back();
                visited.erase(m);
            }
            cur.hops.pop_back();
            cur.cost -= e.cost;
        }
    };
    dfs(sg.start());
    return best;
}

bool has_duplicates(std::vector<ModuleId> v)
{
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) != v.end();
}

}  // namespace

bool hop_key_less(const RouteHop& a, const RouteHop& b) { return hop_tie(a) < hop_tie(b); }

bool hops_key_less(const std::vector<RouteHop>& a, const std::vector<RouteHop>& b)
{
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), hop_key_less);
}

std::string_view to_string(RouteStatus s) { return s == RouteStatus::active ? "active" : "revoked"; }

bool SemiStaticRoute::traverses(std::string_view module) const
{
    return std::find(path.begin(), path.end(), module) != path.end();
}

std::optional<ModuleId> SemiStaticRoute::predecessor(std::string_view module) const
{
    auto it = std::find(path.begin(), path.end(), module);
    if (it == path.end() || it == path.begin()) return std::nullopt;
    return *std::prev(it);
}

std::optional<ModuleId> SemiStaticRoute::successor(std::string_view module) const
{
    auto it = std::find(path.begin(), path.end(), module);
    if (it == path.end() || std::next(it) == path.end()) return std::nullopt;
    return *std::next(it);
}

const SemiStaticRoute* RouteSet::active_route(std::string_view relation_id) const
{
    for (const auto& [id, r] : routes)
        if (r.status == RouteStatus::active && r.relation_id == relation_id) return &r;
    return nullptr;
}

std::vector<RouteId> RouteSet::active_routes_through(std::string_view module) const
{
    std::vector<RouteId> out;
    for (const auto& [id, r] : routes)
        if (r.status == RouteStatus::active && r.traverses(module)) out.push_back(id);
    return out;
}

double RouteSet::reserved(const LinkKey& link, bool reversible) const
{
    double sum = 0.0;
    for (const auto& [id, r] : routes) {
        if (r.status != RouteStatus::active) continue;
        for (const auto& h : r.hops) {
            if (h.module_id != link.module_id) continue;
            bool same = h.link_from == link.from && h.link_to == link.to;
            bool opposite = reversible && h.link_from == link.to && h.link_to == link.from;
            if (same || opposite) sum += r.reserved_capacity;
        }
    }
    return sum;
}

const InternalLink* find_link(const ModuleDescriptor& d, std::string_view from, std::string_view to)
{
    for (const auto& l : d.internal_links) {
        if (l.from_interface == from && l.to_interface == to) return &l;
        if (l.reversible && l.from_interface == to && l.to_interface == from) return &l;
    }
    return nullptr;
}

double residual(const RouteSet& routes, const Topology& topology, const LinkKey& key)
{
    const auto* e = topology.find(key.module_id);
    if (!e) throw UnknownModuleError("unknown module '" + key.module_id + "'");
    const auto* l = find_link(e->descriptor, key.from, key.to);
    if (!l) throw Error("module '" + key.module_id + "' has no link " + key.from + "->" + key.to);
    return l->capacity - routes.reserved(key, l->reversible);
}

std::map<LinkKey, double> residual_capacity(const RouteSet& routes, const Topology& topology)
{
    std::map<LinkKey, double> out;
    for (const auto& [id, e] : topology.modules) {
        for (const auto& l : e.descriptor.internal_links) {
            LinkKey fwd{id, l.from_interface, l.to_interface};
            out[fwd] = l.capacity - routes.reserved(fwd, l.reversible);
            if (l.reversible) out[{id, l.to_interface, l.from_interface}] = out[fwd];
        }
    }
    return out;
}

std::vector<std::string> check_capacity(const RouteSet& routes, const Topology& topology)
{
    std::vector<std::string> out;
    for (const auto& [id, e] : topology.modules) {
        for (const auto& l : e.descriptor.internal_links) {
            double used = routes.reserved({id, l.from_interface, l.to_interface}, l.reversible);
            if (used > l.capacity + kCapacityEpsilon)
                out.push_back("module '" + id + "' link " + l.from_interface + "->" + l.to_interface +
                              " reserved " + std::to_string(used) + " > capacity " + std::to_string(l.capacity));
        }
    }
    for (const auto& [rid, r] : routes.routes) {
        if (r.status != RouteStatus::active) continue;
        auto rel = routes.relations.find(r.relation_id);
        if (rel != routes.relations.end() && r.reserved_capacity + kCapacityEpsilon < rel->second.required_throughput)
            out.push_back("route '" + rid + "' reserves less than its relation requires");
    }
    return out;
}

std::set<std::pair<ModuleId, ModuleId>> FeasibleSubgraph::edges() const
{
    auto has = [&](const ModuleId& m, auto pred) {
        auto it = links.find(m);
        return it != links.end() && std::any_of(it->second.begin(), it->second.end(), pred);
    };
    std::set<std::pair<ModuleId, ModuleId>> out;
    for (const auto& a : arcs) {
        bool out_ok = has(a.from.module_id, [&](const OrientedLink& l) { return l.to == a.from.interface_id; });
        bool in_ok = has(a.to.module_id, [&](const OrientedLink& l) { return l.from == a.to.interface_id; });
        if (out_ok && in_ok) out.insert({a.from.module_id, a.to.module_id});
    }
    return out;
}

namespace {

FeasibleSubgraph build_subgraph(const Topology& topology, const RouteSet* routes, double required)
{
    FeasibleSubgraph g;
    for (const auto& [id, e] : topology.modules) {
        if (!operational(e)) continue;
        g.modules.insert(id);
        if (e.descriptor.has_ability(AbilityKind::buffer)) g.buffers.insert(id);
        auto& out = g.links[id];
        for (const auto& l : e.descriptor.internal_links) {
            if (routes) {
                double res = l.capacity - routes->reserved({id, l.from_interface, l.to_interface}, l.reversible);
                if (res + kCapacityEpsilon < required) continue;
            }
            OrientedLink ol{l.from_interface, l.to_interface, link_time_ms(l), l.reversible, concurrent_capacity(l)};
            out.push_back(ol);
            if (l.reversible) {
                std::swap(ol.from, ol.to);
                out.push_back(ol);
            }
        }
        std::sort(out.begin(), out.end(),
                  [](const OrientedLink& a, const OrientedLink& b) { return std::tie(a.from, a.to) < std::tie(b.from, b.to); });
    }
    for (const auto& c : topology.connections) {
        if (!g.modules.count(c.a.module_id) || !g.modules.count(c.b.module_id)) continue;
        if (c.permits_from(c.a)) g.arcs.push_back({c.a, c.b});
        if (c.permits_from(c.b)) g.arcs.push_back({c.b, c.a});
    }
    std::sort(g.arcs.begin(), g.arcs.end(),
              [](const Arc& x, const Arc& y) { return std::tie(x.from, x.to) < std::tie(y.from, y.to); });
    return g;
}

}  // namespace

FeasibleSubgraph feasible_subgraph(const Topology& topology, const RouteSet& routes,
                                   const MaterialFlowRelation& relation)
{
    return build_subgraph(topology, &routes, relation.required_throughput);
}

FeasibleSubgraph full_subgraph(const Topology& topology) { return build_subgraph(topology, nullptr, 0.0); }

std::optional<PathResult> realize_path(const FeasibleSubgraph& g, const std::vector<ModuleId>& modules)
{
    if (modules.empty()) return std::nullopt;
    for (const auto& m : modules)
        if (!g.modules.count(m)) return std::nullopt;
    if (modules.size() == 1) return PathResult{modules, {}, 0};

    auto by_origin = arcs_by_origin(g);
    const std::size_t k = modules.size() - 1;

    struct Step {
        std::optional<InterfaceId> entry;
        RouteHop hop;
        std::optional<InterfaceId> next_entry;  // empty on the last layer
        SimTime cost;
    };
    // Transitions per layer, grouped by entry interface.
    std::vector<std::vector<Step>> steps(k + 1);
    for (std::size_t i = 0; i <= k; ++i) {
        const auto& m = modules[i];
        auto lit = g.links.find(m);
        if (lit == g.links.end()) return std::nullopt;
        for (const auto& l : lit->second) {
            if (i == k) {
                steps[i].push_back({l.from, make_hop(g, m, l.from, std::nullopt, l), std::nullopt, l.process_time});
                continue;
            }
            auto ait = by_origin.find(Endpoint{m, l.to});
            if (ait == by_origin.end()) continue;
            for (const Arc* a : ait->second) {
                if (a->to.module_id != modules[i + 1]) continue;
                std::optional<InterfaceId> entry;
                if (i > 0) entry = l.from;
                steps[i].push_back({entry, make_hop(g, m, entry, l.to, l), a->to.interface_id, l.process_time});
            }
        }
    }

    // best[i][entry]: cheapest completion from layer i entering through `entry`.
    std::vector<std::map<std::optional<InterfaceId>, SimTime>> best(k + 2);
    for (std::size_t i = k + 1; i-- > 0;) {
        for (const auto& s : steps[i]) {
            SimTime rest = 0;
            if (i < k) {
                auto it = best[i + 1].find(s.next_entry);
                if (it == best[i + 1].end()) continue;
                rest = it->second;
            }
            auto [it, inserted] = best[i].emplace(s.entry, s.cost + rest);
            if (!inserted) it->second = std::min(it->second, s.cost + rest);
        }
    }
    auto root = best[0].find(std::nullopt);
    if (root == best[0].end()) return std::nullopt;
    const SimTime opt = root->second;

    PathResult out{modules, {}, opt};
    std::map<std::optional<InterfaceId>, SimTime> frontier{{std::nullopt, 0}};
    for (std::size_t i = 0; i <= k; ++i) {
        const Step* chosen = nullptr;
        for (const auto& s : steps[i]) {
            auto f = frontier.find(s.entry);
            if (f == frontier.end()) continue;
            SimTime rest = 0;
            if (i < k) {
                auto it = best[i + 1].find(s.next_entry);
                if (it == best[i + 1].end()) continue;
                rest = it->second;
            }
            if (f->second + s.cost + rest != opt) continue;
            if (!chosen || hop_key_less(s.hop, chosen->hop)) chosen = &s;
        }
        if (!chosen) return std::nullopt;
        SimTime g_next = frontier.at(chosen->entry) + chosen->cost;
        out.hops.push_back(chosen->hop);
        if (i == k) break;
        std::map<std::optional<InterfaceId>, SimTime> next;
        for (const auto& s : steps[i]) {
            if (s.entry != chosen->entry || !(s.hop == chosen->hop)) continue;
            auto it = best[i + 1].find(s.next_entry);
            if (it != best[i + 1].end() && g_next + it->second == opt) next[s.next_entry] = g_next;
        }
        frontier = std::move(next);
    }
    return out;
}

std::optional<PathResult> shortest_process_time_path(const FeasibleSubgraph& g, std::string_view source,
                                                     std::string_view sink)
{
    if (!g.modules.count(std::string(source)))
        throw UnknownModuleError("source '" + std::string(source) + "' absent from subgraph");
    if (!g.modules.count(std::string(sink)))
        throw UnknownModuleError("sink '" + std::string(sink) + "' absent from subgraph");
    if (source == sink) return PathResult{{std::string(source)}, {}, 0};

    StateGraph sg(g, std::string(source), std::string(sink));
    SimTime opt = sg.dist(sg.start());
    if (opt == kUnreachable) return std::nullopt;

    auto seq = greedy_module_sequence(sg, opt);
    if (!seq.empty() && !has_duplicates(seq)) {
        if (auto r = realize_path(g, seq); r && r->cost == opt) return r;
    }
    auto exact = exact_simple_search(sg);
    if (!exact) return std::nullopt;
    return PathResult{exact->path, exact->hops, exact->cost};
}

namespace {

SemiStaticRoute make_route(RouteSet& rs, const MaterialFlowRelation& rel, PathResult path)
{
    SemiStaticRoute r;
    r.route_id = "ssr-" + std::to_string(rs.next_route_number++);
    r.relation_id = rel.relation_id;
    r.path = std::move(path.path);
    r.hops = std::move(path.hops);
    r.reserved_capacity = rel.required_throughput;
    r.expected_process_time = ms_to_seconds(path.cost);
    r.status = RouteStatus::active;
    return r;
}

std::optional<std::string> try_negotiate(const Topology& topology, RouteSet& rs, const MaterialFlowRelation& rel,
                                         RouteId* installed)
{
    rs.relations[rel.relation_id] = rel;
    if (!topology.find(rel.source)) return "source_absent";
    if (!topology.find(rel.sink)) return "sink_absent";
    auto g = feasible_subgraph(topology, rs, rel);
    if (!g.modules.count(rel.source) || !g.modules.count(rel.sink)) return std::string(kNoCapacityPath);
    auto path = shortest_process_time_path(g, rel.source, rel.sink);
    if (!path) return std::string(kNoCapacityPath);
    auto route = make_route(rs, rel, std::move(*path));
    if (installed) *installed = route.route_id;
    rs.routes.emplace(route.route_id, std::move(route));
    return std::nullopt;
}

std::vector<MaterialFlowRelation> pending_in_priority_order(const RouteSet& rs)
{
    std::vector<MaterialFlowRelation> out;
    for (const auto& [id, rel] : rs.relations)
        if (!rs.active_route(id)) out.push_back(rel);
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
        if (a.priority != b.priority) return a.priority > b.priority;
        return a.relation_id < b.relation_id;
    });
    return out;
}

void negotiate_all_pending(const Topology& topology, RouteSet& rs, std::vector<RouteId>& installed,
                           std::vector<std::pair<RelationId, std::string>>& rejected)
{
    for (const auto& rel : pending_in_priority_order(rs)) {
        RouteId id;
        if (auto why = try_negotiate(topology, rs, rel, &id)) rejected.push_back({rel.relation_id, *why});
        else installed.push_back(id);
    }
}

}  // namespace

NegotiationResult negotiate_route(const Topology& topology, const RouteSet& routes, const MaterialFlowRelation& rel)
{
    if (!(rel.required_throughput > 0.0)) throw Error("relation '" + rel.relation_id + "': required_throughput must be > 0");
    if (!topology.find(rel.source)) throw UnknownModuleError("source '" + rel.source + "' absent");
    if (!topology.find(rel.sink)) throw UnknownModuleError("sink '" + rel.sink + "' absent");
    if (routes.active_route(rel.relation_id))
        throw Error("relation '" + rel.relation_id + "' already has an active route");
    NegotiationResult out{routes, std::nullopt, std::nullopt};
    ++out.route_set.revision;
    RouteId id;
    if (auto why = try_negotiate(topology, out.route_set, rel, &id)) out.rejection = *why;
    else out.route_id = id;
    return out;
}

BatchOutcome negotiate_pending(const Topology& topology, const RouteSet& routes)
{
    BatchOutcome out{routes, {}, {}};
    ++out.route_set.revision;
    negotiate_all_pending(topology, out.route_set, out.installed, out.rejected);
    return out;
}

bool revoke_route(RouteSet& routes, std::string_view route_id)
{
    auto it = routes.routes.find(std::string(route_id));
    if (it == routes.routes.end() || it->second.status != RouteStatus::active) return false;
    it->second.status = RouteStatus::revoked;
    return true;
}

bool route_valid(const SemiStaticRoute& route, const Topology& topology)
{
    for (std::size_t i = 0; i < route.hops.size(); ++i) {
        const auto& h = route.hops[i];
        const auto* e = topology.find(h.module_id);
        if (!e || !operational(*e) || !find_link(e->descriptor, h.link_from, h.link_to)) return false;
        if (i + 1 < route.hops.size()) {
            const auto& n = route.hops[i + 1];
            if (!h.exit || !n.entry) return false;
            Endpoint from{h.module_id, *h.exit};
            auto c = make_connection(from, Endpoint{n.module_id, *n.entry}, AllowedDirections::both);
            auto it = std::find_if(topology.connections.begin(), topology.connections.end(),
                                   [&](const Connection& x) { return x.a == c.a && x.b == c.b; });
            if (it == topology.connections.end() || !it->permits_from(from)) return false;
        }
    }
    for (const auto& m : route.path) {
        const auto* e = topology.find(m);
        if (!e || !operational(*e)) return false;
    }
    return true;
}

OverrideRejected::OverrideRejected(std::string constraint, std::string detail)
    : Error(constraint + ": " + detail), constraint_(std::move(constraint)), detail_(std::move(detail))
{
}

namespace {

RenegotiationOutcome apply_override(const RouteSet& routes, const Topology& topology, const OperatorOverride& ov)
{
    auto it = routes.routes.find(ov.route_id);
    if (it == routes.routes.end()) throw OverrideRejected("unknown_entity", "route '" + ov.route_id + "'");
    if (it->second.status != RouteStatus::active)
        throw OverrideRejected("unknown_entity", "route '" + ov.route_id + "' is not active");
    const auto& rel = routes.relations.at(it->second.relation_id);
    const auto& path = ov.forced_path;
    if (path.empty() || path.front() != rel.source || path.back() != rel.sink)
        throw OverrideRejected("endpoint_mismatch", "forced path must run from '" + rel.source + "' to '" + rel.sink + "'");
    if (has_duplicates(path)) throw OverrideRejected("disconnected_path", "forced path revisits a module");
    for (const auto& m : path) {
        const auto* e = topology.find(m);
        if (!e) throw OverrideRejected("unknown_entity", "module '" + m + "'");
        if (!operational(*e)) throw OverrideRejected("module_not_operational", "module '" + m + "'");
    }

    RouteSet without = routes;
    revoke_route(without, ov.route_id);
    auto full = full_subgraph(topology);
    if (!realize_path(full, path)) {
        for (std::size_t i = 0; i + 1 < path.size(); ++i)
            if (!realize_path(full, {path.begin(), path.begin() + static_cast<long>(i) + 2}))
                throw OverrideRejected("disconnected_path", "no usable connection '" + path[i] + "' -> '" + path[i + 1] + "'");
        throw OverrideRejected("disconnected_path", "forced path cannot be traversed");
    }
    auto feasible = feasible_subgraph(topology, without, rel);
    auto realized = realize_path(feasible, path);
    if (!realized) {
        // Name the first module whose links alone cannot carry the demand.
        for (const auto& m : path) {
            auto probe = full;
            probe.links[m] = feasible.links[m];
            if (!realize_path(probe, path)) throw OverrideRejected("capacity_violation", "module '" + m + "' saturated");
        }
        throw OverrideRejected("capacity_violation", "forced path lacks residual capacity");
    }

    RenegotiationOutcome out{std::move(without), {ov.route_id}, {}, {}};
    ++out.route_set.revision;
    auto route = make_route(out.route_set, rel, std::move(*realized));
    out.installed.push_back(route.route_id);
    out.route_set.routes.emplace(route.route_id, std::move(route));
    return out;
}

}  // namespace

RenegotiationOutcome renegotiate(const RouteSet& routes, const Topology& topology, const RenegotiationTrigger& trigger,
                                 RenegotiationPolicy policy)
{
    if (const auto* ov = std::get_if<OperatorOverride>(&trigger)) return apply_override(routes, topology, *ov);

    RenegotiationOutcome out{routes, {}, {}, {}};
    ++out.route_set.revision;
    auto& rs = out.route_set;

    if (const auto* lc = std::get_if<LayoutChanged>(&trigger)) {
        for (const auto& [id, r] : routes.routes) {
            if (r.status != RouteStatus::active) continue;
            bool touched = std::any_of(r.path.begin(), r.path.end(), [&](const ModuleId& m) { return lc->hint.count(m); });
            if (touched || !route_valid(r, topology)) {
                revoke_route(rs, id);
                out.revoked.push_back(id);
            }
        }
        negotiate_all_pending(topology, rs, out.installed, out.rejected);
        // A renegotiated route identical to the one it replaces keeps its id.
        for (auto it = out.revoked.begin(); it != out.revoked.end();) {
            auto& old_route = rs.routes.at(*it);
            auto same = std::find_if(out.installed.begin(), out.installed.end(), [&](const RouteId& id) {
                const auto& n = rs.routes.at(id);
                return n.relation_id == old_route.relation_id && n.hops == old_route.hops &&
                       n.reserved_capacity == old_route.reserved_capacity;
            });
            if (same == out.installed.end()) {
                ++it;
                continue;
            }
            rs.routes.erase(*same);
            out.installed.erase(same);
            old_route.status = RouteStatus::active;
            it = out.revoked.erase(it);
        }
        return out;
    }

    const auto& dc = std::get<DemandChanged>(trigger);
    auto rel_it = rs.relations.find(dc.relation_id);
    if (rel_it == rs.relations.end()) throw Error("unknown relation '" + dc.relation_id + "'");
    if (!(dc.new_throughput > 0.0)) throw Error("required_throughput must be > 0");
    rel_it->second.required_throughput = dc.new_throughput;
    if (const auto* active = rs.active_route(dc.relation_id)) {
        bool grow = dc.new_throughput > active->reserved_capacity + kCapacityEpsilon;
        bool reclaim = dc.new_throughput < policy.reclaim_fraction * active->reserved_capacity;
        if (!grow && !reclaim) return out;
        RouteId id = active->route_id;
        revoke_route(rs, id);
        out.revoked.push_back(id);
    }
    RouteId id;
    if (auto why = try_negotiate(topology, rs, rel_it->second, &id)) out.rejected.push_back({dc.relation_id, *why});
    else out.installed.push_back(id);
    return out;
}

}  // namespace amfs

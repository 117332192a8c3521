#include "amfs/topology.hpp"

#include <algorithm>
#include <cmath>

namespace amfs {

namespace {

constexpr double kAreaEpsilon = 1e-6;

bool can_send(Flow f) { return f != Flow::inbound; }
bool can_receive(Flow f) { return f != Flow::outbound; }

double angle_distance(double a, double b)
{
    double d = std::fmod(std::fabs(a - b), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

void check_rotation(const Placement& p)
{
    if (p.rotation != 0 && p.rotation != 90 && p.rotation != 180 && p.rotation != 270)
        throw Error("placement of '" + p.module_id + "': rotation must be 0, 90, 180 or 270");
}

bool overlaps(const Rect& r, const Rect& s)
{
    double w = std::min(r.x1, s.x1) - std::max(r.x0, s.x0);
    double h = std::min(r.y1, s.y1) - std::max(r.y0, s.y0);
    return w > kAreaEpsilon && h > kAreaEpsilon;
}

struct GlobalInterface {
    Endpoint endpoint;
    Point position;
    double heading;
    Flow flow;
    const std::string* tu_class;
};

std::vector<GlobalInterface> global_interfaces(const PlacedModule& m)
{
    std::vector<GlobalInterface> out;
    for (const auto& itf : m.descriptor.interfaces) {
        out.push_back({{m.placement.module_id, itf.interface_id},
                       to_global(m.placement, itf.local_position),
                       to_global_heading(m.placement, itf.heading),
                       itf.flow,
                       &itf.tu_class});
    }
    return out;
}

std::optional<Connection> match(const GlobalInterface& x, const GlobalInterface& y, const GeometryTolerance& tol)
{
    if (*x.tu_class != *y.tu_class) return std::nullopt;
    double dist = std::hypot(x.position.x - y.position.x, x.position.y - y.position.y);
    if (dist > tol.position_mm) return std::nullopt;
    if (angle_distance(x.heading, y.heading) < 180.0 - tol.heading_deg) return std::nullopt;
    bool fwd = can_send(x.flow) && can_receive(y.flow);
    bool bwd = can_send(y.flow) && can_receive(x.flow);
    if (!fwd && !bwd) return std::nullopt;
    auto dir = fwd && bwd ? AllowedDirections::both : fwd ? AllowedDirections::a_to_b : AllowedDirections::b_to_a;
    return make_connection(x.endpoint, y.endpoint, dir);
}

void check_overlap(const PlacedModule& m, const PlacedModule& n)
{
    if (overlaps(global_footprint(m.descriptor.footprint, m.placement),
                 global_footprint(n.descriptor.footprint, n.placement)))
        throw OverlapError("footprints of '" + m.placement.module_id + "' and '" + n.placement.module_id +
                           "' overlap");
}

void connect_pair(const PlacedModule& m, const PlacedModule& n, const GeometryTolerance& tol,
                  std::set<Connection>& out)
{
    auto gm = global_interfaces(m);
    auto gn = global_interfaces(n);
    for (const auto& x : gm)
        for (const auto& y : gn)
            if (auto c = match(x, y, tol)) out.insert(*c);
}

PlacedModule instance(const ModuleDescriptor& d, const Placement& p)
{
    PlacedModule m{d, p};
    m.descriptor.module_id = p.module_id;
    return m;
}

}  // namespace

std::string_view to_string(AllowedDirections d)
{
    switch (d) {
    case AllowedDirections::a_to_b: return "a_to_b";
    case AllowedDirections::b_to_a: return "b_to_a";
    case AllowedDirections::both: return "both";
    }
    return "?";
}

bool Connection::permits_from(const Endpoint& from) const
{
    if (allowed == AllowedDirections::both) return from == a || from == b;
    if (allowed == AllowedDirections::a_to_b) return from == a;
    return from == b;
}

Connection make_connection(Endpoint a, Endpoint b, AllowedDirections allowed)
{
    if (b < a) {
        std::swap(a, b);
        if (allowed == AllowedDirections::a_to_b) allowed = AllowedDirections::b_to_a;
        else if (allowed == AllowedDirections::b_to_a) allowed = AllowedDirections::a_to_b;
    }
    return {std::move(a), std::move(b), allowed};
}

Point to_global(const Placement& p, const Point& local)
{
    Point r;
    switch (p.rotation) {
    case 0: r = local; break;
    case 90: r = {-local.y, local.x}; break;
    case 180: r = {-local.x, -local.y}; break;
    case 270: r = {local.y, -local.x}; break;
    default: check_rotation(p);
    }
    return {p.global_position.x + r.x, p.global_position.y + r.y};
}

double to_global_heading(const Placement& p, double local_heading)
{
    return std::fmod(local_heading + p.rotation, 360.0);
}

Rect global_footprint(const Footprint& f, const Placement& p)
{
    Point a = to_global(p, {0.0, 0.0});
    Point b = to_global(p, {f.width, f.length});
    return {std::min(a.x, b.x), std::min(a.y, b.y), std::max(a.x, b.x), std::max(a.y, b.y)};
}

const ModuleEntry* Topology::find(std::string_view id) const
{
    auto it = modules.find(std::string(id));
    return it == modules.end() ? nullptr : &it->second;
}

std::vector<Connection> Topology::connections_of(std::string_view id) const
{
    std::vector<Connection> out;
    for (const auto& c : connections)
        if (c.involves(id)) out.push_back(c);
    return out;
}

bool Topology::same_structure(const Topology& other) const
{
    return modules == other.modules && connections == other.connections;
}

std::vector<PlacedModule> Topology::placed_modules() const
{
    std::vector<PlacedModule> out;
    for (const auto& [id, e] : modules) out.push_back({e.descriptor, e.placement});
    return out;
}

std::set<Connection> detect_neighbors(std::span<const PlacedModule> placements, GeometryTolerance tol)
{
    if (tol.position_mm < 0.0) throw Error("tolerance must be >= 0");
    std::vector<PlacedModule> mods;
    for (const auto& m : placements) {
        check_rotation(m.placement);
        mods.push_back(instance(m.descriptor, m.placement));
    }
    std::set<Connection> out;
    for (std::size_t i = 0; i < mods.size(); ++i) {
        for (std::size_t j = i + 1; j < mods.size(); ++j) {
            if (mods[i].placement.module_id == mods[j].placement.module_id)
                throw Error("duplicate module id '" + mods[i].placement.module_id + "'");
            check_overlap(mods[i], mods[j]);
            connect_pair(mods[i], mods[j], tol, out);
        }
    }
    return out;
}

Topology merge_local_views(std::span<const LocalView> views, const Topology& previous)
{
    Topology out;
    out.revision = previous.revision + 1;
    out.modules = previous.modules;

    std::set<ModuleId> reporting;
    for (const auto& v : views) {
        const auto& id = v.placement.module_id;
        if (!reporting.insert(id).second) throw InconsistencyError("module '" + id + "' reported twice");
        auto desc = v.descriptor;
        desc.module_id = id;
        out.modules[id] = ModuleEntry{desc, v.placement, desc.status};
    }

    // Keep previous connections that no reporting module can speak for.
    std::map<std::pair<Endpoint, Endpoint>, Connection> by_pair;
    std::map<Endpoint, Endpoint> partner;
    auto add = [&](const Connection& c) {
        auto key = std::make_pair(c.a, c.b);
        if (auto it = by_pair.find(key); it != by_pair.end()) {
            if (it->second != c)
                throw InconsistencyError("contradictory connection between " + c.a.module_id + "." +
                                         c.a.interface_id + " and " + c.b.module_id + "." + c.b.interface_id);
            return;
        }
        for (const auto& [x, y] : {std::pair{c.a, c.b}, std::pair{c.b, c.a}}) {
            auto [it, inserted] = partner.emplace(x, y);
            if (!inserted && it->second != y)
                throw InconsistencyError("interface " + x.module_id + "." + x.interface_id +
                                         " reported connected to two different interfaces");
        }
        by_pair.emplace(key, c);
    };

    for (const auto& c : previous.connections)
        if (!reporting.count(c.a.module_id) && !reporting.count(c.b.module_id)) add(c);
    for (const auto& v : views) {
        for (const auto& c : v.detected_neighbors) {
            if (!c.involves(v.placement.module_id))
                throw InconsistencyError("view of '" + v.placement.module_id +
                                         "' reports a connection not involving itself");
            add(c);
        }
    }
    for (auto& [key, c] : by_pair) {
        if (!out.modules.count(c.a.module_id) || !out.modules.count(c.b.module_id))
            throw InconsistencyError("connection references unknown module");
        out.connections.insert(c);
    }
    return out;
}

LocalView local_view(const Topology& topology, std::string_view module_id)
{
    const auto* e = topology.find(module_id);
    if (!e) throw UnknownModuleError("unknown module '" + std::string(module_id) + "'");
    return {e->descriptor, e->placement, topology.connections_of(module_id)};
}

LayoutChangeResult apply_layout_change(const Topology& topology, const LayoutChange& change, GeometryTolerance tol)
{
    LayoutChangeResult out{topology, {}};
    out.topology.revision = topology.revision + 1;

    if (const auto* add = std::get_if<AddModule>(&change)) {
        check_rotation(add->placement);
        const auto& id = add->placement.module_id;
        if (id.empty()) throw Error("module id must be nonempty");
        if (topology.modules.count(id)) throw Error("module '" + id + "' already present");
        auto fresh = instance(add->descriptor, add->placement);
        Rect fr = global_footprint(fresh.descriptor.footprint, fresh.placement);
        // Only modules whose footprint lies within tolerance of the new one can connect.
        Rect grown{fr.x0 - tol.position_mm, fr.y0 - tol.position_mm, fr.x1 + tol.position_mm,
                   fr.y1 + tol.position_mm};
        std::set<Connection> fresh_conns;
        for (const auto& [oid, e] : topology.modules) {
            PlacedModule other{e.descriptor, e.placement};
            check_overlap(fresh, other);
            Rect orr = global_footprint(e.descriptor.footprint, e.placement);
            bool near = std::min(grown.x1, orr.x1) >= std::max(grown.x0, orr.x0) &&
                        std::min(grown.y1, orr.y1) >= std::max(grown.y0, orr.y0);
            if (near) connect_pair(fresh, other, tol, fresh_conns);
        }
        out.topology.modules[id] = ModuleEntry{fresh.descriptor, fresh.placement, fresh.descriptor.status};
        out.affected_route_hint.insert(id);
        for (const auto& c : fresh_conns) {
            out.topology.connections.insert(c);
            out.affected_route_hint.insert(c.a.module_id);
            out.affected_route_hint.insert(c.b.module_id);
        }
    } else {
        const auto& id = std::get<RemoveModule>(change).module_id;
        if (!topology.modules.count(id)) throw UnknownModuleError("unknown module '" + id + "'");
        out.topology.modules.erase(id);
        out.affected_route_hint.insert(id);
        for (auto it = out.topology.connections.begin(); it != out.topology.connections.end();) {
            if (it->involves(id)) {
                out.affected_route_hint.insert(it->a.module_id);
                out.affected_route_hint.insert(it->b.module_id);
                it = out.topology.connections.erase(it);
            } else {
                ++it;
            }
        }
    }
    return out;
}

Topology with_status(const Topology& topology, std::string_view module_id, OperationalState state)
{
    auto it = topology.modules.find(std::string(module_id));
    if (it == topology.modules.end()) throw UnknownModuleError("unknown module '" + std::string(module_id) + "'");
    Topology out = topology;
    auto& e = out.modules.at(it->first);
    e.status.operational_state = state;
    if (state == OperationalState::removed) e.status.workload = 0.0;
    ++out.revision;
    return out;
}

}  // namespace amfs

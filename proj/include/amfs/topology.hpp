#pragma once

// Connection derivation from placements and the coordinator's global topology.

#include "amfs/model.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <variant>
#include <vector>

namespace amfs {

struct Endpoint {
    ModuleId module_id;
    InterfaceId interface_id;
    auto operator<=>(const Endpoint&) const = default;
};

enum class AllowedDirections { a_to_b, b_to_a, both };

std::string_view to_string(AllowedDirections d);

/// Inter-module connection. Stored normalized with a < b.
struct Connection {
    Endpoint a;
    Endpoint b;
    AllowedDirections allowed = AllowedDirections::both;

    auto operator<=>(const Connection&) const = default;

    bool involves(std::string_view module) const { return a.module_id == module || b.module_id == module; }
    /// True if a TU may leave through `from` and arrive at the other endpoint.
    bool permits_from(const Endpoint& from) const;
    const Endpoint& other(const Endpoint& e) const { return e == a ? b : a; }
};

/// Builds a normalized connection, flipping the direction when a and b swap.
Connection make_connection(Endpoint a, Endpoint b, AllowedDirections allowed);

struct GeometryTolerance {
    double position_mm = 25.0;
    double heading_deg = 5.0;
};

struct PlacedModule {
    ModuleDescriptor descriptor;
    Placement placement;
};

struct Rect {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

Rect global_footprint(const Footprint& f, const Placement& p);
Point to_global(const Placement& p, const Point& local);
double to_global_heading(const Placement& p, double local_heading);

struct ModuleEntry {
    ModuleDescriptor descriptor;
    Placement placement;
    ModuleStatus status;
    bool operator==(const ModuleEntry&) const = default;
};

struct Topology {
    std::map<ModuleId, ModuleEntry> modules;
    std::set<Connection> connections;
    std::uint64_t revision = 0;

    const ModuleEntry* find(std::string_view id) const;
    std::vector<Connection> connections_of(std::string_view id) const;
    /// Equality of modules and connections, ignoring the revision counter.
    bool same_structure(const Topology& other) const;
    std::vector<PlacedModule> placed_modules() const;
};

/// A module agent's local knowledge: itself plus the connections it detected.
struct LocalView {
    ModuleDescriptor descriptor;
    Placement placement;
    std::vector<Connection> detected_neighbors;
};

class OverlapError : public Error {
public:
    using Error::Error;
};
class InconsistencyError : public Error {
public:
    using Error::Error;
};
class UnknownModuleError : public Error {
public:
    using Error::Error;
};

/// Two interfaces connect iff their global positions coincide within
/// tolerance, their headings are opposite and their tu_class matches.
std::set<Connection> detect_neighbors(std::span<const PlacedModule> placements, GeometryTolerance tol = {});

Topology merge_local_views(std::span<const LocalView> views, const Topology& previous);

LocalView local_view(const Topology& topology, std::string_view module_id);

struct AddModule {
    ModuleDescriptor descriptor;
    Placement placement;
};
struct RemoveModule {
    ModuleId module_id;
};
using LayoutChange = std::variant<AddModule, RemoveModule>;

struct LayoutChangeResult {
    Topology topology;
    std::set<ModuleId> affected_route_hint;
};

LayoutChangeResult apply_layout_change(const Topology& topology, const LayoutChange& change,
                                       GeometryTolerance tol = {});

/// Returns a copy with one module's operational state replaced; bumps the revision.
Topology with_status(const Topology& topology, std::string_view module_id, OperationalState state);

}  // namespace amfs

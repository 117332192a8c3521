#pragma once

// Semi-static routes: capacity-filtered shortest process-time paths that are
// negotiated once per material flow relation and reused by all of its TUs.

#include "amfs/topology.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

namespace amfs {

using RelationId = std::string;
using RouteId = std::string;

struct MaterialFlowRelation {
    RelationId relation_id;
    ModuleId source;
    ModuleId sink;
    double required_throughput = 0.0;  // TUs per minute
    double variability = 0.0;          // coefficient of variation of inter-arrival times
    int priority = 0;                  // higher is served first
    bool operator==(const MaterialFlowRelation&) const = default;
};

/// One module traversal of a path. `entry` is empty at the source and `exit`
/// is empty at the sink; the traversed internal link is always named.
struct RouteHop {
    ModuleId module_id;
    std::optional<InterfaceId> entry;
    std::optional<InterfaceId> exit;
    InterfaceId link_from;
    InterfaceId link_to;
    SimTime process_time = 0;
    bool reversible = false;
    int concurrency = 1;
    bool buffer = false;

    bool operator==(const RouteHop&) const = default;
};

/// Ordering used for tie-breaking between equally long realizations.
bool hop_key_less(const RouteHop& a, const RouteHop& b);
bool hops_key_less(const std::vector<RouteHop>& a, const std::vector<RouteHop>& b);

enum class RouteStatus { active, revoked };

struct SemiStaticRoute {
    RouteId route_id;
    RelationId relation_id;
    std::vector<ModuleId> path;
    std::vector<RouteHop> hops;
    double reserved_capacity = 0.0;
    double expected_process_time = 0.0;  // seconds
    RouteStatus status = RouteStatus::active;

    bool traverses(std::string_view module) const;
    std::optional<ModuleId> predecessor(std::string_view module) const;
    std::optional<ModuleId> successor(std::string_view module) const;
};

/// Identifies one orientation of one internal link.
struct LinkKey {
    ModuleId module_id;
    InterfaceId from;
    InterfaceId to;
    auto operator<=>(const LinkKey&) const = default;
};

/// The coordinator's set of negotiated routes and the relations they serve.
/// Residual capacities are derived from the active routes on demand, so
/// revoking a route restores them exactly.
struct RouteSet {
    std::map<RouteId, SemiStaticRoute> routes;
    std::map<RelationId, MaterialFlowRelation> relations;
    std::uint64_t next_route_number = 1;
    std::uint64_t revision = 0;

    const SemiStaticRoute* active_route(std::string_view relation_id) const;
    std::vector<RouteId> active_routes_through(std::string_view module) const;
    /// Sum of reserved capacity of active routes on a link. For a reversible
    /// link both orientations draw from the same pool.
    double reserved(const LinkKey& link, bool reversible) const;
};

/// Locates the internal link for an orientation; reversible links match both ways.
const InternalLink* find_link(const ModuleDescriptor& d, std::string_view from, std::string_view to);

double residual(const RouteSet& routes, const Topology& topology, const LinkKey& link);
/// Residual capacity for every orientation of every link of every module.
std::map<LinkKey, double> residual_capacity(const RouteSet& routes, const Topology& topology);
/// Lists capacity invariant violations; empty when the route set is sound.
std::vector<std::string> check_capacity(const RouteSet& routes, const Topology& topology);

struct OrientedLink {
    InterfaceId from;
    InterfaceId to;
    SimTime process_time = 0;
    bool reversible = false;
    int concurrency = 1;
};

struct Arc {
    Endpoint from;
    Endpoint to;
};

struct FeasibleSubgraph {
    std::set<ModuleId> modules;
    std::map<ModuleId, std::vector<OrientedLink>> links;  // orientations with enough residual
    std::vector<Arc> arcs;                               // inter-module, direction permitted
    std::set<ModuleId> buffers;

    /// Module-level directed edges usable by some feasible traversal.
    std::set<std::pair<ModuleId, ModuleId>> edges() const;
};

FeasibleSubgraph feasible_subgraph(const Topology& topology, const RouteSet& routes,
                                   const MaterialFlowRelation& relation);
/// The subgraph of all operational modules with capacity ignored.
FeasibleSubgraph full_subgraph(const Topology& topology);

struct PathResult {
    std::vector<ModuleId> path;
    std::vector<RouteHop> hops;
    SimTime cost = 0;
};

/// Minimizes summed link process times over module-simple paths. Ties go to
/// the lexicographically smallest module sequence, then to the smallest hop
/// realization. Throws UnknownModuleError when source or sink are absent.
std::optional<PathResult> shortest_process_time_path(const FeasibleSubgraph& subgraph, std::string_view source,
                                                     std::string_view sink);

/// Cheapest realization of a fixed module sequence, if any.
std::optional<PathResult> realize_path(const FeasibleSubgraph& subgraph, const std::vector<ModuleId>& modules);

inline constexpr std::string_view kNoCapacityPath = "no_capacity_path";

struct NegotiationResult {
    RouteSet route_set;
    std::optional<RouteId> route_id;
    std::optional<std::string> rejection;
};

NegotiationResult negotiate_route(const Topology& topology, const RouteSet& routes,
                                  const MaterialFlowRelation& relation);

/// Negotiates every relation without an active route, by descending priority
/// then relation id.
struct BatchOutcome {
    RouteSet route_set;
    std::vector<RouteId> installed;
    std::vector<std::pair<RelationId, std::string>> rejected;
};
BatchOutcome negotiate_pending(const Topology& topology, const RouteSet& routes);

struct LayoutChanged {
    std::set<ModuleId> hint;
};
struct DemandChanged {
    RelationId relation_id;
    double new_throughput = 0.0;
};
struct OperatorOverride {
    RouteId route_id;
    std::vector<ModuleId> forced_path;
};
using RenegotiationTrigger = std::variant<LayoutChanged, DemandChanged, OperatorOverride>;

struct RenegotiationPolicy {
    /// Demand below this fraction of the reserved capacity releases the route.
    double reclaim_fraction = 0.5;
};

struct RenegotiationOutcome {
    RouteSet route_set;
    std::vector<RouteId> revoked;
    std::vector<RouteId> installed;
    std::vector<std::pair<RelationId, std::string>> rejected;
};

class OverrideRejected : public Error {
public:
    OverrideRejected(std::string constraint, std::string detail);
    const std::string& constraint() const { return constraint_; }
    const std::string& detail() const { return detail_; }

private:
    std::string constraint_;
    std::string detail_;
};

RenegotiationOutcome renegotiate(const RouteSet& routes, const Topology& topology,
                                 const RenegotiationTrigger& trigger, RenegotiationPolicy policy = {});

/// Revokes a route in place; returns false if it was not active.
bool revoke_route(RouteSet& routes, std::string_view route_id);

/// True if every hop of the route is still present, operational and connected.
bool route_valid(const SemiStaticRoute& route, const Topology& topology);

std::string_view to_string(RouteStatus s);

}  // namespace amfs

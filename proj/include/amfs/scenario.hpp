#pragma once

// Scenario and layout files. Paths inside a file resolve relative to that file.

#include "amfs/routing.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace amfs {

enum class RoutingStrategy { ssr, baseline_occupancy, static_fixed };
std::string_view to_string(RoutingStrategy s);
std::optional<RoutingStrategy> parse_strategy(std::string_view s);

enum class ReconfigurationKind { add_module, remove_module, kill_coordinator, demand_change, fault, repair };
std::string_view to_string(ReconfigurationKind k);

struct ReconfigurationEvent {
    SimTime at = 0;
    ReconfigurationKind kind = ReconfigurationKind::add_module;
    ModuleId module_id;            // add, remove, fault, repair
    std::string descriptor_ref;    // add
    ModuleDescriptor descriptor;   // add, resolved and renamed to module_id
    Placement placement;           // add
    RelationId relation_id;        // demand_change
    double required_throughput = 0.0;
};

struct ScenarioParameters {
    SimTime planning_latency = 50;
    SimTime heartbeat_period = 1000;
    int missed_heartbeats = 3;
    GeometryTolerance tolerance;
    SimTime scheduling_horizon = 3'600'000;
    double reclaim_fraction = 0.5;
    SimTime retry_interval = 1000;
};

struct LayoutEntry {
    std::string descriptor_ref;
    ModuleDescriptor descriptor;  // module_id set to the placement's id
    Placement placement;
};

struct ScenarioConfig {
    std::string name;
    std::string layout_ref;
    std::vector<LayoutEntry> modules;
    std::vector<MaterialFlowRelation> relations;
    SimTime horizon = 0;
    std::uint64_t seed = 0;
    RoutingStrategy strategy = RoutingStrategy::ssr;
    std::vector<ReconfigurationEvent> script;  // sorted by time, stable
    ScenarioParameters parameters;
};

/// Raised for unreadable or inconsistent scenario input; the message names the
/// file and the field or line at fault.
class ScenarioError : public Error {
public:
    using Error::Error;
};
/// A referenced file could not be read at all.
class ScenarioFileError : public ScenarioError {
public:
    using ScenarioError::ScenarioError;
};

ScenarioConfig load_scenario(const std::filesystem::path& path);
std::vector<LayoutEntry> load_layout(const std::filesystem::path& path);
ModuleDescriptor load_descriptor_file(const std::filesystem::path& path);

/// Checks horizon, relation endpoints, event targets and event times.
void validate_scenario(const ScenarioConfig& config);

}  // namespace amfs

#pragma once

// Coordinator: module directory, topology owner and route table holder. The
// framework is present on every module but only one instance is active.

#include "amfs/messages.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace amfs {

struct RegistryEntry {
    std::string descriptor_ref;
    Placement placement;
    SimTime registered_at = 0;
    bool alive = true;
    bool operator==(const RegistryEntry&) const = default;
};

struct Registry {
    std::map<ModuleId, RegistryEntry> entries;
    bool operator==(const Registry&) const = default;
};

struct CoordinatorState {
    bool active = false;
    ModuleId host;
    Registry registry;
    Topology topology;
    RouteSet routes;
    GeometryTolerance tolerance;
};

class DuplicateRegistration : public Error {
public:
    using Error::Error;
};
class InactiveCoordinator : public Error {
public:
    using Error::Error;
};
class ModuleOccupied : public Error {
public:
    using Error::Error;
};
class EmptySystem : public Error {
public:
    using Error::Error;
};

struct RegistrationResult {
    CoordinatorState state;
    std::set<ModuleId> affected;
    std::vector<AgentMessage> outgoing;  // agree to the module, then a topology_update broadcast
};

/// Adds a module to registry and topology. Throws InactiveCoordinator,
/// DuplicateRegistration, OverlapError or ValidationError.
RegistrationResult register_module(const CoordinatorState& coordinator, const ModuleDescriptor& descriptor,
                                   const Placement& placement, SimTime now, const std::string& descriptor_ref = {});

struct DeregistrationResult {
    CoordinatorState state;
    std::set<RouteId> orphaned_routes;
    std::set<ModuleId> affected;
    std::vector<AgentMessage> outgoing;  // topology_update broadcast
};

/// Removes a module. `occupied` lists modules that currently hold a TU.
/// Throws InactiveCoordinator, UnknownModuleError or ModuleOccupied.
DeregistrationResult deregister_module(const CoordinatorState& coordinator, const ModuleId& module_id, SimTime now,
                                       const std::set<ModuleId>& occupied = {});

/// Smallest alive module id other than `failed`. Throws EmptySystem.
ModuleId elect_coordinator(const std::set<ModuleId>& alive_modules, const std::optional<ModuleId>& failed = std::nullopt);

/// Registry entries with alive == true.
std::set<ModuleId> alive_modules(const Registry& registry);

}  // namespace amfs

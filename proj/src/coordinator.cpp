#include "amfs/coordinator.hpp"

namespace amfs {

namespace {

AgentMessage topology_broadcast(const Topology& t, const std::set<ModuleId>& affected, const std::string& conversation)
{
    return make_message(std::string(kCoordinatorAddress), std::string(kBroadcastAddress), Performative::inform,
                        conversation, TopologyUpdatePayload{t.revision, {affected.begin(), affected.end()}});
}

}  // namespace

RegistrationResult register_module(const CoordinatorState& coordinator, const ModuleDescriptor& descriptor,
                                   const Placement& placement, SimTime now, const std::string& descriptor_ref)
{
    if (!coordinator.active) throw InactiveCoordinator("coordinator is not active");
    if (auto report = validate_descriptor(descriptor); !report.empty()) throw ValidationError(std::move(report));
    const ModuleId& id = placement.module_id;

    RegistrationResult out{coordinator, {}, {}};
    Topology base = coordinator.topology;
    if (auto it = coordinator.registry.entries.find(id); it != coordinator.registry.entries.end()) {
        if (it->second.alive) throw DuplicateRegistration("module '" + id + "' is already registered");
        // A dead entry awaiting deregistration is replaced by the new instance.
        if (base.modules.count(id)) base = apply_layout_change(base, RemoveModule{id}, coordinator.tolerance).topology;
    }
    auto change = apply_layout_change(base, AddModule{descriptor, placement}, coordinator.tolerance);
    out.state.topology = std::move(change.topology);
    out.state.registry.entries[id] = {descriptor_ref, placement, now, true};
    out.affected = std::move(change.affected_route_hint);

    std::string conv = "register:" + id;
    out.outgoing.push_back(make_message(std::string(kCoordinatorAddress), id, Performative::agree, conv,
                                        RegistrationPayload{id, descriptor_ref, placement}));
    out.outgoing.push_back(topology_broadcast(out.state.topology, out.affected, conv));
    return out;
}

DeregistrationResult deregister_module(const CoordinatorState& coordinator, const ModuleId& module_id, SimTime,
                                       const std::set<ModuleId>& occupied)
{
    if (!coordinator.active) throw InactiveCoordinator("coordinator is not active");
    if (!coordinator.registry.entries.count(module_id))
        throw UnknownModuleError("module '" + module_id + "' is not registered");
    if (occupied.count(module_id)) throw ModuleOccupied("module occupied: '" + module_id + "' carries a TU");

    DeregistrationResult out{coordinator, {}, {}, {}};
    out.state.registry.entries.erase(module_id);
    if (coordinator.topology.modules.count(module_id)) {
        auto change = apply_layout_change(coordinator.topology, RemoveModule{module_id}, coordinator.tolerance);
        out.state.topology = std::move(change.topology);
        out.affected = std::move(change.affected_route_hint);
    }
    for (const auto& r : coordinator.routes.active_routes_through(module_id)) out.orphaned_routes.insert(r);
    out.outgoing.push_back(topology_broadcast(out.state.topology, out.affected, "deregister:" + module_id));
    return out;
}

ModuleId elect_coordinator(const std::set<ModuleId>& alive, const std::optional<ModuleId>& failed)
{
    for (const auto& m : alive)
        if (!failed || m != *failed) return m;
    throw EmptySystem("no alive module left to host the coordinator");
}

std::set<ModuleId> alive_modules(const Registry& registry)
{
    std::set<ModuleId> out;
    for (const auto& [id, e] : registry.entries)
        if (e.alive) out.insert(id);
    return out;
}

}  // namespace amfs

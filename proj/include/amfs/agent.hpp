#pragma once

// Module agent with four logic levels. Material flow holds route segments and
// granted reservations, functional holds the operation sequences derived from
// them, system holds actuators and the TUs physically present, configuration
// holds the registration phase and neighbor liveness.

#include "amfs/messages.hpp"

#include <deque>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace amfs {

enum class RegistrationPhase { unregistered, registering, registered, deregistering };
std::string_view to_string(RegistrationPhase p);

struct OperationStep {
    std::string actuator_id;
    std::string action;
    std::map<std::string, std::string> parameters;
    SimTime expected_duration = 0;
    bool operator==(const OperationStep&) const = default;
};

struct OperationSequence {
    TuId tu_id = 0;
    std::vector<OperationStep> steps;
    bool operator==(const OperationSequence&) const = default;
};

struct RouteSegment {
    RouteId route_id;
    RelationId relation_id;
    std::optional<ModuleId> predecessor;
    std::optional<ModuleId> successor;
    double reserved_capacity = 0.0;
    bool operator==(const RouteSegment&) const = default;
};

struct MaterialFlowLevel {
    std::map<RouteId, RouteSegment> routes;
    ReservationTable reservations;
};

struct FunctionalLevel {
    std::vector<OperationSequence> queue;  // ordered by reservation start
    const OperationSequence* find(TuId tu) const;
};

struct ActuatorState {
    bool running = false;
    std::string direction;  // "from->to" of the link being driven
    bool operator==(const ActuatorState&) const = default;
};

struct Occupant {
    TuId tu_id = 0;
    InterfaceId from;
    InterfaceId to;
    SimTime entered = 0;
    bool operator==(const Occupant&) const = default;
};

struct SystemLevel {
    std::map<std::string, ActuatorState> actuators;
    std::map<TuId, Occupant> occupants;
};

struct ConfigurationLevel {
    RegistrationPhase phase = RegistrationPhase::unregistered;
    std::uint64_t topology_revision = 0;
    std::map<std::string, SimTime> last_heard;  // sender -> last status_report
};

struct AgentState {
    ModuleId module_id;
    ModuleDescriptor descriptor;
    MaterialFlowLevel material_flow;
    FunctionalLevel functional;
    SystemLevel system;
    ConfigurationLevel configuration;
    std::deque<AgentMessage> inbox;
};

AgentState make_agent(const ModuleDescriptor& descriptor);

/// Actuator that drives a link; one per internal link (orientation-free).
std::string actuator_for(const ModuleDescriptor& d, const InterfaceId& from, const InterfaceId& to);
/// Operation steps for one traversal of a link, durations summing to its process time.
OperationSequence build_sequence(const ModuleDescriptor& d, TuId tu, const InterfaceId& from, const InterfaceId& to);

/// Handles one message; returns the replies. Throws ProtocolViolation when the
/// message is not addressed to the agent or its payload has no owning level.
std::vector<AgentMessage> dispatch_in_place(AgentState& agent, const AgentMessage& message, SimTime now);

struct DispatchResult {
    AgentState state;
    std::vector<AgentMessage> outgoing;
};
DispatchResult dispatch(const AgentState& agent, const AgentMessage& message, SimTime now);

/// Queues a message for the next step of the agent.
void deliver(AgentState& agent, AgentMessage message);
/// Drains the inbox, time-critical messages before planning, FIFO within each.
std::vector<AgentMessage> step_agent(AgentState& agent, SimTime now);

/// Raised when the receiver cannot accept a TU right now; the TU waits.
class HandoverRefused : public Error {
public:
    HandoverRefused(std::string reason, const std::string& detail) : Error(detail), reason_(std::move(reason)) {}
    const std::string& reason() const { return reason_; }

private:
    std::string reason_;
};

/// Moves a TU from the sender's exit to the receiver's entry. Returns the
/// transfer duration (the receiver's link process time). Throws
/// HandoverRefused (missing_reservation, opposing_transfer, capacity) or
/// ProtocolViolation (no physical connection, sender does not hold the TU).
SimTime handover_in_place(AgentState& sender, AgentState& receiver, TuId tu, SimTime now, const Topology& topology);

struct HandoverResult {
    AgentState sender;
    AgentState receiver;
    SimTime transfer_duration = 0;
};
HandoverResult handover(const AgentState& sender, const AgentState& receiver, TuId tu, SimTime now,
                        const Topology& topology);

/// TU enters its source module from outside the system.
SimTime accept_entry(AgentState& receiver, TuId tu, SimTime now);
/// TU leaves its sink module; the module's reservation and sequence are dropped.
void release_exit(AgentState& sender, TuId tu, SimTime now);

/// Occupied share of the module's concurrent TU capacity, in [0, 1].
double workload(const AgentState& agent);

/// TUs physically present on one orientation of a link.
int occupants_on(const AgentState& agent, const InterfaceId& from, const InterfaceId& to);

}  // namespace amfs

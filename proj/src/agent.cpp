#include "amfs/agent.hpp"

#include <algorithm>

namespace amfs {

std::string_view to_string(RegistrationPhase p)
{
    switch (p) {
    case RegistrationPhase::unregistered: return "unregistered";
    case RegistrationPhase::registering: return "registering";
    case RegistrationPhase::registered: return "registered";
    case RegistrationPhase::deregistering: return "deregistering";
    }
    return "?";
}

const OperationSequence* FunctionalLevel::find(TuId tu) const
{
    for (const auto& s : queue)
        if (s.tu_id == tu) return &s;
    return nullptr;
}

std::string actuator_for(const ModuleDescriptor& d, const InterfaceId& from, const InterfaceId& to)
{
    if (d.module_kind == ModuleKind::manipulation) return "gantry";
    return "drive:" + std::min(from, to) + "-" + std::max(from, to);
}

AgentState make_agent(const ModuleDescriptor& descriptor)
{
    AgentState a;
    a.module_id = descriptor.module_id;
    a.descriptor = descriptor;
    a.material_flow.reservations = ReservationTable(descriptor.module_id);
    for (const auto& l : descriptor.internal_links)
        a.system.actuators.try_emplace(actuator_for(descriptor, l.from_interface, l.to_interface));
    return a;
}

OperationSequence build_sequence(const ModuleDescriptor& d, TuId tu, const InterfaceId& from, const InterfaceId& to)
{
    const auto* link = find_link(d, from, to);
    if (!link) throw ProtocolViolation("module '" + d.module_id + "' has no link " + from + "->" + to);
    SimTime pt = std::max<SimTime>(1, seconds_to_ms(link->process_time));
    std::string actuator = actuator_for(d, from, to);
    OperationSequence seq{tu, {}};
    if (d.module_kind == ModuleKind::manipulation && pt >= 3) {
        SimTime pick = pt / 4, move = pt / 2;
        seq.steps.push_back({actuator, "pick", {{"at", from}}, pick});
        seq.steps.push_back({actuator, "move", {{"from", from}, {"to", to}}, move});
        seq.steps.push_back({actuator, "place", {{"at", to}}, pt - pick - move});
    } else {
        seq.steps.push_back({actuator, "convey", {{"from", from}, {"to", to}}, pt});
    }
    return seq;
}

namespace {

bool covers(const Reservation& r, SimTime now) { return r.start <= now && now < r.end; }

void drop_tu(AgentState& a, TuId tu)
{
    a.material_flow.reservations.erase_tu(tu);
    std::erase_if(a.functional.queue, [&](const OperationSequence& s) { return s.tu_id == tu; });
}

void update_actuators(AgentState& a)
{
    for (auto& [id, act] : a.system.actuators) act = {};
    for (const auto& [tu, occ] : a.system.occupants) {
        auto& act = a.system.actuators[actuator_for(a.descriptor, occ.from, occ.to)];
        act.running = true;
        act.direction = occ.from + "->" + occ.to;
    }
}

/// Checks the receiver-side preconditions shared by entry and handover.
const Reservation& admissible(const AgentState& receiver, TuId tu, SimTime now)
{
    const auto* r = receiver.material_flow.reservations.find(tu);
    if (!r || !covers(*r, now) || !receiver.functional.find(tu))
        throw HandoverRefused("missing_reservation", "module '" + receiver.module_id + "' holds no reservation for TU " +
                                                         std::to_string(tu) + " at " + std::to_string(now));
    const auto* link = find_link(receiver.descriptor, r->from, r->to);
    if (!link) throw ProtocolViolation("module '" + receiver.module_id + "' has no link " + r->from + "->" + r->to);
    if (link->reversible && occupants_on(receiver, r->to, r->from) > 0)
        throw HandoverRefused("opposing_transfer", "opposing TU on module '" + receiver.module_id + "'");
    if (occupants_on(receiver, r->from, r->to) >= concurrent_capacity(*link))
        throw HandoverRefused("capacity", "module '" + receiver.module_id + "' is full");
    return *r;
}

SimTime occupy(AgentState& receiver, const Reservation& r, TuId tu, SimTime now)
{
    receiver.system.occupants[tu] = {tu, r.from, r.to, now};
    update_actuators(receiver);
    return std::max<SimTime>(1, seconds_to_ms(find_link(receiver.descriptor, r.from, r.to)->process_time));
}

}  // namespace

int occupants_on(const AgentState& agent, const InterfaceId& from, const InterfaceId& to)
{
    int n = 0;
    for (const auto& [tu, o] : agent.system.occupants)
        if (o.from == from && o.to == to) ++n;
    return n;
}

double workload(const AgentState& agent)
{
    int cap = std::max(1, concurrent_capacity(agent.descriptor));
    return std::min(1.0, static_cast<double>(agent.system.occupants.size()) / cap);
}

std::vector<AgentMessage> dispatch_in_place(AgentState& agent, const AgentMessage& m, SimTime now)
{
    if (m.receiver != agent.module_id && m.receiver != kBroadcastAddress)
        throw ProtocolViolation("message for '" + m.receiver + "' delivered to '" + agent.module_id + "'");
    if ((m.category == MessageCategory::time_critical) != std::holds_alternative<HandoverSyncPayload>(m.payload))
        throw ProtocolViolation("category does not match payload kind " + std::string(payload_kind(m.payload)));

    std::vector<AgentMessage> out;
    const auto& self = agent.module_id;

    if (const auto* p = std::get_if<RegistrationPayload>(&m.payload)) {
        if (m.performative == Performative::agree && p->module_id == self)
            agent.configuration.phase = RegistrationPhase::registered;
        else if (m.performative == Performative::refuse && p->module_id == self)
            agent.configuration.phase = RegistrationPhase::unregistered;
        else
            throw ProtocolViolation("module agent cannot handle a registration " + std::string(to_string(m.performative)));
    } else if (const auto* p = std::get_if<TopologyUpdatePayload>(&m.payload)) {
        agent.configuration.topology_revision = std::max(agent.configuration.topology_revision, p->revision);
    } else if (std::holds_alternative<StatusReportPayload>(m.payload)) {
        agent.configuration.last_heard[m.sender] = now;
    } else if (const auto* p = std::get_if<RouteProposalPayload>(&m.payload)) {
        if (p->status == RouteStatus::revoked) {
            agent.material_flow.routes.erase(p->route_id);
        } else {
            agent.material_flow.routes[p->route_id] = {p->route_id, p->relation_id, p->predecessor, p->successor,
                                                       p->reserved_capacity};
            if (m.performative == Performative::request) out.push_back(make_reply(m, self, Performative::agree, *p));
        }
    } else if (const auto* p = std::get_if<ReservationRequestPayload>(&m.payload)) {
        if (m.performative == Performative::inform) {  // cancellation
            drop_tu(agent, p->tu_id);
            return out;
        }
        if (m.performative != Performative::request)
            throw ProtocolViolation("module agent cannot handle a reservation " + std::string(to_string(m.performative)));
        auto& table = agent.material_flow.reservations;
        const auto* link = find_link(agent.descriptor, p->from, p->to);
        if (!link || p->end <= p->start) {
            out.push_back(make_reply(m, self, Performative::refuse, *p, "unknown_link"));
        } else if (table.holds(p->tu_id)) {
            out.push_back(make_reply(m, self, Performative::refuse, *p, "duplicate"));
        } else if (LinkSlot slot{p->from, p->to, link->reversible, concurrent_capacity(*link)};
                   !table.fits(slot, p->start, p->end)) {
            bool opposing = false;
            for (const auto& r : table.entries())
                if (link->reversible && r.from == p->to && r.to == p->from && r.start < p->end && p->start < r.end)
                    opposing = true;
            out.push_back(make_reply(m, self, Performative::refuse, *p, opposing ? "opposing_hold" : "capacity"));
        } else {
            table.insert({p->start, p->end, p->tu_id, p->from, p->to});
            auto seq = build_sequence(agent.descriptor, p->tu_id, p->from, p->to);
            auto& q = agent.functional.queue;
            auto start_of = [&](const OperationSequence& s) { return table.find(s.tu_id)->start; };
            auto pos = std::find_if(q.begin(), q.end(), [&](const OperationSequence& s) {
                return std::pair(start_of(s), s.tu_id) > std::pair(p->start, p->tu_id);
            });
            q.insert(pos, std::move(seq));
            out.push_back(make_reply(m, self, Performative::agree, *p));
        }
    } else if (const auto* p = std::get_if<HandoverSyncPayload>(&m.payload)) {
        if (m.performative == Performative::request) {
            const auto* r = agent.material_flow.reservations.find(p->tu_id);
            bool expected = r && covers(*r, now) && r->from == p->entry && agent.functional.find(p->tu_id);
            out.push_back(make_reply(m, self, expected ? Performative::confirm : Performative::refuse, *p,
                                     expected ? "" : "missing_reservation"));
        }
    } else {
        throw ProtocolViolation("unroutable payload kind " + std::string(payload_kind(m.payload)) + " at module '" +
                                self + "'");
    }
    return out;
}

DispatchResult dispatch(const AgentState& agent, const AgentMessage& message, SimTime now)
{
    DispatchResult r{agent, {}};
    r.outgoing = dispatch_in_place(r.state, message, now);
    return r;
}

void deliver(AgentState& agent, AgentMessage message) { agent.inbox.push_back(std::move(message)); }

std::vector<AgentMessage> step_agent(AgentState& agent, SimTime now)
{
    std::deque<AgentMessage> batch;
    batch.swap(agent.inbox);
    std::stable_partition(batch.begin(), batch.end(),
                          [](const AgentMessage& m) { return m.category == MessageCategory::time_critical; });
    std::vector<AgentMessage> out;
    for (const auto& m : batch) {
        auto replies = dispatch_in_place(agent, m, now);
        out.insert(out.end(), std::make_move_iterator(replies.begin()), std::make_move_iterator(replies.end()));
    }
    return out;
}

SimTime handover_in_place(AgentState& sender, AgentState& receiver, TuId tu, SimTime now, const Topology& topology)
{
    auto it = sender.system.occupants.find(tu);
    if (it == sender.system.occupants.end())
        throw ProtocolViolation("module '" + sender.module_id + "' does not hold TU " + std::to_string(tu));
    const Reservation& r = admissible(receiver, tu, now);

    Endpoint exit{sender.module_id, it->second.to};
    Endpoint entry{receiver.module_id, r.from};
    bool connected = false;
    for (const auto& c : topology.connections_of(sender.module_id))
        if ((c.a == exit && c.b == entry) || (c.b == exit && c.a == entry)) connected = c.permits_from(exit);
    if (!connected)
        throw ProtocolViolation("no physical connection " + exit.module_id + "." + exit.interface_id + " -> " +
                                entry.module_id + "." + entry.interface_id);

    SimTime duration = occupy(receiver, r, tu, now);
    sender.system.occupants.erase(it);
    drop_tu(sender, tu);
    update_actuators(sender);
    return duration;
}

HandoverResult handover(const AgentState& sender, const AgentState& receiver, TuId tu, SimTime now,
                        const Topology& topology)
{
    HandoverResult r{sender, receiver, 0};
    r.transfer_duration = handover_in_place(r.sender, r.receiver, tu, now, topology);
    return r;
}

SimTime accept_entry(AgentState& receiver, TuId tu, SimTime now)
{
    if (receiver.system.occupants.count(tu))
        throw ProtocolViolation("TU " + std::to_string(tu) + " already on module '" + receiver.module_id + "'");
    const Reservation& r = admissible(receiver, tu, now);
    return occupy(receiver, r, tu, now);
}

void release_exit(AgentState& sender, TuId tu, SimTime)
{
    if (!sender.system.occupants.erase(tu))
        throw ProtocolViolation("module '" + sender.module_id + "' does not hold TU " + std::to_string(tu));
    drop_tu(sender, tu);
    update_actuators(sender);
}

}  // namespace amfs

#include "amfs/messages.hpp"

#include <cstdio>

namespace amfs {

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed)
{
    std::uint64_t h = seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string_view to_string(MessageCategory c) { return c == MessageCategory::planning ? "planning" : "time_critical"; }

std::string_view to_string(Performative p)
{
    switch (p) {
    case Performative::request: return "request";
    case Performative::inform: return "inform";
    case Performative::agree: return "agree";
    case Performative::refuse: return "refuse";
    case Performative::confirm: return "confirm";
    case Performative::failure: return "failure";
    }
    return "?";
}

std::string_view payload_kind(const MessagePayload& p)
{
    static constexpr std::string_view names[] = {"registration",   "topology_update", "route_proposal",
                                                 "reservation_request", "handover_sync", "status_report",
                                                 "operator_command"};
    return names[p.index()];
}

namespace {

struct Canonical {
    std::string out;
    void field(std::string_view v)
    {
        out += v;
        out += '|';
    }
    void field(std::int64_t v) { field(std::to_string(v)); }
    void field(std::uint64_t v) { field(std::to_string(v)); }
    void field(double v)
    {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.9g", v);
        field(std::string_view(buf));
    }
    void opt(const std::optional<std::string>& v) { field(v ? std::string_view(*v) : std::string_view("-")); }

    void operator()(const RegistrationPayload& p)
    {
        field(p.module_id);
        field(p.descriptor_ref);
        field(p.placement.global_position.x);
        field(p.placement.global_position.y);
        field(static_cast<std::int64_t>(p.placement.rotation));
    }
    void operator()(const TopologyUpdatePayload& p)
    {
        field(p.revision);
        for (const auto& m : p.affected) field(m);
    }
    void operator()(const RouteProposalPayload& p)
    {
        field(p.route_id);
        field(p.relation_id);
        opt(p.predecessor);
        opt(p.successor);
        field(p.reserved_capacity);
        field(to_string(p.status));
    }
    void operator()(const ReservationRequestPayload& p)
    {
        field(p.tu_id);
        field(p.relation_id);
        field(p.from);
        field(p.to);
        field(p.start);
        field(p.end);
    }
    void operator()(const HandoverSyncPayload& p)
    {
        field(p.tu_id);
        field(p.from_module);
        field(p.entry);
    }
    void operator()(const StatusReportPayload& p)
    {
        field(p.module_id);
        field(to_string(p.state));
        field(p.workload);
    }
    void operator()(const OperatorCommandPayload& p)
    {
        field(p.command_id);
        field(p.kind);
        field(p.argument);
    }
};

}  // namespace

std::string payload_digest(const MessagePayload& p)
{
    Canonical c;
    c.field(payload_kind(p));
    std::visit(c, p);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(c.out)));
    return buf;
}

std::optional<TuId> payload_tu(const MessagePayload& p)
{
    if (const auto* r = std::get_if<ReservationRequestPayload>(&p)) return r->tu_id;
    if (const auto* h = std::get_if<HandoverSyncPayload>(&p)) return h->tu_id;
    return std::nullopt;
}

AgentMessage make_message(std::string sender, std::string receiver, Performative performative,
                          std::string conversation_id, MessagePayload payload)
{
    AgentMessage m;
    m.sender = std::move(sender);
    m.receiver = std::move(receiver);
    m.category = std::holds_alternative<HandoverSyncPayload>(payload) ? MessageCategory::time_critical
                                                                      : MessageCategory::planning;
    m.performative = performative;
    m.conversation_id = std::move(conversation_id);
    m.payload = std::move(payload);
    return m;
}

AgentMessage make_reply(const AgentMessage& request, std::string sender, Performative performative,
                        MessagePayload payload, std::string reason)
{
    auto m = make_message(std::move(sender), request.sender, performative, request.conversation_id, std::move(payload));
    m.reason = std::move(reason);
    return m;
}

}  // namespace amfs

#pragma once

// Communication ontology between module agents and the coordinator. Handover
// synchronization is the only time-critical content; everything else is
// planning traffic.

#include "amfs/reservation.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace amfs {

inline constexpr std::string_view kCoordinatorAddress = "coordinator";
inline constexpr std::string_view kBroadcastAddress = "*";

enum class MessageCategory { planning, time_critical };
enum class Performative { request, inform, agree, refuse, confirm, failure };

struct RegistrationPayload {
    ModuleId module_id;
    std::string descriptor_ref;
    Placement placement;
};

struct TopologyUpdatePayload {
    std::uint64_t revision = 0;
    std::vector<ModuleId> affected;
};

struct RouteProposalPayload {
    RouteId route_id;
    RelationId relation_id;
    std::optional<ModuleId> predecessor;
    std::optional<ModuleId> successor;
    double reserved_capacity = 0.0;
    RouteStatus status = RouteStatus::active;
};

struct ReservationRequestPayload {
    TuId tu_id = 0;
    RelationId relation_id;
    InterfaceId from;
    InterfaceId to;
    SimTime start = 0;
    SimTime end = 0;
};

struct HandoverSyncPayload {
    TuId tu_id = 0;
    ModuleId from_module;
    InterfaceId entry;
};

struct StatusReportPayload {
    ModuleId module_id;
    OperationalState state = OperationalState::operational;
    double workload = 0.0;
};

struct OperatorCommandPayload {
    std::string command_id;
    std::string kind;
    std::string argument;
};

using MessagePayload = std::variant<RegistrationPayload, TopologyUpdatePayload, RouteProposalPayload,
                                    ReservationRequestPayload, HandoverSyncPayload, StatusReportPayload,
                                    OperatorCommandPayload>;

struct AgentMessage {
    std::uint64_t message_id = 0;
    std::string sender;
    std::string receiver;
    MessageCategory category = MessageCategory::planning;
    Performative performative = Performative::inform;
    std::string conversation_id;
    MessagePayload payload;
    std::string reason;  // set on refuse / failure
};

class ProtocolViolation : public Error {
public:
    using Error::Error;
};

/// Builds a message whose category follows from its payload kind.
AgentMessage make_message(std::string sender, std::string receiver, Performative performative,
                          std::string conversation_id, MessagePayload payload);
/// Reply to `request` carrying the same conversation id.
AgentMessage make_reply(const AgentMessage& request, std::string sender, Performative performative,
                        MessagePayload payload, std::string reason = {});

std::string_view payload_kind(const MessagePayload& p);
/// Stable 64-bit FNV-1a digest of the payload content, as 16 hex digits.
std::string payload_digest(const MessagePayload& p);
std::optional<TuId> payload_tu(const MessagePayload& p);

std::string_view to_string(MessageCategory c);
std::string_view to_string(Performative p);

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 14695981039346656037ull);

}  // namespace amfs

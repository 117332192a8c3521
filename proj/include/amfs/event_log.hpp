#pragma once

// Append-only simulation record stream, exported as one JSON object per line.

#include "amfs/messages.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace amfs {

struct LogRecord {
    SimTime t = 0;
    std::uint64_t seq = 0;
    std::string kind;
    // message records
    std::uint64_t message_id = 0;
    std::string sender;
    std::string receiver;
    std::string category;
    std::string performative;
    std::string payload;
    std::string digest;
    std::string conversation;
    // entity records
    std::optional<TuId> tu;
    std::string relation;
    std::string module;
    std::string from;
    std::string to;
    std::string route;
    std::string reason;
    std::string detail;
    std::optional<SimTime> value;

    bool operator==(const LogRecord&) const = default;
};

namespace record_kind {
inline constexpr std::string_view message = "message";
inline constexpr std::string_view relation_declared = "relation_declared";
inline constexpr std::string_view module_registered = "module_registered";
inline constexpr std::string_view module_removed = "module_removed";
inline constexpr std::string_view module_deregistered = "module_deregistered";
inline constexpr std::string_view module_status = "module_status";
inline constexpr std::string_view coordinator_elected = "coordinator_elected";
inline constexpr std::string_view coordinator_failed = "coordinator_failed";
inline constexpr std::string_view route_installed = "route_installed";
inline constexpr std::string_view route_revoked = "route_revoked";
inline constexpr std::string_view route_rejected = "route_rejected";
inline constexpr std::string_view reconfiguration = "reconfiguration";
inline constexpr std::string_view strategy = "strategy";
inline constexpr std::string_view tu_release = "tu_release";
inline constexpr std::string_view tu_blocked = "tu_blocked";
inline constexpr std::string_view tu_scheduled = "tu_scheduled";
inline constexpr std::string_view tu_enter = "tu_enter";
inline constexpr std::string_view tu_exit = "tu_exit";
inline constexpr std::string_view tu_delivered = "tu_delivered";
inline constexpr std::string_view diagnostic = "diagnostic";
}  // namespace record_kind

class MalformedLog : public Error {
public:
    using Error::Error;
};

class EventLog {
public:
    /// Appends a record, stamping its sequence number.
    const LogRecord& append(LogRecord r);
    const std::vector<LogRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    std::string to_jsonl() const;
    /// Parses a log produced by to_jsonl. Throws MalformedLog.
    static EventLog from_jsonl(std::string_view text);

    bool operator==(const EventLog&) const = default;

private:
    std::vector<LogRecord> records_;
};

std::string to_json_line(const LogRecord& r);

/// Record for a sent message.
LogRecord message_record(SimTime t, const AgentMessage& m);

}  // namespace amfs

#pragma once

// Gateway wire protocol, version 1. Each message is a 4-byte big-endian
// length followed by that many bytes of UTF-8 JSON. Every message object
// carries "type" and "protocol_version".

#include "amfs/gateway.hpp"
#include "amfs/json_io.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace amfs {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kMaxFrameBytes = 16u << 20;

class WireError : public Error {
public:
    using Error::Error;
};

namespace wire {

std::string encode_frame(const Json& message);

/// Reassembles frames from arbitrary byte chunks.
class FrameDecoder {
public:
    void feed(std::string_view bytes);
    /// Next complete message, if any. Throws WireError on an oversized frame
    /// or a body that is not a JSON object.
    std::optional<Json> next();
    std::size_t buffered() const { return buffer_.size(); }

private:
    std::string buffer_;
};

Json to_json(const LayoutSnapshot& s);
LayoutSnapshot snapshot_from_json(const Json& j);
Json to_json(const Delta& d);
Delta delta_from_json(const Json& j);
Json to_json(const OperatorCommand& c);
/// Throws WireError naming the offending field.
OperatorCommand command_from_json(const Json& j);
Json to_json(const Ack& a);
Ack ack_from_json(const Json& j);

Json hello(std::string_view role, std::string_view name);
Json snapshot_message(const LayoutSnapshot& s);
Json delta_message(const Delta& d);
Json ack_message(const Ack& a);
/// Client side: a command with its envelope, fields at top level.
Json command_message(const OperatorCommand& c);
Json error_message(std::string_view reason, std::string_view detail = {});

/// Type of an incoming message after checking the envelope. Throws WireError.
std::string check_envelope(const Json& j);

}  // namespace wire
}  // namespace amfs

#include "amfs/event_log.hpp"

#include "amfs/json_io.hpp"

namespace amfs {

const LogRecord& EventLog::append(LogRecord r)
{
    r.seq = records_.size();
    records_.push_back(std::move(r));
    return records_.back();
}

std::string to_json_line(const LogRecord& r)
{
    Json j = Json::object();
    j["t"] = r.t;
    j["seq"] = r.seq;
    j["kind"] = r.kind;
    auto put = [&](const char* key, const std::string& v) {
        if (!v.empty()) j[key] = v;
    };
    if (r.kind == record_kind::message) {
        j["message_id"] = r.message_id;
        j["sender"] = r.sender;
        j["receiver"] = r.receiver;
        j["category"] = r.category;
        j["performative"] = r.performative;
        j["payload"] = r.payload;
        j["digest"] = r.digest;
        j["conversation"] = r.conversation;
    }
    if (r.tu) j["tu"] = *r.tu;
    put("relation", r.relation);
    put("module", r.module);
    put("from", r.from);
    put("to", r.to);
    put("route", r.route);
    put("reason", r.reason);
    put("detail", r.detail);
    if (r.value) j["value"] = *r.value;
    return j.dump();
}

std::string EventLog::to_jsonl() const
{
    std::string out;
    for (const auto& r : records_) {
        out += to_json_line(r);
        out += '\n';
    }
    return out;
}

EventLog EventLog::from_jsonl(std::string_view text)
{
    EventLog log;
    std::size_t line_no = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty()) continue;
        try {
            Json j = Json::parse(line);
            LogRecord r;
            r.t = j.at("t").get<SimTime>();
            r.kind = j.at("kind").get<std::string>();
            auto get = [&](const char* key, std::string& dst) {
                if (auto it = j.find(key); it != j.end()) dst = it->get<std::string>();
            };
            if (auto it = j.find("message_id"); it != j.end()) r.message_id = it->get<std::uint64_t>();
            get("sender", r.sender);
            get("receiver", r.receiver);
            get("category", r.category);
            get("performative", r.performative);
            get("payload", r.payload);
            get("digest", r.digest);
            get("conversation", r.conversation);
            if (auto it = j.find("tu"); it != j.end()) r.tu = it->get<TuId>();
            get("relation", r.relation);
            get("module", r.module);
            get("from", r.from);
            get("to", r.to);
            get("route", r.route);
            get("reason", r.reason);
            get("detail", r.detail);
            if (auto it = j.find("value"); it != j.end()) r.value = it->get<SimTime>();
            auto seq = j.at("seq").get<std::uint64_t>();
            if (seq != log.records_.size())
                throw MalformedLog("line " + std::to_string(line_no) + ": sequence number " + std::to_string(seq) +
                                   " out of order");
            log.append(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw MalformedLog("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return log;
}

LogRecord message_record(SimTime t, const AgentMessage& m)
{
    LogRecord r;
    r.t = t;
    r.kind = std::string(record_kind::message);
    r.message_id = m.message_id;
    r.sender = m.sender;
    r.receiver = m.receiver;
    r.category = std::string(to_string(m.category));
    r.performative = std::string(to_string(m.performative));
    r.payload = std::string(payload_kind(m.payload));
    r.digest = payload_digest(m.payload);
    r.conversation = m.conversation_id;
    r.tu = payload_tu(m.payload);
    r.reason = m.reason;
    if (const auto* p = std::get_if<ReservationRequestPayload>(&m.payload)) {
        r.from = p->from;
        r.to = p->to;
        r.relation = p->relation_id;
        r.value = p->start;
    } else if (const auto* p = std::get_if<RouteProposalPayload>(&m.payload)) {
        r.route = p->route_id;
        r.relation = p->relation_id;
    }
    return r;
}

}  // namespace amfs

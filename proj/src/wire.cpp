#include "amfs/wire.hpp"

namespace amfs::wire {

namespace {

template <typename T>
T field(const Json& j, const char* key, std::string_view where)
{
    try {
        return required<T>(j, key, where);
    } catch (const ParseError& e) {
        throw WireError(e.what());
    }
}

template <typename E, typename Parse>
E enum_field(const Json& j, const char* key, std::string_view where, Parse parse)
{
    auto s = field<std::string>(j, key, where);
    auto v = parse(s);
    if (!v) throw WireError("field '" + std::string(where) + "." + key + "' has unknown value '" + s + "'");
    return *v;
}

std::optional<TuState> parse_tu_state(std::string_view s)
{
    for (auto v : {TuState::waiting, TuState::scheduled, TuState::in_transit, TuState::delivered, TuState::blocked})
        if (to_string(v) == s) return v;
    return std::nullopt;
}

std::optional<AllowedDirections> parse_allowed(std::string_view s)
{
    for (auto v : {AllowedDirections::a_to_b, AllowedDirections::b_to_a, AllowedDirections::both})
        if (to_string(v) == s) return v;
    return std::nullopt;
}

std::optional<RouteStatus> parse_route_status(std::string_view s)
{
    if (s == "active") return RouteStatus::active;
    if (s == "revoked") return RouteStatus::revoked;
    return std::nullopt;
}

Placement placement_from(const Json& j, std::string_view where)
{
    Placement p;
    p.module_id = field<std::string>(j, "module_id", where);
    p.global_position = {field<double>(j, "x", where), field<double>(j, "y", where)};
    p.rotation = field<int>(j, "rotation", where);
    return p;
}

Json to_json(const Endpoint& e) { return {{"module_id", e.module_id}, {"interface_id", e.interface_id}}; }

Endpoint endpoint_from(const Json& j, std::string_view where)
{
    return {field<std::string>(j, "module_id", where), field<std::string>(j, "interface_id", where)};
}

Json to_json(const Connection& c)
{
    return {{"a", to_json(c.a)}, {"b", to_json(c.b)}, {"allowed", to_string(c.allowed)}};
}

Connection connection_from(const Json& j)
{
    return {endpoint_from(j.at("a"), "connection.a"), endpoint_from(j.at("b"), "connection.b"),
            enum_field<AllowedDirections>(j, "allowed", "connection", parse_allowed)};
}

Json to_json(const ModuleView& m)
{
    Json acts = Json::array();
    for (const auto& a : m.running_actuators) acts.push_back({{"actuator_id", a.actuator_id}, {"direction", a.direction}});
    return {{"module_id", m.module_id},
            {"footprint", amfs::to_json(m.footprint)},
            {"placement", amfs::to_json(m.placement)},
            {"status", to_string(m.status)},
            {"workload", m.workload},
            {"is_active_coordinator", m.is_active_coordinator},
            {"running_actuators", acts}};
}

ModuleView module_from(const Json& j)
{
    ModuleView m;
    m.module_id = field<std::string>(j, "module_id", "module");
    const auto& fp = j.at("footprint");
    m.footprint = {field<double>(fp, "width", "module.footprint"), field<double>(fp, "length", "module.footprint")};
    m.placement = placement_from(j.at("placement"), "module.placement");
    m.status = enum_field<OperationalState>(j, "status", "module", parse_operational_state);
    m.workload = field<double>(j, "workload", "module");
    m.is_active_coordinator = field<bool>(j, "is_active_coordinator", "module");
    for (const auto& a : j.at("running_actuators"))
        m.running_actuators.push_back({field<std::string>(a, "actuator_id", "actuator"),
                                       field<std::string>(a, "direction", "actuator")});
    return m;
}

Json to_json(const RouteView& r)
{
    Json j = {{"route_id", r.route_id},
              {"relation_id", r.relation_id},
              {"path", r.path},
              {"reserved_capacity", r.reserved_capacity},
              {"used_capacity", r.used_capacity},
              {"status", to_string(r.status)}};
    j["average_duration"] = r.average_duration ? Json(*r.average_duration) : Json(nullptr);
    return j;
}

RouteView route_from(const Json& j)
{
    RouteView r;
    r.route_id = field<std::string>(j, "route_id", "route");
    r.relation_id = field<std::string>(j, "relation_id", "route");
    r.path = field<std::vector<std::string>>(j, "path", "route");
    r.reserved_capacity = field<double>(j, "reserved_capacity", "route");
    r.used_capacity = field<double>(j, "used_capacity", "route");
    if (auto it = j.find("average_duration"); it != j.end() && !it->is_null()) r.average_duration = it->get<double>();
    r.status = enum_field<RouteStatus>(j, "status", "route", parse_route_status);
    return r;
}

Json to_json(const OrderView& o)
{
    Json j = {{"tu_id", o.tu_id}, {"relation_id", o.relation_id}, {"state", to_string(o.state)}};
    j["route_id"] = o.route_id ? Json(*o.route_id) : Json(nullptr);
    j["scheduled_arrival"] = o.scheduled_arrival ? Json(ms_to_seconds(*o.scheduled_arrival)) : Json(nullptr);
    return j;
}

OrderView order_from(const Json& j)
{
    OrderView o;
    o.tu_id = field<TuId>(j, "tu_id", "order");
    o.relation_id = field<std::string>(j, "relation_id", "order");
    o.state = enum_field<TuState>(j, "state", "order", parse_tu_state);
    if (auto it = j.find("route_id"); it != j.end() && !it->is_null()) o.route_id = it->get<std::string>();
    if (auto it = j.find("scheduled_arrival"); it != j.end() && !it->is_null())
        o.scheduled_arrival = seconds_to_ms(it->get<double>());
    return o;
}

template <typename T, typename F>
Json list(const std::vector<T>& v, F f)
{
    Json a = Json::array();
    for (const auto& x : v) a.push_back(f(x));
    return a;
}

Json envelope(std::string_view type)
{
    return {{"type", type}, {"protocol_version", kProtocolVersion}};
}

}  // namespace

std::string encode_frame(const Json& message)
{
    std::string body = message.dump();
    if (body.size() > kMaxFrameBytes) throw WireError("frame exceeds " + std::to_string(kMaxFrameBytes) + " bytes");
    auto n = static_cast<std::uint32_t>(body.size());
    std::string out;
    out.reserve(4 + body.size());
    out.push_back(static_cast<char>((n >> 24) & 0xff));
    out.push_back(static_cast<char>((n >> 16) & 0xff));
    out.push_back(static_cast<char>((n >> 8) & 0xff));
    out.push_back(static_cast<char>(n & 0xff));
    out += body;
    return out;
}

void FrameDecoder::feed(std::string_view bytes) { buffer_.append(bytes); }

std::optional<Json> FrameDecoder::next()
{
    if (buffer_.size() < 4) return std::nullopt;
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n = (n << 8) | static_cast<unsigned char>(buffer_[i]);
    if (n > kMaxFrameBytes) throw WireError("frame of " + std::to_string(n) + " bytes exceeds the limit");
    if (buffer_.size() < 4 + static_cast<std::size_t>(n)) return std::nullopt;
    std::string body = buffer_.substr(4, n);
    buffer_.erase(0, 4 + static_cast<std::size_t>(n));
    Json j = Json::parse(body, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw WireError("frame body is not a JSON object");
    return j;
}

Json to_json(const LayoutSnapshot& s)
{
    return {{"sequence", s.sequence},
            {"revision", s.revision},
            {"time", ms_to_seconds(s.time)},
            {"strategy", s.strategy},
            {"modules", list(s.modules, [](const ModuleView& m) { return to_json(m); })},
            {"connections", list(s.connections, [](const Connection& c) { return to_json(c); })},
            {"routes", list(s.routes, [](const RouteView& r) { return to_json(r); })},
            {"orders", list(s.orders, [](const OrderView& o) { return to_json(o); })}};
}

LayoutSnapshot snapshot_from_json(const Json& j)
{
    try {
        LayoutSnapshot s;
        s.sequence = field<std::uint64_t>(j, "sequence", "snapshot");
        s.revision = field<std::uint64_t>(j, "revision", "snapshot");
        s.time = seconds_to_ms(field<double>(j, "time", "snapshot"));
        s.strategy = field<std::string>(j, "strategy", "snapshot");
        for (const auto& m : j.at("modules")) s.modules.push_back(module_from(m));
        for (const auto& c : j.at("connections")) s.connections.push_back(connection_from(c));
        for (const auto& r : j.at("routes")) s.routes.push_back(route_from(r));
        for (const auto& o : j.at("orders")) s.orders.push_back(order_from(o));
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw WireError(std::string("malformed snapshot: ") + e.what());
    }
}

Json to_json(const Delta& d)
{
    Json j = {{"sequence", d.sequence},
              {"prev_sequence", d.prev_sequence},
              {"revision", d.revision},
              {"time", ms_to_seconds(d.time)},
              {"modules_changed", list(d.modules_changed, [](const ModuleView& m) { return to_json(m); })},
              {"modules_removed", d.modules_removed},
              {"routes_changed", list(d.routes_changed, [](const RouteView& r) { return to_json(r); })},
              {"routes_removed", d.routes_removed},
              {"orders_changed", list(d.orders_changed, [](const OrderView& o) { return to_json(o); })}};
    if (d.connections) j["connections"] = list(*d.connections, [](const Connection& c) { return to_json(c); });
    if (d.strategy) j["strategy"] = *d.strategy;
    return j;
}

Delta delta_from_json(const Json& j)
{
    try {
        Delta d;
        d.sequence = field<std::uint64_t>(j, "sequence", "delta");
        d.prev_sequence = field<std::uint64_t>(j, "prev_sequence", "delta");
        d.revision = field<std::uint64_t>(j, "revision", "delta");
        d.time = seconds_to_ms(field<double>(j, "time", "delta"));
        for (const auto& m : j.at("modules_changed")) d.modules_changed.push_back(module_from(m));
        d.modules_removed = field<std::vector<std::string>>(j, "modules_removed", "delta");
        for (const auto& r : j.at("routes_changed")) d.routes_changed.push_back(route_from(r));
        d.routes_removed = field<std::vector<std::string>>(j, "routes_removed", "delta");
        for (const auto& o : j.at("orders_changed")) d.orders_changed.push_back(order_from(o));
        if (auto it = j.find("connections"); it != j.end()) {
            d.connections.emplace();
            for (const auto& c : *it) d.connections->push_back(connection_from(c));
        }
        if (auto it = j.find("strategy"); it != j.end()) d.strategy = it->get<std::string>();
        return d;
    } catch (const nlohmann::json::exception& e) {
        throw WireError(std::string("malformed delta: ") + e.what());
    }
}

Json to_json(const OperatorCommand& c)
{
    Json j = {{"command_id", c.command_id}, {"kind", to_string(c.kind)}};
    switch (c.kind) {
    case CommandKind::override_route:
        j["route_id"] = c.route_id;
        j["path"] = c.path;
        break;
    case CommandKind::add_module:
        j["descriptor"] = c.descriptor_ref;
        j["placement"] = amfs::to_json(c.placement);
        break;
    case CommandKind::remove_module: j["module_id"] = c.module_id; break;
    case CommandKind::set_strategy: j["strategy"] = to_string(c.strategy); break;
    case CommandKind::step: j["step_ms"] = c.step_ms; break;
    case CommandKind::set_rate: j["rate"] = c.rate; break;
    case CommandKind::pause:
    case CommandKind::resume: break;
    }
    return j;
}

OperatorCommand command_from_json(const Json& j)
{
    OperatorCommand c;
    c.command_id = field<std::string>(j, "command_id", "command");
    c.kind = enum_field<CommandKind>(j, "kind", "command", parse_command_kind);
    switch (c.kind) {
    case CommandKind::override_route:
        c.route_id = field<std::string>(j, "route_id", "command");
        c.path = field<std::vector<std::string>>(j, "path", "command");
        break;
    case CommandKind::add_module: {
        c.descriptor_ref = field<std::string>(j, "descriptor", "command");
        auto it = j.find("placement");
        if (it == j.end() || !it->is_object()) throw WireError("missing required field 'command.placement'");
        c.placement = placement_from(*it, "command.placement");
        break;
    }
    case CommandKind::remove_module: c.module_id = field<std::string>(j, "module_id", "command"); break;
    case CommandKind::set_strategy:
        c.strategy = enum_field<RoutingStrategy>(j, "strategy", "command", parse_strategy);
        break;
    case CommandKind::step: c.step_ms = field<SimTime>(j, "step_ms", "command"); break;
    case CommandKind::set_rate: c.rate = field<double>(j, "rate", "command"); break;
    case CommandKind::pause:
    case CommandKind::resume: break;
    }
    return c;
}

Json to_json(const Ack& a)
{
    Json j = {{"command_id", a.command_id}, {"accepted", a.accepted}, {"revision", a.revision}, {"sequence", a.sequence}};
    if (!a.accepted) {
        j["constraint"] = a.constraint;
        j["detail"] = a.detail;
    }
    return j;
}

Ack ack_from_json(const Json& j)
{
    Ack a;
    a.command_id = field<std::string>(j, "command_id", "ack");
    a.accepted = field<bool>(j, "accepted", "ack");
    a.revision = field<std::uint64_t>(j, "revision", "ack");
    a.sequence = field<std::uint64_t>(j, "sequence", "ack");
    a.constraint = optional_field<std::string>(j, "constraint", "");
    a.detail = optional_field<std::string>(j, "detail", "");
    return a;
}

Json hello(std::string_view role, std::string_view name)
{
    Json j = envelope("hello");
    j["role"] = role;
    j["name"] = name;
    return j;
}

Json snapshot_message(const LayoutSnapshot& s)
{
    Json j = envelope("snapshot");
    j["revision"] = s.revision;
    j["sequence"] = s.sequence;
    j["snapshot"] = to_json(s);
    return j;
}

Json delta_message(const Delta& d)
{
    Json j = envelope("delta");
    j["revision"] = d.revision;
    j["delta"] = to_json(d);
    return j;
}

Json ack_message(const Ack& a)
{
    Json j = envelope("ack");
    j["command_id"] = a.command_id;
    j["revision"] = a.revision;
    j["ack"] = to_json(a);
    return j;
}

Json command_message(const OperatorCommand& c)
{
    Json j = to_json(c);
    j.update(envelope("command"));
    return j;
}

Json error_message(std::string_view reason, std::string_view detail)
{
    Json j = envelope("error");
    j["reason"] = reason;
    j["detail"] = detail;
    return j;
}

std::string check_envelope(const Json& j)
{
    auto type = j.find("type");
    if (type == j.end() || !type->is_string()) throw WireError("message without a string 'type'");
    auto version = j.find("protocol_version");
    if (version == j.end() || !version->is_number_integer())
        throw WireError("message without an integer 'protocol_version'");
    if (version->get<int>() != kProtocolVersion)
        throw WireError("unsupported protocol_version " + std::to_string(version->get<int>()));
    static const std::set<std::string> known{"hello", "snapshot_request", "snapshot", "subscribe",
                                              "delta", "command", "ack", "error"};
    auto t = type->get<std::string>();
    if (!known.count(t)) throw WireError("unknown message type '" + t + "'");
    return t;
}

}  // namespace amfs::wire

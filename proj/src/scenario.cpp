#include "amfs/scenario.hpp"

#include "amfs/json_io.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace amfs {

std::string_view to_string(RoutingStrategy s)
{
    switch (s) {
    case RoutingStrategy::ssr: return "ssr";
    case RoutingStrategy::baseline_occupancy: return "baseline_occupancy";
    case RoutingStrategy::static_fixed: return "static_fixed";
    }
    return "?";
}

std::optional<RoutingStrategy> parse_strategy(std::string_view s)
{
    if (s == "ssr") return RoutingStrategy::ssr;
    if (s == "baseline_occupancy") return RoutingStrategy::baseline_occupancy;
    if (s == "static_fixed") return RoutingStrategy::static_fixed;
    return std::nullopt;
}

std::string_view to_string(ReconfigurationKind k)
{
    switch (k) {
    case ReconfigurationKind::add_module: return "add_module";
    case ReconfigurationKind::remove_module: return "remove_module";
    case ReconfigurationKind::kill_coordinator: return "kill_coordinator";
    case ReconfigurationKind::demand_change: return "demand_change";
    case ReconfigurationKind::fault: return "fault";
    case ReconfigurationKind::repair: return "repair";
    }
    return "?";
}

namespace {

namespace fs = std::filesystem;

std::optional<ReconfigurationKind> parse_kind(std::string_view s)
{
    for (auto k : {ReconfigurationKind::add_module, ReconfigurationKind::remove_module,
                   ReconfigurationKind::kill_coordinator, ReconfigurationKind::demand_change,
                   ReconfigurationKind::fault, ReconfigurationKind::repair})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

Json read_json(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ScenarioFileError(path.string() + ": cannot open file");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return Json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw ScenarioError(path.string() + ": " + e.what());
    }
}

template <typename F>
auto in_file(const fs::path& path, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const ScenarioError&) {
        throw;
    } catch (const ValidationError& e) {
        std::string msg = path.string() + ": invalid descriptor";
        for (const auto& v : e.report()) msg += "\n  " + v.field_path + ": " + v.reason;
        throw ScenarioError(msg);
    } catch (const Error& e) {
        throw ScenarioError(path.string() + ": " + e.what());
    }
}

Placement parse_placement(const Json& j, const std::string& path)
{
    Placement p;
    p.module_id = required<std::string>(j, "module_id", path);
    p.global_position = {required<double>(j, "x", path), required<double>(j, "y", path)};
    p.rotation = optional_field<int>(j, "rotation", 0);
    if (p.rotation != 0 && p.rotation != 90 && p.rotation != 180 && p.rotation != 270)
        throw ParseError("field '" + path + ".rotation' must be 0, 90, 180 or 270");
    return p;
}

SimTime seconds_field(const Json& j, const char* key, SimTime fallback)
{
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    if (!it->is_number()) throw ParseError(std::string("field 'parameters.") + key + "' must be a number");
    return seconds_to_ms(it->get<double>());
}

}  // namespace

ModuleDescriptor load_descriptor_file(const fs::path& path)
{
    Json j = read_json(path);
    return in_file(path, [&] {
        auto d = descriptor_from_json(j);
        if (auto report = validate_descriptor(d); !report.empty()) throw ValidationError(std::move(report));
        return d;
    });
}

std::vector<LayoutEntry> load_layout(const fs::path& path)
{
    Json j = read_json(path);
    return in_file(path, [&] {
        if (!j.is_object()) throw ParseError("layout document must be an object");
        if (optional_field<int>(j, "schema_version", 1) != 1) throw ParseError("unsupported schema_version");
        auto it = j.find("placements");
        if (it == j.end() || !it->is_array()) throw ParseError("missing required field 'placements'");
        std::vector<LayoutEntry> out;
        std::set<ModuleId> seen;
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& x = (*it)[i];
            std::string where = "placements[" + std::to_string(i) + "]";
            LayoutEntry e;
            e.placement = parse_placement(x, where);
            e.descriptor_ref = required<std::string>(x, "descriptor", where);
            if (!seen.insert(e.placement.module_id).second)
                throw ParseError("field '" + where + ".module_id' duplicates '" + e.placement.module_id + "'");
            e.descriptor = load_descriptor_file(path.parent_path() / e.descriptor_ref);
            e.descriptor.module_id = e.placement.module_id;
            out.push_back(std::move(e));
        }
        return out;
    });
}

ScenarioConfig load_scenario(const fs::path& path)
{
    Json j = read_json(path);
    auto config = in_file(path, [&] {
        if (!j.is_object()) throw ParseError("scenario document must be an object");
        if (optional_field<int>(j, "schema_version", 1) != 1) throw ParseError("unsupported schema_version");
        ScenarioConfig c;
        c.name = optional_field<std::string>(j, "name", path.stem().string());
        c.layout_ref = required<std::string>(j, "layout");
        c.modules = load_layout(path.parent_path() / c.layout_ref);
        auto horizon = required<double>(j, "horizon");
        if (!(horizon > 0)) throw ParseError("field 'horizon' must be > 0");
        c.horizon = seconds_to_ms(horizon);
        c.seed = optional_field<std::uint64_t>(j, "seed", 0);
        auto strategy = optional_field<std::string>(j, "routing_strategy", "ssr");
        auto s = parse_strategy(strategy);
        if (!s) throw ParseError("field 'routing_strategy' has unknown value '" + strategy + "'");
        c.strategy = *s;

        if (auto it = j.find("relations"); it != j.end()) {
            if (!it->is_array()) throw ParseError("field 'relations' must be an array");
            for (std::size_t i = 0; i < it->size(); ++i) {
                const auto& x = (*it)[i];
                std::string where = "relations[" + std::to_string(i) + "]";
                MaterialFlowRelation r;
                r.relation_id = required<std::string>(x, "relation_id", where);
                r.source = required<std::string>(x, "source", where);
                r.sink = required<std::string>(x, "sink", where);
                r.required_throughput = required<double>(x, "required_throughput", where);
                r.variability = optional_field<double>(x, "variability", 0.0);
                r.priority = optional_field<int>(x, "priority", 0);
                if (r.required_throughput < 0) throw ParseError("field '" + where + ".required_throughput' must be >= 0");
                if (r.variability < 0) throw ParseError("field '" + where + ".variability' must be >= 0");
                c.relations.push_back(std::move(r));
            }
        }

        if (auto it = j.find("parameters"); it != j.end()) {
            const auto& p = *it;
            auto& q = c.parameters;
            q.planning_latency = seconds_field(p, "planning_latency", q.planning_latency);
            q.heartbeat_period = seconds_field(p, "heartbeat_period", q.heartbeat_period);
            q.missed_heartbeats = optional_field<int>(p, "missed_heartbeats", q.missed_heartbeats);
            q.tolerance.position_mm = optional_field<double>(p, "position_tolerance", q.tolerance.position_mm);
            q.tolerance.heading_deg = optional_field<double>(p, "heading_tolerance", q.tolerance.heading_deg);
            q.scheduling_horizon = seconds_field(p, "scheduling_horizon", q.scheduling_horizon);
            q.reclaim_fraction = optional_field<double>(p, "reclaim_fraction", q.reclaim_fraction);
            q.retry_interval = seconds_field(p, "retry_interval", q.retry_interval);
            if (q.planning_latency < 0) throw ParseError("field 'parameters.planning_latency' must be >= 0");
            if (q.heartbeat_period <= 0) throw ParseError("field 'parameters.heartbeat_period' must be > 0");
            if (q.missed_heartbeats < 1) throw ParseError("field 'parameters.missed_heartbeats' must be >= 1");
            if (q.retry_interval <= 0) throw ParseError("field 'parameters.retry_interval' must be > 0");
            if (q.scheduling_horizon <= 0) throw ParseError("field 'parameters.scheduling_horizon' must be > 0");
        }

        if (auto it = j.find("script"); it != j.end()) {
            if (!it->is_array()) throw ParseError("field 'script' must be an array");
            for (std::size_t i = 0; i < it->size(); ++i) {
                const auto& x = (*it)[i];
                std::string where = "script[" + std::to_string(i) + "]";
                ReconfigurationEvent e;
                e.at = seconds_to_ms(required<double>(x, "at", where));
                auto kind = required<std::string>(x, "event", where);
                auto k = parse_kind(kind);
                if (!k) throw ParseError("field '" + where + ".event' has unknown value '" + kind + "'");
                e.kind = *k;
                switch (e.kind) {
                case ReconfigurationKind::add_module:
                    e.placement = parse_placement(x, where);
                    e.module_id = e.placement.module_id;
                    e.descriptor_ref = required<std::string>(x, "descriptor", where);
                    e.descriptor = load_descriptor_file(path.parent_path() / e.descriptor_ref);
                    e.descriptor.module_id = e.module_id;
                    break;
                case ReconfigurationKind::remove_module:
                case ReconfigurationKind::fault:
                case ReconfigurationKind::repair:
                    e.module_id = required<std::string>(x, "module_id", where);
                    break;
                case ReconfigurationKind::demand_change:
                    e.relation_id = required<std::string>(x, "relation_id", where);
                    e.required_throughput = required<double>(x, "required_throughput", where);
                    if (!(e.required_throughput > 0))
                        throw ParseError("field '" + where + ".required_throughput' must be > 0");
                    break;
                case ReconfigurationKind::kill_coordinator: break;
                }
                c.script.push_back(std::move(e));
            }
            std::stable_sort(c.script.begin(), c.script.end(),
                             [](const auto& a, const auto& b) { return a.at < b.at; });
        }
        return c;
    });
    in_file(path, [&] {
        validate_scenario(config);
        return 0;
    });
    return config;
}

void validate_scenario(const ScenarioConfig& c)
{
    if (c.horizon <= 0) throw ScenarioError("horizon must be > 0");
    std::set<ModuleId> present;
    std::set<ModuleId> ever;
    for (const auto& m : c.modules) {
        present.insert(m.placement.module_id);
        ever.insert(m.placement.module_id);
    }
    for (const auto& e : c.script)
        if (e.kind == ReconfigurationKind::add_module) ever.insert(e.module_id);

    std::set<RelationId> relation_ids;
    for (std::size_t i = 0; i < c.relations.size(); ++i) {
        const auto& r = c.relations[i];
        std::string where = "relations[" + std::to_string(i) + "]";
        if (!relation_ids.insert(r.relation_id).second)
            throw ScenarioError(where + ".relation_id: duplicate relation '" + r.relation_id + "'");
        if (!ever.count(r.source)) throw ScenarioError(where + ".source: unknown module '" + r.source + "'");
        if (!ever.count(r.sink)) throw ScenarioError(where + ".sink: unknown module '" + r.sink + "'");
        if (r.source == r.sink) throw ScenarioError(where + ": source equals sink");
    }

    for (std::size_t i = 0; i < c.script.size(); ++i) {
        const auto& e = c.script[i];
        std::string where = "script[" + std::to_string(i) + "]";
        if (e.at < 0 || e.at > c.horizon) throw ScenarioError(where + ".at: event outside [0, horizon]");
        switch (e.kind) {
        case ReconfigurationKind::add_module:
            if (!present.insert(e.module_id).second)
                throw ScenarioError(where + ".module_id: module '" + e.module_id + "' already present");
            break;
        case ReconfigurationKind::remove_module:
            if (!present.erase(e.module_id))
                throw ScenarioError(where + ".module_id: unknown module '" + e.module_id + "'");
            break;
        case ReconfigurationKind::fault:
        case ReconfigurationKind::repair:
            if (!present.count(e.module_id))
                throw ScenarioError(where + ".module_id: unknown module '" + e.module_id + "'");
            break;
        case ReconfigurationKind::demand_change:
            if (!relation_ids.count(e.relation_id))
                throw ScenarioError(where + ".relation_id: unknown relation '" + e.relation_id + "'");
            break;
        case ReconfigurationKind::kill_coordinator:
            if (present.size() < 2) throw ScenarioError(where + ": no module would be left to take over");
            break;
        }
    }
}

}  // namespace amfs

#include "amfs/model.hpp"
#include "amfs/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace amfs {

namespace {

constexpr double kBoundaryToleranceMm = 0.5;
constexpr double kHeadingToleranceDeg = 1.0;

double angle_distance(double a, double b)
{
    double d = std::fmod(std::fabs(a - b), 360.0);
    return d > 180.0 ? 360.0 - d : d;
}

bool near(double a, double b) { return std::fabs(a - b) <= kBoundaryToleranceMm; }

// Outward normals of the footprint edges the point lies on.
std::vector<double> edge_normals(const Footprint& f, const Point& p)
{
    std::vector<double> normals;
    bool within_x = p.x >= -kBoundaryToleranceMm && p.x <= f.width + kBoundaryToleranceMm;
    bool within_y = p.y >= -kBoundaryToleranceMm && p.y <= f.length + kBoundaryToleranceMm;
    if (within_y && near(p.x, 0.0)) normals.push_back(180.0);
    if (within_y && near(p.x, f.width)) normals.push_back(0.0);
    if (within_x && near(p.y, 0.0)) normals.push_back(270.0);
    if (within_x && near(p.y, f.length)) normals.push_back(90.0);
    return normals;
}

template <typename Enum, std::size_t N>
std::optional<Enum> lookup(std::string_view s, const std::pair<Enum, std::string_view> (&table)[N])
{
    for (const auto& [value, name] : table)
        if (name == s) return value;
    return std::nullopt;
}

template <typename Enum, std::size_t N>
std::string_view name_of(Enum v, const std::pair<Enum, std::string_view> (&table)[N])
{
    for (const auto& [value, name] : table)
        if (value == v) return name;
    return "?";
}

constexpr std::pair<ModuleKind, std::string_view> kModuleKinds[] = {
    {ModuleKind::transport, "transport"}, {ModuleKind::manipulation, "manipulation"}};
constexpr std::pair<AbilityKind, std::string_view> kAbilityKinds[] = {
    {AbilityKind::transport, "transport"}, {AbilityKind::buffer, "buffer"},
    {AbilityKind::identify, "identify"},   {AbilityKind::label, "label"},
    {AbilityKind::lift, "lift"},           {AbilityKind::rotate, "rotate"}};
constexpr std::pair<Flow, std::string_view> kFlows[] = {
    {Flow::inbound, "inbound"}, {Flow::outbound, "outbound"}, {Flow::bidirectional, "bidirectional"}};
constexpr std::pair<OperationalState, std::string_view> kStates[] = {
    {OperationalState::operational, "operational"},
    {OperationalState::fault, "fault"},
    {OperationalState::removed, "removed"}};

}  // namespace

std::string_view to_string(ModuleKind v) { return name_of(v, kModuleKinds); }
std::string_view to_string(AbilityKind v) { return name_of(v, kAbilityKinds); }
std::string_view to_string(Flow v) { return name_of(v, kFlows); }
std::string_view to_string(OperationalState v) { return name_of(v, kStates); }

std::optional<ModuleKind> parse_module_kind(std::string_view s) { return lookup(s, kModuleKinds); }
std::optional<AbilityKind> parse_ability_kind(std::string_view s) { return lookup(s, kAbilityKinds); }
std::optional<Flow> parse_flow(std::string_view s) { return lookup(s, kFlows); }
std::optional<OperationalState> parse_operational_state(std::string_view s) { return lookup(s, kStates); }

const PhysicalInterface* ModuleDescriptor::find_interface(std::string_view id) const
{
    auto it = std::find_if(interfaces.begin(), interfaces.end(),
                           [&](const PhysicalInterface& i) { return i.interface_id == id; });
    return it == interfaces.end() ? nullptr : &*it;
}

bool ModuleDescriptor::has_ability(AbilityKind kind) const
{
    return std::any_of(abilities.begin(), abilities.end(), [&](const Ability& a) { return a.kind == kind; });
}

ValidationError::ValidationError(ValidationReport report)
    : Error([&] {
          std::string msg = "descriptor invalid:";
          for (const auto& v : report) msg += " [" + v.field_path + ": " + v.reason + "]";
          return msg;
      }()),
      report_(std::move(report))
{
}

ValidationReport validate_descriptor(const ModuleDescriptor& d)
{
    ValidationReport out;
    auto add = [&](std::string path, std::string reason) { out.push_back({std::move(path), std::move(reason)}); };

    if (d.module_id.empty()) add("module_id", "module_id must be nonempty");
    if (!(d.footprint.width > 0.0)) add("footprint.width", "footprint width must be > 0");
    if (!(d.footprint.length > 0.0)) add("footprint.length", "footprint length must be > 0");
    if (d.interfaces.empty()) add("interfaces", "at least one interface required");
    if (d.module_kind == ModuleKind::transport && !d.has_ability(AbilityKind::transport))
        add("abilities", "transport module requires a transport ability");
    if (!(d.transfer_cost >= 0.0)) add("transfer_cost", "transfer_cost must be >= 0");

    std::set<InterfaceId> ids;
    for (std::size_t i = 0; i < d.interfaces.size(); ++i) {
        const auto& itf = d.interfaces[i];
        std::string path = "interfaces[" + std::to_string(i) + "]";
        if (itf.interface_id.empty()) add(path + ".interface_id", "interface_id must be nonempty");
        if (!ids.insert(itf.interface_id).second)
            add(path + ".interface_id", "duplicate interface id '" + itf.interface_id + "'");
        if (!(itf.heading >= 0.0 && itf.heading < 360.0))
            add(path + ".heading", "heading must be in [0, 360)");
        if (d.footprint.width > 0.0 && d.footprint.length > 0.0) {
            auto normals = edge_normals(d.footprint, itf.local_position);
            if (normals.empty()) {
                add(path + ".local_position", "interface must lie on the footprint boundary");
            } else if (std::none_of(normals.begin(), normals.end(), [&](double n) {
                           return angle_distance(n, itf.heading) <= kHeadingToleranceDeg;
                       })) {
                add(path + ".heading", "heading must be normal to the footprint edge");
            }
        }
    }

    std::set<std::pair<InterfaceId, InterfaceId>> oriented;
    for (std::size_t i = 0; i < d.internal_links.size(); ++i) {
        const auto& link = d.internal_links[i];
        std::string path = "internal_links[" + std::to_string(i) + "]";
        for (const auto* ref : {&link.from_interface, &link.to_interface}) {
            if (!ids.count(*ref))
                add(path + (ref == &link.from_interface ? ".from_interface" : ".to_interface"),
                    "unknown interface '" + *ref + "'");
        }
        if (link.from_interface == link.to_interface)
            add(path, "link must connect two distinct interfaces");
        if (!(link.process_time > 0.0)) add(path + ".process_time", "process_time must be > 0");
        if (!(link.capacity > 0.0)) add(path + ".capacity", "capacity must be > 0");
        bool dup = !oriented.insert({link.from_interface, link.to_interface}).second;
        if (link.reversible) dup = !oriented.insert({link.to_interface, link.from_interface}).second || dup;
        if (dup) add(path, "duplicate link between '" + link.from_interface + "' and '" + link.to_interface + "'");
    }

    if (!(d.status.workload >= 0.0 && d.status.workload <= 1.0))
        add("status.workload", "workload must be in [0, 1]");
    if (d.status.operational_state == OperationalState::removed && d.status.workload > 0.0)
        add("status.workload", "removed module cannot carry workload");
    return out;
}

int concurrent_capacity(const InternalLink& link)
{
    auto n = static_cast<int>(std::floor(link.capacity * link.process_time / 60.0 + 1e-9));
    return std::max(n, 1);
}

int concurrent_capacity(const ModuleDescriptor& d)
{
    int total = 0;
    for (const auto& l : d.internal_links) total += concurrent_capacity(l);
    return total;
}

// ---------------------------------------------------------------------------
// JSON

Json to_json(const Footprint& f) { return {{"width", f.width}, {"length", f.length}}; }

Json to_json(const ModuleStatus& s)
{
    return {{"operational_state", to_string(s.operational_state)}, {"workload", s.workload}};
}

Json to_json(const Placement& p)
{
    return {{"module_id", p.module_id}, {"x", p.global_position.x}, {"y", p.global_position.y},
            {"rotation", p.rotation}};
}

Json to_json(const ModuleDescriptor& d)
{
    Json abilities = Json::array();
    for (const auto& a : d.abilities) {
        Json params = Json::object();
        for (const auto& [k, v] : a.parameters)
            std::visit([&](const auto& x) { params[k] = x; }, v);
        abilities.push_back({{"kind", to_string(a.kind)}, {"parameters", params}});
    }
    Json interfaces = Json::array();
    for (const auto& i : d.interfaces) {
        interfaces.push_back({{"interface_id", i.interface_id},
                              {"local_position", {{"x", i.local_position.x}, {"y", i.local_position.y}}},
                              {"heading", i.heading},
                              {"flow", to_string(i.flow)},
                              {"tu_class", i.tu_class}});
    }
    Json links = Json::array();
    for (const auto& l : d.internal_links) {
        links.push_back({{"from_interface", l.from_interface},
                         {"to_interface", l.to_interface},
                         {"process_time", l.process_time},
                         {"capacity", l.capacity},
                         {"reversible", l.reversible}});
    }
    return {{"schema_version", kDescriptorSchemaVersion},
            {"module_id", d.module_id},
            {"module_kind", to_string(d.module_kind)},
            {"abilities", abilities},
            {"footprint", to_json(d.footprint)},
            {"interfaces", interfaces},
            {"internal_links", links},
            {"transfer_cost", d.transfer_cost},
            {"status", to_json(d.status)}};
}

namespace {

template <typename Enum>
Enum parse_enum(const Json& j, const char* key, std::string_view path,
                std::optional<Enum> (*parse)(std::string_view))
{
    auto s = required<std::string>(j, key, path);
    auto v = parse(s);
    if (!v) throw ParseError("field '" + std::string(path.empty() ? "" : std::string(path) + ".") + key +
                             "' has unknown value '" + s + "'");
    return *v;
}

Point parse_point(const Json& j, std::string_view path)
{
    if (!j.is_object()) throw ParseError("field '" + std::string(path) + "' must be an object");
    return {required<double>(j, "x", path), required<double>(j, "y", path)};
}

}  // namespace

ModuleDescriptor descriptor_from_json(const Json& j)
{
    if (!j.is_object()) throw ParseError("descriptor document must be an object");
    auto version = required<int>(j, "schema_version");
    if (version != kDescriptorSchemaVersion)
        throw ParseError("unsupported schema_version " + std::to_string(version));

    ModuleDescriptor d;
    d.module_id = required<std::string>(j, "module_id");
    d.module_kind = parse_enum<ModuleKind>(j, "module_kind", "", parse_module_kind);

    if (auto it = j.find("abilities"); it != j.end()) {
        if (!it->is_array()) throw ParseError("field 'abilities' must be an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& a = (*it)[i];
            std::string path = "abilities[" + std::to_string(i) + "]";
            Ability ability;
            ability.kind = parse_enum<AbilityKind>(a, "kind", path, parse_ability_kind);
            if (auto p = a.find("parameters"); p != a.end() && !p->is_null()) {
                if (!p->is_object()) throw ParseError("field '" + path + ".parameters' must be an object");
                for (const auto& [k, v] : p->items()) {
                    if (v.is_number()) ability.parameters[k] = v.get<double>();
                    else if (v.is_string()) ability.parameters[k] = v.get<std::string>();
                    else throw ParseError("ability parameter '" + k + "' must be a number or string");
                }
            }
            d.abilities.push_back(std::move(ability));
        }
    }

    auto fp = j.find("footprint");
    if (fp == j.end()) throw ParseError("missing required field 'footprint'");
    d.footprint = {required<double>(*fp, "width", "footprint"), required<double>(*fp, "length", "footprint")};

    auto itfs = j.find("interfaces");
    if (itfs == j.end() || !itfs->is_array()) throw ParseError("missing required field 'interfaces'");
    for (std::size_t i = 0; i < itfs->size(); ++i) {
        const auto& x = (*itfs)[i];
        std::string path = "interfaces[" + std::to_string(i) + "]";
        PhysicalInterface itf;
        itf.interface_id = required<std::string>(x, "interface_id", path);
        auto lp = x.find("local_position");
        if (lp == x.end()) throw ParseError("missing required field '" + path + ".local_position'");
        itf.local_position = parse_point(*lp, path + ".local_position");
        itf.heading = required<double>(x, "heading", path);
        itf.flow = parse_enum<Flow>(x, "flow", path, parse_flow);
        itf.tu_class = required<std::string>(x, "tu_class", path);
        d.interfaces.push_back(std::move(itf));
    }

    auto links = j.find("internal_links");
    if (links == j.end() || !links->is_array()) throw ParseError("missing required field 'internal_links'");
    for (std::size_t i = 0; i < links->size(); ++i) {
        const auto& x = (*links)[i];
        std::string path = "internal_links[" + std::to_string(i) + "]";
        d.internal_links.push_back({required<std::string>(x, "from_interface", path),
                                    required<std::string>(x, "to_interface", path),
                                    required<double>(x, "process_time", path),
                                    required<double>(x, "capacity", path),
                                    optional_field<bool>(x, "reversible", false)});
    }

    d.transfer_cost = optional_field<double>(j, "transfer_cost", 0.0);
    if (auto st = j.find("status"); st != j.end() && !st->is_null()) {
        d.status.operational_state =
            parse_enum<OperationalState>(*st, "operational_state", "status", parse_operational_state);
        d.status.workload = optional_field<double>(*st, "workload", 0.0);
    }
    return d;
}

ModuleDescriptor load_descriptor(std::string_view text)
{
    Json j;
    try {
        j = Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(std::string("malformed descriptor document: ") + e.what());
    }
    auto d = descriptor_from_json(j);
    if (auto report = validate_descriptor(d); !report.empty()) throw ValidationError(std::move(report));
    return d;
}

std::string save_descriptor(const ModuleDescriptor& d) { return to_json(d).dump(2); }

}  // namespace amfs

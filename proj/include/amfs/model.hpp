#pragma once

// Module descriptors: the uniform knowledge base every module agent carries.

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace amfs {

using ModuleId = std::string;
using InterfaceId = std::string;

/// Simulated time in integer milliseconds.
using SimTime = std::int64_t;

inline SimTime seconds_to_ms(double s) { return static_cast<SimTime>(s * 1000.0 + (s >= 0 ? 0.5 : -0.5)); }
inline double ms_to_seconds(SimTime t) { return static_cast<double>(t) / 1000.0; }

/// Base for all domain errors raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

struct Point {
    double x = 0.0;
    double y = 0.0;
    bool operator==(const Point&) const = default;
};

enum class ModuleKind { transport, manipulation };
enum class AbilityKind { transport, buffer, identify, label, lift, rotate };
enum class Flow { inbound, outbound, bidirectional };
enum class OperationalState { operational, fault, removed };

using ParameterValue = std::variant<double, std::string>;

struct Ability {
    AbilityKind kind = AbilityKind::transport;
    std::map<std::string, ParameterValue> parameters;
    bool operator==(const Ability&) const = default;
};

/// Footprint extent: width along local x, length along local y (mm).
struct Footprint {
    double width = 0.0;
    double length = 0.0;
    bool operator==(const Footprint&) const = default;
};

struct PhysicalInterface {
    InterfaceId interface_id;
    Point local_position;
    double heading = 0.0;  // degrees, outward normal
    Flow flow = Flow::bidirectional;
    std::string tu_class;
    bool operator==(const PhysicalInterface&) const = default;
};

struct InternalLink {
    InterfaceId from_interface;
    InterfaceId to_interface;
    double process_time = 0.0;  // seconds
    double capacity = 0.0;      // TUs per minute
    bool reversible = false;
    bool operator==(const InternalLink&) const = default;
};

struct ModuleStatus {
    OperationalState operational_state = OperationalState::operational;
    double workload = 0.0;
    bool operator==(const ModuleStatus&) const = default;
};

struct ModuleDescriptor {
    ModuleId module_id;
    ModuleKind module_kind = ModuleKind::transport;
    std::vector<Ability> abilities;
    Footprint footprint;
    std::vector<PhysicalInterface> interfaces;
    std::vector<InternalLink> internal_links;
    double transfer_cost = 0.0;
    ModuleStatus status;

    bool operator==(const ModuleDescriptor&) const = default;

    const PhysicalInterface* find_interface(std::string_view id) const;
    bool has_ability(AbilityKind kind) const;
};

struct Placement {
    ModuleId module_id;
    Point global_position;
    int rotation = 0;  // one of 0, 90, 180, 270
    bool operator==(const Placement&) const = default;
};

struct Violation {
    std::string field_path;
    std::string reason;
    bool operator==(const Violation&) const = default;
};

using ValidationReport = std::vector<Violation>;

class ValidationError : public Error {
public:
    explicit ValidationError(ValidationReport report);
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

ValidationReport validate_descriptor(const ModuleDescriptor& descriptor);

inline constexpr int kDescriptorSchemaVersion = 1;

/// Parses a descriptor document; throws ParseError or ValidationError.
ModuleDescriptor load_descriptor(std::string_view text);
std::string save_descriptor(const ModuleDescriptor& descriptor);

/// Concurrent TUs a link can hold: floor(capacity * process_time / 60), at least 1.
int concurrent_capacity(const InternalLink& link);
/// Sum of concurrent capacities over all internal links.
int concurrent_capacity(const ModuleDescriptor& descriptor);

std::string_view to_string(ModuleKind v);
std::string_view to_string(AbilityKind v);
std::string_view to_string(Flow v);
std::string_view to_string(OperationalState v);

std::optional<ModuleKind> parse_module_kind(std::string_view s);
std::optional<AbilityKind> parse_ability_kind(std::string_view s);
std::optional<Flow> parse_flow(std::string_view s);
std::optional<OperationalState> parse_operational_state(std::string_view s);

}  // namespace amfs

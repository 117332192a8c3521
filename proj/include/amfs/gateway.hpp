#pragma once

// Operator-facing view of a running simulation: immutable snapshots, deltas
// between consecutive snapshots, and validated operator commands.

#include "amfs/simulation.hpp"

#include <deque>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace amfs {

struct ActuatorView {
    std::string actuator_id;
    std::string direction;  // "from->to"
    bool operator==(const ActuatorView&) const = default;
};

struct ModuleView {
    ModuleId module_id;
    Footprint footprint;
    Placement placement;
    OperationalState status = OperationalState::operational;
    double workload = 0.0;
    bool is_active_coordinator = false;
    std::vector<ActuatorView> running_actuators;
    bool operator==(const ModuleView&) const = default;
};

struct RouteView {
    RouteId route_id;
    RelationId relation_id;
    std::vector<ModuleId> path;
    double reserved_capacity = 0.0;
    double used_capacity = 0.0;                 // TUs per minute over the last 60 s
    std::optional<double> average_duration;    // seconds, once a TU was delivered
    RouteStatus status = RouteStatus::active;
    bool operator==(const RouteView&) const = default;
};

struct OrderView {
    TuId tu_id = 0;
    RelationId relation_id;
    TuState state = TuState::waiting;
    std::optional<RouteId> route_id;
    std::optional<SimTime> scheduled_arrival;
    bool operator==(const OrderView&) const = default;
};

struct LayoutSnapshot {
    std::uint64_t sequence = 0;
    std::uint64_t revision = 0;  // topology revision
    SimTime time = 0;
    std::vector<ModuleView> modules;
    std::vector<Connection> connections;
    std::vector<RouteView> routes;
    std::vector<OrderView> orders;  // TUs not yet delivered
    std::string strategy;
    /// Equality of the displayed state, ignoring sequence and time.
    bool same_state(const LayoutSnapshot& o) const;
};

/// Reads the simulation at its current instant. Sequence is left at 0.
LayoutSnapshot take_snapshot(const Simulation& sim);

/// Changes from the snapshot at prev_sequence to the one at sequence.
/// Delivered orders appear once with state delivered and then leave the list.
struct Delta {
    std::uint64_t sequence = 0;
    std::uint64_t prev_sequence = 0;
    std::uint64_t revision = 0;
    SimTime time = 0;
    std::vector<ModuleView> modules_changed;
    std::vector<ModuleId> modules_removed;
    std::optional<std::vector<Connection>> connections;  // full list when changed
    std::vector<RouteView> routes_changed;
    std::vector<RouteId> routes_removed;
    std::vector<OrderView> orders_changed;
    std::optional<std::string> strategy;
    bool empty() const;
};

/// Empty when nothing but time differs.
Delta diff_snapshots(const LayoutSnapshot& before, const LayoutSnapshot& after, const Simulation& sim);
/// The snapshot obtained by applying a delta; delivered orders are dropped.
LayoutSnapshot apply_delta(LayoutSnapshot snapshot, const Delta& delta);

enum class CommandKind { override_route, add_module, remove_module, set_strategy, pause, step, resume, set_rate };
std::string_view to_string(CommandKind k);
std::optional<CommandKind> parse_command_kind(std::string_view s);

struct OperatorCommand {
    std::string command_id;
    CommandKind kind = CommandKind::pause;
    RouteId route_id;                 // override_route
    std::vector<ModuleId> path;       // override_route
    std::string descriptor_ref;       // add_module
    Placement placement;              // add_module
    ModuleId module_id;               // remove_module
    RoutingStrategy strategy = RoutingStrategy::ssr;  // set_strategy
    SimTime step_ms = 0;              // step
    double rate = 1.0;                // set_rate
};

struct Ack {
    std::string command_id;
    bool accepted = false;
    std::uint64_t revision = 0;
    std::uint64_t sequence = 0;
    std::string constraint;  // when rejected
    std::string detail;
};

class Gateway {
public:
    using SubscriberId = std::uint64_t;
    static constexpr std::size_t kMaxBufferedDeltas = 1024;

    /// Descriptor references in add_module commands resolve against base_dir.
    Gateway(Simulation& sim, std::filesystem::path base_dir, bool paused = true, double rate = 1.0);

    /// Publishes pending changes, then returns the snapshot at the current sequence.
    const LayoutSnapshot& snapshot();
    /// Emits a delta to every subscriber if the state changed since the last one.
    std::optional<Delta> publish();

    /// Validates and applies one command; exactly one acknowledgement per call.
    Ack apply(const OperatorCommand& command);

    SubscriberId subscribe();
    void unsubscribe(SubscriberId id);
    std::vector<Delta> drain(SubscriberId id);
    /// True once a subscriber fell more than kMaxBufferedDeltas behind.
    bool dropped(SubscriberId id) const;

    bool paused() const { return paused_; }
    double rate() const { return rate_; }
    /// Advances simulated time by wall_seconds * rate unless paused.
    void advance_wall(double wall_seconds);

    const Simulation& simulation() const { return sim_; }

private:
    struct Subscriber {
        std::deque<Delta> buffer;
        bool dropped = false;
    };

    Ack reject(const OperatorCommand& c, std::string constraint, std::string detail);
    Ack accept(const OperatorCommand& c);

    Simulation& sim_;
    std::filesystem::path base_dir_;
    bool paused_;
    double rate_;
    double pending_ms_ = 0.0;
    LayoutSnapshot last_;
    std::uint64_t last_change_ = 0;
    std::map<SubscriberId, Subscriber> subscribers_;
    SubscriberId next_subscriber_ = 1;
};

}  // namespace amfs

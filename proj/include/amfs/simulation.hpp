#pragma once

// Discrete-event engine. One logical loop owns simulated time; events at the
// same instant run by phase (handovers, planning deliveries, reconfiguration,
// releases, heartbeats) and then by insertion order, with agents stepped in
// module id order.

#include "amfs/agent.hpp"
#include "amfs/coordinator.hpp"
#include "amfs/event_log.hpp"
#include "amfs/metrics.hpp"
#include "amfs/scenario.hpp"

#include <deque>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <variant>

namespace amfs {

enum class TuState { waiting, scheduled, in_transit, delivered, blocked };
std::string_view to_string(TuState s);

struct TransportUnit {
    TuId tu_id = 0;
    RelationId relation_id;
    SimTime release_time = 0;
    TuState state = TuState::waiting;
    std::optional<ModuleId> module;        // while in transit
    std::optional<SimTime> arrival_time;   // once delivered
    std::string blocked_reason;
    std::optional<RouteId> route_id;
    std::optional<Schedule> schedule;
    std::size_t next_boundary = 0;
};

/// Deliveries per route, for measured capacity and duration.
struct RouteUsage {
    std::deque<SimTime> recent_arrivals;
    std::size_t deliveries = 0;
    double total_duration = 0.0;  // seconds
};

/// Coordinator state captured around a failover.
struct FailoverRecord {
    ModuleId failed;
    ModuleId successor;
    SimTime killed_at = 0;
    SimTime elected_at = 0;
    Registry registry_at_kill;
    RouteSet routes_at_kill;
    Registry registry_at_election;
    RouteSet routes_at_election;
};

/// TU accounting at the horizon instant.
struct HorizonCounts {
    std::size_t released = 0;
    std::size_t delivered = 0;
    std::size_t in_flight = 0;
    std::size_t blocked = 0;
    std::size_t waiting = 0;
};

class Simulation {
public:
    /// Sets up agents, elects the first coordinator and queues registrations
    /// and arrivals. No event runs until the clock is advanced.
    explicit Simulation(ScenarioConfig config);

    SimTime now() const { return now_; }
    SimTime horizon() const { return config_.horizon; }
    bool halted() const { return halted_; }
    bool idle() const { return queue_.empty(); }
    std::optional<SimTime> next_event_time() const;

    /// Runs every event of the next instant; false when nothing is queued.
    bool step_instant();
    /// Runs all events with time <= t and leaves the clock at t.
    void run_until(SimTime t);
    /// Runs to the horizon, then drains scheduled transports.
    void run_to_completion();

    const ScenarioConfig& config() const { return config_; }
    RoutingStrategy strategy() const { return strategy_; }
    const CoordinatorState& coordinator() const { return coordinator_; }
    std::optional<ModuleId> active_coordinator() const;
    const std::map<ModuleId, AgentState>& agents() const { return agents_; }
    const std::map<TuId, TransportUnit>& tus() const { return tus_; }
    const ReservationBook& book() const { return book_; }
    const EventLog& log() const { return log_; }
    const IncrementalMetrics& metrics() const { return metrics_; }
    const std::vector<std::string>& diagnostics() const { return diagnostics_; }
    const std::map<RelationId, SemiStaticRoute>& fixed_routes() const { return fixed_routes_; }
    const std::map<RouteId, RouteUsage>& route_usage() const { return route_usage_; }
    const std::set<ModuleId>& killed() const { return killed_; }
    const std::optional<FailoverRecord>& last_failover() const { return failover_; }
    const std::optional<HorizonCounts>& horizon_counts() const { return horizon_counts_; }
    std::set<ModuleId> occupied_modules() const;
    /// Increments on every observable state change.
    std::uint64_t change_counter() const { return changes_; }

    /// Applies a reconfiguration at the current instant.
    void execute_reconfiguration(const ReconfigurationEvent& event);
    /// Forces a route onto a path; throws OverrideRejected and leaves state unchanged.
    RenegotiationOutcome override_route(const RouteId& route_id, const std::vector<ModuleId>& path);
    void set_strategy(RoutingStrategy strategy);
    /// Operator removal: refused with ModuleOccupied while the module holds a TU.
    void remove_module(const ModuleId& module_id);

private:
    struct DeliverMessage {
        AgentMessage message;
    };
    struct Boundary {
        TuId tu = 0;
    };
    struct ScriptStep {
        std::size_t index = 0;
    };
    struct Release {
        RelationId relation;
        std::uint64_t generation = 0;
    };
    struct Retry {};
    struct Heartbeat {};
    using Body = std::variant<DeliverMessage, Boundary, ScriptStep, Release, Retry, Heartbeat>;

    enum Phase : int { handover = 0, planning = 1, reconfig = 2, release = 3, heartbeat = 4 };

    struct Event {
        SimTime t = 0;
        int phase = 0;
        std::uint64_t seq = 0;
        Body body;
        bool operator>(const Event& o) const
        {
            return std::tie(t, phase, seq) > std::tie(o.t, o.phase, o.seq);
        }
    };

    void push(SimTime t, int phase, Body body);
    void send(AgentMessage m);
    LogRecord record(std::string_view kind) const;
    void diagnose(const std::string& where, const std::string& what);
    AgentState& agent(const ModuleId& id);

    void handle_batch(int phase, std::vector<Event>& batch);
    void deliver_message(AgentMessage m);
    void coordinator_receive(const AgentMessage& m);
    void step_inboxes();
    void process_boundaries(std::vector<TuId> batch);
    void perform_boundary(TransportUnit& tu);
    void on_release(const Release& r);
    void on_heartbeat();
    void failover();

    void create_agent(const ModuleDescriptor& d, const Placement& p, const std::string& ref);
    void request_registration(const ModuleId& id);
    void kill_coordinator();
    void begin_removal(const ModuleId& m);
    void try_complete_removals();
    void handle_layout_change(const std::set<ModuleId>& hint);
    void apply_outcome(const RenegotiationOutcome& outcome);
    void refresh_fixed_routes();
    void change_demand(const RelationId& relation, double throughput);
    void generate_releases(const MaterialFlowRelation& r, SimTime from);

    void process_all_queues();
    void process_queue(const RelationId& relation);
    bool try_schedule(TransportUnit& tu);
    std::optional<std::pair<std::vector<RouteHop>, std::string>> select_path(const MaterialFlowRelation& r,
                                                                             std::string& reason);
    std::optional<std::vector<RouteHop>> baseline_path(const MaterialFlowRelation& r);
    void ensure_retry();
    void capture_horizon();

    ScenarioConfig config_;
    RoutingStrategy strategy_;
    SimTime now_ = 0;
    bool halted_ = false;
    std::uint64_t changes_ = 0;

    std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
    std::uint64_t next_seq_ = 0;
    std::uint64_t next_message_id_ = 1;
    TuId next_tu_id_ = 1;

    CoordinatorState coordinator_;
    SimTime elected_at_ = 0;
    std::map<ModuleId, AgentState> agents_;
    struct StoredModule {
        ModuleDescriptor descriptor;
        Placement placement;
        std::string ref;
    };
    std::map<ModuleId, StoredModule> module_store_;
    std::set<ModuleId> registrations_in_flight_;
    std::map<RelationId, std::string> last_rejection_;
    std::set<ModuleId> killed_;
    std::set<ModuleId> removing_;
    std::set<ModuleId> deferred_removals_;
    std::set<ModuleId> layout_dirty_;
    bool layout_pending_ = false;

    std::map<RelationId, MaterialFlowRelation> relations_;
    std::map<RelationId, std::uint64_t> generation_;
    std::map<RelationId, std::deque<TuId>> queues_;
    std::map<RelationId, SemiStaticRoute> fixed_routes_;
    std::uint64_t next_fixed_number_ = 1;
    std::map<TuId, TransportUnit> tus_;
    ReservationBook book_;
    bool retry_pending_ = false;

    EventLog log_;
    IncrementalMetrics metrics_;
    std::vector<std::string> diagnostics_;
    std::map<RouteId, RouteUsage> route_usage_;
    std::optional<FailoverRecord> failover_;
    std::optional<HorizonCounts> horizon_counts_;
    std::mt19937_64 rng_;
};

struct RunResult {
    MetricsReport metrics;
    MetricsReport incremental;
    EventLog log;
    std::vector<std::string> diagnostics;
    std::optional<HorizonCounts> horizon_counts;
};

/// Startup, arrivals, reconfiguration script and transports up to the
/// horizon, then the drain of scheduled TUs.
RunResult run_scenario(const ScenarioConfig& config);

/// Reconfiguration applied to a live simulation at its current instant.
Simulation& execute_reconfiguration(Simulation& sim, const ReconfigurationEvent& event);

}  // namespace amfs

#pragma once

// Throughput, process time, utilization and blocking statistics. The same
// report is produced incrementally during a run and from the event log.

#include "amfs/event_log.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace amfs {

struct RelationMetrics {
    std::size_t released = 0;
    std::size_t delivered = 0;          // arrivals at or before the horizon
    double throughput = 0.0;            // TUs per minute
    double mean_process_time = 0.0;     // seconds, release to delivery
    double p95_process_time = 0.0;      // seconds, nearest rank
    bool operator==(const RelationMetrics&) const = default;
};

struct ModuleMetrics {
    double utilization = 0.0;  // busy time / horizon
    std::size_t traversals = 0;
    bool operator==(const ModuleMetrics&) const = default;
};

struct MetricsReport {
    SimTime horizon = 0;
    std::map<RelationId, RelationMetrics> relations;
    std::map<ModuleId, ModuleMetrics> modules;
    std::size_t total_released = 0;
    std::size_t total_delivered = 0;
    std::size_t delivered_after_horizon = 0;
    std::size_t blocked_at_horizon = 0;
    std::size_t in_flight_at_horizon = 0;
    double total_blocked_time = 0.0;  // seconds, clipped to the horizon
    bool operator==(const MetricsReport&) const = default;

    double total_throughput() const;
};

/// Accumulates the report from simulator callbacks as the run proceeds.
class IncrementalMetrics {
public:
    void declare_relation(const RelationId& r);
    void declare_module(const ModuleId& m);
    void on_release(TuId tu, const RelationId& r, SimTime t);
    void on_blocked(TuId tu, SimTime t);
    void on_scheduled(TuId tu, SimTime t);
    void on_enter(const ModuleId& m, SimTime t);
    void on_exit(const ModuleId& m, SimTime t);
    void on_delivered(TuId tu, const RelationId& r, SimTime release, SimTime t);

    MetricsReport report(SimTime horizon) const;

private:
    struct Busy {
        int count = 0;
        SimTime since = 0;
        std::vector<std::pair<SimTime, SimTime>> intervals;
        std::size_t traversals = 0;
    };
    std::map<RelationId, std::size_t> released_;
    std::map<RelationId, std::vector<std::pair<SimTime, SimTime>>> deliveries_;  // (release, arrival)
    std::map<ModuleId, Busy> busy_;
    std::map<TuId, SimTime> blocked_since_;
    std::vector<std::pair<SimTime, SimTime>> blocked_intervals_;
    std::set<TuId> released_ids_;
};

/// Recomputes the report from a log. Throws MalformedLog on inconsistent records.
MetricsReport compute_metrics(const EventLog& log, SimTime horizon);

/// One row per relation and per module.
std::string metrics_table(const MetricsReport& m);
std::string metrics_json(const MetricsReport& m);

/// Nearest-rank percentile of an unsorted sample; 0 for an empty sample.
double percentile_nearest_rank(std::vector<double> sample, double p);

struct EffortModel {
    double ie_mas = 0.0;
    double ie_con = 0.0;
    double ce_man = 0.0;
    double n = 0.0;
};

struct EffortResult {
    double te_con = 0.0;
    double te_mas = 0.0;
    std::optional<long long> n_breakeven;  // empty when unbounded
};

/// Total efforts after n layout changes and the breakeven change count.
/// Throws Error for negative parameters.
EffortResult effort_model(const EffortModel& model);

}  // namespace amfs

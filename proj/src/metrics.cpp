#include "amfs/metrics.hpp"

#include "amfs/json_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace amfs {

double MetricsReport::total_throughput() const
{
    double sum = 0.0;
    for (const auto& [id, r] : relations) sum += r.throughput;
    return sum;
}

double percentile_nearest_rank(std::vector<double> sample, double p)
{
    if (sample.empty()) return 0.0;
    std::sort(sample.begin(), sample.end());
    auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sample.size())));
    rank = std::clamp<std::size_t>(rank, 1, sample.size());
    return sample[rank - 1];
}

void IncrementalMetrics::declare_relation(const RelationId& r) { released_.try_emplace(r, 0); }
void IncrementalMetrics::declare_module(const ModuleId& m) { busy_.try_emplace(m); }

void IncrementalMetrics::on_release(TuId tu, const RelationId& r, SimTime)
{
    ++released_[r];
    released_ids_.insert(tu);
}

void IncrementalMetrics::on_blocked(TuId tu, SimTime t) { blocked_since_.try_emplace(tu, t); }

void IncrementalMetrics::on_scheduled(TuId tu, SimTime t)
{
    if (auto it = blocked_since_.find(tu); it != blocked_since_.end()) {
        blocked_intervals_.push_back({it->second, t});
        blocked_since_.erase(it);
    }
}

void IncrementalMetrics::on_enter(const ModuleId& m, SimTime t)
{
    auto& b = busy_[m];
    if (b.count++ == 0) b.since = t;
    ++b.traversals;
}

void IncrementalMetrics::on_exit(const ModuleId& m, SimTime t)
{
    auto& b = busy_[m];
    if (b.count <= 0) throw MalformedLog("exit from empty module '" + m + "'");
    if (--b.count == 0) b.intervals.push_back({b.since, t});
}

void IncrementalMetrics::on_delivered(TuId tu, const RelationId& r, SimTime release, SimTime t)
{
    if (!released_ids_.count(tu)) throw MalformedLog("delivery of unreleased TU " + std::to_string(tu));
    deliveries_[r].push_back({release, t});
}

MetricsReport IncrementalMetrics::report(SimTime horizon) const
{
    MetricsReport m;
    m.horizon = horizon;
    const double minutes = static_cast<double>(horizon) / 60000.0;
    auto clipped = [&](SimTime a, SimTime b) {
        return std::max<SimTime>(0, std::min(b, horizon) - std::min(std::max<SimTime>(a, 0), horizon));
    };

    for (const auto& [r, n] : released_) {
        RelationMetrics rm;
        rm.released = n;
        std::vector<double> times;
        if (auto it = deliveries_.find(r); it != deliveries_.end()) {
            for (auto [release, arrival] : it->second) {
                if (arrival <= horizon) times.push_back(ms_to_seconds(arrival - release));
                else ++m.delivered_after_horizon;
            }
        }
        rm.delivered = times.size();
        rm.throughput = minutes > 0 ? static_cast<double>(rm.delivered) / minutes : 0.0;
        if (!times.empty()) {
            rm.mean_process_time = std::accumulate(times.begin(), times.end(), 0.0) / static_cast<double>(times.size());
            rm.p95_process_time = percentile_nearest_rank(times, 0.95);
        }
        m.total_released += rm.released;
        m.total_delivered += rm.delivered;
        m.relations[r] = rm;
    }

    for (const auto& [id, b] : busy_) {
        SimTime busy = 0;
        for (auto [a, e] : b.intervals) busy += clipped(a, e);
        if (b.count > 0) busy += clipped(b.since, horizon);
        m.modules[id] = {horizon > 0 ? static_cast<double>(busy) / static_cast<double>(horizon) : 0.0, b.traversals};
    }

    SimTime blocked = 0;
    for (auto [a, e] : blocked_intervals_) {
        blocked += clipped(a, e);
        if (a <= horizon && e > horizon) ++m.blocked_at_horizon;
    }
    for (const auto& [tu, since] : blocked_since_) {
        blocked += clipped(since, horizon);
        if (since <= horizon) ++m.blocked_at_horizon;
    }
    m.total_blocked_time = ms_to_seconds(blocked);
    m.in_flight_at_horizon = m.total_released - m.total_delivered - m.blocked_at_horizon;
    return m;
}

MetricsReport compute_metrics(const EventLog& log, SimTime horizon)
{
    IncrementalMetrics acc;
    std::map<TuId, RelationId> relation_of;
    namespace k = record_kind;
    for (const auto& r : log.records()) {
        auto need_tu = [&]() -> TuId {
            if (!r.tu) throw MalformedLog("record " + std::to_string(r.seq) + " (" + r.kind + ") lacks a TU id");
            return *r.tu;
        };
        if (r.kind == k::relation_declared) {
            acc.declare_relation(r.relation);
        } else if (r.kind == k::module_registered) {
            acc.declare_module(r.module);
        } else if (r.kind == k::tu_release) {
            relation_of[need_tu()] = r.relation;
            acc.on_release(*r.tu, r.relation, r.t);
        } else if (r.kind == k::tu_blocked) {
            acc.on_blocked(need_tu(), r.t);
        } else if (r.kind == k::tu_scheduled) {
            acc.on_scheduled(need_tu(), r.t);
        } else if (r.kind == k::tu_enter) {
            need_tu();
            acc.on_enter(r.module, r.t);
        } else if (r.kind == k::tu_exit) {
            need_tu();
            acc.on_exit(r.module, r.t);
        } else if (r.kind == k::tu_delivered) {
            auto tu = need_tu();
            auto it = relation_of.find(tu);
            if (it == relation_of.end() || !r.value)
                throw MalformedLog("record " + std::to_string(r.seq) + ": delivery of unknown TU " + std::to_string(tu));
            acc.on_delivered(tu, it->second, *r.value, r.t);
        }
    }
    return acc.report(horizon);
}

std::string metrics_table(const MetricsReport& m)
{
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s %9s %9s %12s %12s %12s\n", "relation", "released", "delivered",
                  "tu_per_min", "mean_s", "p95_s");
    out += buf;
    for (const auto& [id, r] : m.relations) {
        std::snprintf(buf, sizeof buf, "%-16s %9zu %9zu %12.3f %12.3f %12.3f\n", id.c_str(), r.released, r.delivered,
                      r.throughput, r.mean_process_time, r.p95_process_time);
        out += buf;
    }
    out += '\n';
    std::snprintf(buf, sizeof buf, "%-16s %12s %11s\n", "module", "utilization", "traversals");
    out += buf;
    for (const auto& [id, mm] : m.modules) {
        std::snprintf(buf, sizeof buf, "%-16s %12.4f %11zu\n", id.c_str(), mm.utilization, mm.traversals);
        out += buf;
    }
    out += '\n';
    std::snprintf(buf, sizeof buf,
                  "released %zu, delivered %zu (+%zu after horizon), in flight %zu, blocked %zu, blocked time %.3f s\n",
                  m.total_released, m.total_delivered, m.delivered_after_horizon, m.in_flight_at_horizon,
                  m.blocked_at_horizon, m.total_blocked_time);
    out += buf;
    return out;
}

std::string metrics_json(const MetricsReport& m)
{
    Json rel = Json::object();
    for (const auto& [id, r] : m.relations)
        rel[id] = {{"released", r.released},
                   {"delivered", r.delivered},
                   {"throughput", r.throughput},
                   {"mean_process_time", r.mean_process_time},
                   {"p95_process_time", r.p95_process_time}};
    Json mod = Json::object();
    for (const auto& [id, x] : m.modules) mod[id] = {{"utilization", x.utilization}, {"traversals", x.traversals}};
    Json j = {{"horizon", ms_to_seconds(m.horizon)},
              {"relations", rel},
              {"modules", mod},
              {"total_released", m.total_released},
              {"total_delivered", m.total_delivered},
              {"delivered_after_horizon", m.delivered_after_horizon},
              {"in_flight_at_horizon", m.in_flight_at_horizon},
              {"blocked_at_horizon", m.blocked_at_horizon},
              {"total_blocked_time", m.total_blocked_time},
              {"total_throughput", m.total_throughput()}};
    return j.dump(2);
}

EffortResult effort_model(const EffortModel& model)
{
    if (model.ie_mas < 0 || model.ie_con < 0 || model.ce_man < 0 || model.n < 0)
        throw Error("effort model parameters must be nonnegative");
    EffortResult r;
    r.te_con = model.ie_con + model.n * model.ce_man;
    r.te_mas = model.ie_mas;
    if (model.ie_con >= model.ie_mas) {
        r.n_breakeven = 0;
    } else if (model.ce_man > 0) {
        auto reaches = [&](long long n) { return model.ie_con + static_cast<double>(n) * model.ce_man >= model.ie_mas; };
        auto n = static_cast<long long>(std::ceil((model.ie_mas - model.ie_con) / model.ce_man));
        while (n > 0 && reaches(n - 1)) --n;
        while (!reaches(n)) ++n;
        r.n_breakeven = n;
    }
    return r;
}

}  // namespace amfs

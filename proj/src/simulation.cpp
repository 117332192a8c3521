#include "amfs/simulation.hpp"

#include "amfs/arrivals.hpp"

#include <algorithm>

namespace amfs {

namespace k = record_kind;

std::string_view to_string(TuState s)
{
    switch (s) {
    case TuState::waiting: return "waiting";
    case TuState::scheduled: return "scheduled";
    case TuState::in_transit: return "in_transit";
    case TuState::delivered: return "delivered";
    case TuState::blocked: return "blocked";
    }
    return "?";
}

namespace {

const std::string kCoord(kCoordinatorAddress);
const std::string kAll(kBroadcastAddress);

std::string join_path(const std::vector<ModuleId>& path)
{
    std::string s;
    for (const auto& m : path) s += (s.empty() ? "" : ">") + m;
    return s;
}

}  // namespace

Simulation::Simulation(ScenarioConfig config)
    : config_(std::move(config)), strategy_(config_.strategy), rng_(config_.seed ^ fnv1a("baseline_occupancy"))
{
    validate_scenario(config_);
    coordinator_.tolerance = config_.parameters.tolerance;

    auto s = record(k::strategy);
    s.detail = std::string(to_string(strategy_));
    log_.append(std::move(s));
    for (const auto& rel : config_.relations) {
        relations_[rel.relation_id] = rel;
        coordinator_.routes.relations[rel.relation_id] = rel;
        queues_[rel.relation_id];
        metrics_.declare_relation(rel.relation_id);
        auto r = record(k::relation_declared);
        r.relation = rel.relation_id;
        r.from = rel.source;
        r.to = rel.sink;
        log_.append(std::move(r));
    }
    for (const auto& m : config_.modules) create_agent(m.descriptor, m.placement, m.descriptor_ref);

    if (!agents_.empty()) {
        std::set<ModuleId> ids;
        for (const auto& [id, a] : agents_) ids.insert(id);
        coordinator_.active = true;
        coordinator_.host = elect_coordinator(ids);
        auto r = record(k::coordinator_elected);
        r.module = coordinator_.host;
        log_.append(std::move(r));
    }
    for (const auto& [id, a] : agents_) request_registration(id);
    for (const auto& [id, rel] : relations_) generate_releases(rel, 0);
    for (std::size_t i = 0; i < config_.script.size(); ++i) push(config_.script[i].at, reconfig, ScriptStep{i});
    if (config_.parameters.heartbeat_period <= config_.horizon)
        push(config_.parameters.heartbeat_period, heartbeat, Heartbeat{});
}

// ---------------------------------------------------------------------------
// plumbing

void Simulation::push(SimTime t, int phase, Body body) { queue_.push(Event{t, phase, next_seq_++, std::move(body)}); }

LogRecord Simulation::record(std::string_view kind) const
{
    LogRecord r;
    r.t = now_;
    r.kind = std::string(kind);
    return r;
}

void Simulation::diagnose(const std::string& where, const std::string& what)
{
    diagnostics_.push_back("t=" + std::to_string(now_) + " " + where + ": " + what);
    auto r = record(k::diagnostic);
    r.module = where;
    r.reason = what;
    log_.append(std::move(r));
}

AgentState& Simulation::agent(const ModuleId& id)
{
    auto it = agents_.find(id);
    if (it == agents_.end()) throw ProtocolViolation("no agent for module '" + id + "'");
    return it->second;
}

void Simulation::send(AgentMessage m)
{
    m.message_id = next_message_id_++;
    log_.append(message_record(now_, m));
    push(now_ + config_.parameters.planning_latency, planning, DeliverMessage{std::move(m)});
}

std::optional<ModuleId> Simulation::active_coordinator() const
{
    if (!coordinator_.active) return std::nullopt;
    return coordinator_.host;
}

std::optional<SimTime> Simulation::next_event_time() const
{
    if (queue_.empty()) return std::nullopt;
    return queue_.top().t;
}

std::set<ModuleId> Simulation::occupied_modules() const
{
    std::set<ModuleId> out;
    for (const auto& [id, a] : agents_)
        if (!a.system.occupants.empty()) out.insert(id);
    return out;
}

// ---------------------------------------------------------------------------
// event loop

bool Simulation::step_instant()
{
    if (halted_ || queue_.empty()) return false;
    const SimTime t = queue_.top().t;
    if (t > config_.horizon && !horizon_counts_) capture_horizon();
    now_ = t;
    while (!halted_ && !queue_.empty() && queue_.top().t == t) {
        const int phase = queue_.top().phase;
        std::vector<Event> batch;
        while (!queue_.empty() && queue_.top().t == t && queue_.top().phase == phase) {
            batch.push_back(queue_.top());
            queue_.pop();
        }
        handle_batch(phase, batch);
        if (layout_pending_ && !halted_) handle_layout_change({});
    }
    return true;
}

void Simulation::run_until(SimTime t)
{
    while (!halted_ && !queue_.empty() && queue_.top().t <= t) step_instant();
    if (t >= config_.horizon && !horizon_counts_ && (queue_.empty() || queue_.top().t > config_.horizon))
        capture_horizon();
    now_ = std::max(now_, t);
}

void Simulation::run_to_completion()
{
    const SimTime limit = config_.horizon + config_.parameters.scheduling_horizon + 3'600'000;
    while (!halted_ && step_instant()) {
        if (now_ > limit) {
            diagnose("simulator", "transports did not drain");
            halted_ = true;
        }
    }
    if (!horizon_counts_) capture_horizon();
}

void Simulation::capture_horizon()
{
    HorizonCounts c;
    for (const auto& [id, tu] : tus_) {
        ++c.released;
        switch (tu.state) {
        case TuState::delivered:
            if (*tu.arrival_time <= config_.horizon) ++c.delivered;
            else ++c.in_flight;
            break;
        case TuState::blocked: ++c.blocked; break;
        case TuState::waiting: ++c.waiting; break;
        default: ++c.in_flight;
        }
    }
    horizon_counts_ = c;
}

void Simulation::handle_batch(int phase, std::vector<Event>& batch)
{
    if (phase == handover) {
        std::vector<TuId> tus;
        for (auto& e : batch) tus.push_back(std::get<Boundary>(e.body).tu);
        process_boundaries(std::move(tus));
        try_complete_removals();
        return;
    }
    for (auto& e : batch) {
        if (halted_) return;
        try {
            if (auto* d = std::get_if<DeliverMessage>(&e.body)) {
                deliver_message(std::move(d->message));
            } else if (auto* s = std::get_if<ScriptStep>(&e.body)) {
                execute_reconfiguration(config_.script[s->index]);
            } else if (auto* r = std::get_if<Release>(&e.body)) {
                on_release(*r);
            } else if (std::holds_alternative<Retry>(e.body)) {
                retry_pending_ = false;
                process_all_queues();
            } else if (std::holds_alternative<Heartbeat>(e.body)) {
                on_heartbeat();
            }
        } catch (const ProtocolViolation& ex) {
            diagnose("protocol", ex.what());
            halted_ = true;
        } catch (const Error& ex) {
            diagnose("simulator", ex.what());
        }
    }
    if (phase == planning && !halted_) step_inboxes();
}

void Simulation::deliver_message(AgentMessage m)
{
    if (m.receiver == kCoord) {
        coordinator_receive(m);
    } else if (m.receiver == kAll) {
        for (auto& [id, a] : agents_)
            if (id != m.sender) deliver(a, m);
    } else if (auto it = agents_.find(m.receiver); it != agents_.end()) {
        deliver(it->second, std::move(m));
    }
}

void Simulation::step_inboxes()
{
    for (auto& [id, a] : agents_) {
        if (a.inbox.empty()) continue;
        try {
            for (auto& out : step_agent(a, now_)) send(std::move(out));
        } catch (const ProtocolViolation& ex) {
            diagnose(id, ex.what());
            halted_ = true;
            return;
        }
    }
}

void Simulation::coordinator_receive(const AgentMessage& m)
{
    if (!coordinator_.active) {
        if (std::holds_alternative<RegistrationPayload>(m.payload)) registrations_in_flight_.erase(m.sender);
        return;
    }
    if (const auto* p = std::get_if<RegistrationPayload>(&m.payload)) {
        if (m.performative != Performative::request) return;
        registrations_in_flight_.erase(p->module_id);
        auto stored = module_store_.find(p->module_id);
        if (stored == module_store_.end() || !agents_.count(p->module_id)) return;
        try {
            auto res = register_module(coordinator_, stored->second.descriptor, p->placement, now_, p->descriptor_ref);
            coordinator_ = std::move(res.state);
            auto r = record(k::module_registered);
            r.module = p->module_id;
            log_.append(std::move(r));
            metrics_.declare_module(p->module_id);
            for (auto& out : res.outgoing) send(std::move(out));
            layout_dirty_.insert(res.affected.begin(), res.affected.end());
            layout_pending_ = true;
            ++changes_;
        } catch (const DuplicateRegistration&) {
            send(make_reply(m, kCoord, Performative::agree, *p));
        } catch (const Error& ex) {
            send(make_reply(m, kCoord, Performative::refuse, *p, ex.what()));
            diagnose(p->module_id, std::string("registration refused: ") + ex.what());
        }
        return;
    }
    if (m.performative == Performative::refuse || m.performative == Performative::failure)
        diagnose(m.sender, std::string(payload_kind(m.payload)) + " refused: " + m.reason);
}

// ---------------------------------------------------------------------------
// transports

void Simulation::process_boundaries(std::vector<TuId> batch)
{
    std::sort(batch.begin(), batch.end());
    std::map<TuId, std::string> refusals;
    bool progress = true;
    while (!batch.empty() && progress && !halted_) {
        progress = false;
        std::vector<TuId> refused;
        for (TuId id : batch) {
            try {
                perform_boundary(tus_.at(id));
                progress = true;
            } catch (const HandoverRefused& ex) {
                refused.push_back(id);
                refusals[id] = ex.reason();
            } catch (const ProtocolViolation& ex) {
                diagnose("protocol", ex.what());
                halted_ = true;
                return;
            }
        }
        batch = std::move(refused);
    }
    for (TuId id : batch) {
        diagnose("TU " + std::to_string(id), "handover refused: " + refusals[id]);
        push(now_ + 1, handover, Boundary{id});
    }
}

void Simulation::perform_boundary(TransportUnit& tu)
{
    const Schedule& s = *tu.schedule;
    const std::size_t n = s.hops.size();
    const std::size_t i = tu.next_boundary;

    auto log_tu = [&](std::string_view kind, const ScheduledHop& h) {
        auto r = record(kind);
        r.tu = tu.tu_id;
        r.relation = tu.relation_id;
        r.module = h.module_id;
        r.from = h.from;
        r.to = h.to;
        log_.append(std::move(r));
    };

    if (i == 0) {
        accept_entry(agent(s.hops[0].module_id), tu.tu_id, now_);
        log_tu(k::tu_enter, s.hops[0]);
        metrics_.on_enter(s.hops[0].module_id, now_);
        tu.state = TuState::in_transit;
        tu.module = s.hops[0].module_id;
    } else if (i < n) {
        const auto& prev = s.hops[i - 1];
        const auto& next = s.hops[i];
        auto& sender = agent(prev.module_id);
        auto& receiver = agent(next.module_id);
        auto sync = make_message(sender.module_id, receiver.module_id, Performative::request,
                                 "handover:" + std::to_string(tu.tu_id) + ":" + std::to_string(i),
                                 HandoverSyncPayload{tu.tu_id, sender.module_id, next.from});
        sync.message_id = next_message_id_++;
        log_.append(message_record(now_, sync));
        auto replies = dispatch_in_place(receiver, sync, now_);
        bool confirmed = false;
        for (auto& reply : replies) {
            reply.message_id = next_message_id_++;
            log_.append(message_record(now_, reply));
            confirmed = confirmed || reply.performative == Performative::confirm;
        }
        if (!confirmed) throw HandoverRefused("missing_reservation", "handover not confirmed");
        handover_in_place(sender, receiver, tu.tu_id, now_, coordinator_.topology);
        log_tu(k::tu_exit, prev);
        metrics_.on_exit(prev.module_id, now_);
        log_tu(k::tu_enter, next);
        metrics_.on_enter(next.module_id, now_);
        tu.module = next.module_id;
    } else {
        const auto& last = s.hops[n - 1];
        release_exit(agent(last.module_id), tu.tu_id, now_);
        log_tu(k::tu_exit, last);
        metrics_.on_exit(last.module_id, now_);
        auto r = record(k::tu_delivered);
        r.tu = tu.tu_id;
        r.relation = tu.relation_id;
        r.module = last.module_id;
        if (tu.route_id) r.route = *tu.route_id;
        r.value = tu.release_time;
        log_.append(std::move(r));
        metrics_.on_delivered(tu.tu_id, tu.relation_id, tu.release_time, now_);
        release_schedule(book_, tu.tu_id);
        tu.state = TuState::delivered;
        tu.arrival_time = now_;
        tu.module.reset();
        if (tu.route_id) {
            auto& u = route_usage_[*tu.route_id];
            u.recent_arrivals.push_back(now_);
            while (!u.recent_arrivals.empty() && u.recent_arrivals.front() <= now_ - 60'000) u.recent_arrivals.pop_front();
            ++u.deliveries;
            u.total_duration += ms_to_seconds(now_ - tu.release_time);
        }
    }
    ++changes_;
    tu.next_boundary = i + 1;
    if (i < n) push(std::max(s.hops[i].end, now_ + 1), handover, Boundary{tu.tu_id});
}

void Simulation::on_release(const Release& rel)
{
    if (generation_[rel.relation] != rel.generation || now_ >= config_.horizon) return;
    TransportUnit tu;
    tu.tu_id = next_tu_id_++;
    tu.relation_id = rel.relation;
    tu.release_time = now_;
    auto r = record(k::tu_release);
    r.tu = tu.tu_id;
    r.relation = rel.relation;
    log_.append(std::move(r));
    metrics_.on_release(tu.tu_id, rel.relation, now_);
    queues_[rel.relation].push_back(tu.tu_id);
    tus_.emplace(tu.tu_id, std::move(tu));
    ++changes_;
    process_queue(rel.relation);
}

void Simulation::generate_releases(const MaterialFlowRelation& r, SimTime from)
{
    if (from >= config_.horizon) return;
    auto gen = generation_[r.relation_id];
    for (SimTime t : generate_arrivals(r, config_.horizon - from, config_.seed ^ static_cast<std::uint64_t>(from)))
        push(from + t, release, Release{r.relation_id, gen});
}

void Simulation::process_all_queues()
{
    for (const auto& [rel, q] : queues_) process_queue(rel);
}

void Simulation::process_queue(const RelationId& relation)
{
    if (now_ >= config_.horizon) return;
    auto& q = queues_[relation];
    while (!q.empty()) {
        if (!try_schedule(tus_.at(q.front()))) {
            ensure_retry();
            return;
        }
        q.pop_front();
    }
}

void Simulation::ensure_retry()
{
    SimTime at = now_ + config_.parameters.retry_interval;
    if (retry_pending_ || at >= config_.horizon) return;
    retry_pending_ = true;
    push(at, release, Retry{});
}

bool Simulation::try_schedule(TransportUnit& tu)
{
    auto block = [&](const std::string& reason) {
        if (tu.state != TuState::blocked || tu.blocked_reason != reason) {
            auto r = record(k::tu_blocked);
            r.tu = tu.tu_id;
            r.relation = tu.relation_id;
            r.reason = reason;
            log_.append(std::move(r));
            ++changes_;
        }
        if (tu.state != TuState::blocked) metrics_.on_blocked(tu.tu_id, now_);
        tu.state = TuState::blocked;
        tu.blocked_reason = reason;
        return false;
    };

    if (!coordinator_.active) return block("no_coordinator");
    const auto& rel = relations_.at(tu.relation_id);
    std::string reason;
    auto path = select_path(rel, reason);
    if (!path) return block(reason);

    ScheduleOptions opts;
    opts.horizon = config_.parameters.scheduling_horizon;
    opts.earliest_start = now_ + std::max<SimTime>(2 * config_.parameters.planning_latency, 1);
    opts.sequence_key = tu.relation_id;
    Schedule sched;
    try {
        sched = schedule_transport(std::span<const RouteHop>(path->first), tu.tu_id, now_, book_, opts);
    } catch (const HorizonExceeded&) {
        return block("horizon_exceeded");
    }

    metrics_.on_scheduled(tu.tu_id, now_);
    tu.state = TuState::scheduled;
    tu.blocked_reason.clear();
    if (!path->second.empty()) tu.route_id = path->second;
    auto r = record(k::tu_scheduled);
    r.tu = tu.tu_id;
    r.relation = tu.relation_id;
    r.route = path->second;
    r.value = sched.arrival();
    std::vector<ModuleId> modules;
    for (const auto& h : sched.hops) modules.push_back(h.module_id);
    r.detail = join_path(modules);
    log_.append(std::move(r));

    for (const auto& h : sched.hops)
        send(make_message(kCoord, h.module_id, Performative::request, "tu:" + std::to_string(tu.tu_id),
                          ReservationRequestPayload{tu.tu_id, tu.relation_id, h.from, h.to, h.start, h.end}));
    tu.schedule = std::move(sched);
    tu.next_boundary = 0;
    push(tu.schedule->hops.front().start, handover, Boundary{tu.tu_id});
    ++changes_;
    return true;
}

std::optional<std::pair<std::vector<RouteHop>, std::string>> Simulation::select_path(const MaterialFlowRelation& r,
                                                                                     std::string& reason)
{
    switch (strategy_) {
    case RoutingStrategy::ssr: {
        if (const auto* route = coordinator_.routes.active_route(r.relation_id))
            return std::pair{route->hops, route->route_id};
        auto it = last_rejection_.find(r.relation_id);
        reason = it == last_rejection_.end() ? "no_route" : it->second;
        return std::nullopt;
    }
    case RoutingStrategy::static_fixed: {
        auto it = fixed_routes_.find(r.relation_id);
        if (it == fixed_routes_.end()) {
            reason = "no_route";
            return std::nullopt;
        }
        return std::pair{it->second.hops, it->second.route_id};
    }
    case RoutingStrategy::baseline_occupancy: {
        auto hops = baseline_path(r);
        if (!hops) {
            reason = "no_route";
            return std::nullopt;
        }
        return std::pair{std::move(*hops), std::string{}};
    }
    }
    return std::nullopt;
}

std::optional<std::vector<RouteHop>> Simulation::baseline_path(const MaterialFlowRelation& rel)
{
    auto g = full_subgraph(coordinator_.topology);
    if (!g.modules.count(rel.source) || !g.modules.count(rel.sink)) return std::nullopt;
    std::map<ModuleId, std::vector<ModuleId>> adj;
    for (const auto& [a, b] : g.edges()) adj[a].push_back(b);

    auto reaches = [&](const ModuleId& from, const std::set<ModuleId>& avoid) {
        std::set<ModuleId> seen = avoid;
        std::vector<ModuleId> stack{from};
        seen.insert(from);
        while (!stack.empty()) {
            auto v = stack.back();
            stack.pop_back();
            if (v == rel.sink) return true;
            for (const auto& w : adj[v])
                if (seen.insert(w).second) stack.push_back(w);
        }
        return false;
    };

    auto fallback = [&]() -> std::optional<std::vector<RouteHop>> {
        if (auto p = shortest_process_time_path(g, rel.source, rel.sink)) return p->hops;
        return std::nullopt;
    };

    std::vector<ModuleId> path{rel.source};
    std::set<ModuleId> visited{rel.source};
    while (path.back() != rel.sink) {
        std::vector<ModuleId> candidates;
        for (const auto& v : adj[path.back()]) {
            if (visited.count(v)) continue;
            if (v == rel.sink) {
                candidates = {v};
                break;
            }
            if (reaches(v, visited)) candidates.push_back(v);
        }
        if (candidates.empty()) return fallback();
        std::size_t best = SIZE_MAX;
        std::vector<ModuleId> tied;
        for (const auto& v : candidates) {
            auto it = agents_.find(v);
            std::size_t occ = it == agents_.end() ? 0 : it->second.system.occupants.size();
            if (occ < best) {
                best = occ;
                tied.clear();
            }
            if (occ == best) tied.push_back(v);
        }
        const auto& pick = tied.size() == 1 ? tied.front() : tied[rng_() % tied.size()];
        path.push_back(pick);
        visited.insert(pick);
    }
    if (auto real = realize_path(g, path)) return real->hops;
    return fallback();
}

// ---------------------------------------------------------------------------
// configuration level

void Simulation::create_agent(const ModuleDescriptor& d, const Placement& p, const std::string& ref)
{
    ModuleDescriptor inst = d;
    inst.module_id = p.module_id;
    auto a = make_agent(inst);
    a.configuration.phase = RegistrationPhase::registering;
    agents_[p.module_id] = std::move(a);
    module_store_[p.module_id] = {std::move(inst), p, ref};
    ++changes_;
}

void Simulation::request_registration(const ModuleId& id)
{
    const auto& s = module_store_.at(id);
    registrations_in_flight_.insert(id);
    send(make_message(id, kCoord, Performative::request, "register:" + id, RegistrationPayload{id, s.ref, s.placement}));
}

void Simulation::on_heartbeat()
{
    const SimTime period = config_.parameters.heartbeat_period;
    if (!coordinator_.active && killed_.count(coordinator_.host)) {
        const ModuleId host = coordinator_.host;
        const SimTime silence = config_.parameters.missed_heartbeats * period - config_.parameters.planning_latency;
        bool suspected = false;
        for (const auto& [id, a] : agents_) {
            if (id == host || killed_.count(id)) continue;
            SimTime last = elected_at_;
            if (auto it = a.configuration.last_heard.find(host); it != a.configuration.last_heard.end())
                last = std::max(last, it->second);
            if (now_ - last >= silence) suspected = true;
        }
        if (suspected) failover();
    }

    for (const auto& [id, a] : agents_) {
        if (killed_.count(id)) continue;
        if (a.configuration.phase == RegistrationPhase::registering && !registrations_in_flight_.count(id)) {
            request_registration(id);
            continue;
        }
        if (a.configuration.phase != RegistrationPhase::registered &&
            a.configuration.phase != RegistrationPhase::deregistering)
            continue;
        OperationalState state = OperationalState::operational;
        if (const auto* e = coordinator_.topology.find(id)) state = e->status.operational_state;
        send(make_message(id, kAll, Performative::inform, "heartbeat:" + id,
                          StatusReportPayload{id, state, workload(a)}));
    }
    try_complete_removals();
    if (now_ + period <= config_.horizon) push(now_ + period, heartbeat, Heartbeat{});
}

void Simulation::kill_coordinator()
{
    if (!coordinator_.active) throw Error("kill_coordinator: no active coordinator");
    const ModuleId host = coordinator_.host;
    killed_.insert(host);
    coordinator_.active = false;
    FailoverRecord f;
    f.failed = host;
    f.killed_at = now_;
    f.registry_at_kill = coordinator_.registry;
    f.routes_at_kill = coordinator_.routes;
    failover_ = std::move(f);
    auto r = record(k::coordinator_failed);
    r.module = host;
    log_.append(std::move(r));
    ++changes_;
}

void Simulation::failover()
{
    const ModuleId failed = coordinator_.host;
    std::set<ModuleId> alive;
    for (const auto& [id, a] : agents_)
        if (!killed_.count(id) && !removing_.count(id) && a.configuration.phase == RegistrationPhase::registered)
            alive.insert(id);
    ModuleId next;
    try {
        next = elect_coordinator(alive, failed);
    } catch (const EmptySystem& ex) {
        diagnose("coordinator", ex.what());
        return;
    }
    coordinator_.host = next;
    coordinator_.active = true;
    elected_at_ = now_;
    if (failover_ && failover_->failed == failed) {
        failover_->successor = next;
        failover_->elected_at = now_;
        failover_->registry_at_election = coordinator_.registry;
        failover_->routes_at_election = coordinator_.routes;
    }
    auto r = record(k::coordinator_elected);
    r.module = next;
    r.detail = "failed:" + failed;
    log_.append(std::move(r));
    ++changes_;

    if (killed_.count(failed)) begin_removal(failed);
    auto deferred = deferred_removals_;
    for (const auto& m : deferred) begin_removal(m);
    process_all_queues();
}

void Simulation::begin_removal(const ModuleId& m)
{
    if (!coordinator_.active) {
        deferred_removals_.insert(m);
        return;
    }
    deferred_removals_.erase(m);
    if (removing_.count(m)) return;
    if (!coordinator_.registry.entries.count(m) && !coordinator_.topology.modules.count(m))
        throw UnknownModuleError("unknown module '" + m + "'");

    if (m == coordinator_.host) {
        std::set<ModuleId> alive;
        for (const auto& [id, a] : agents_)
            if (!killed_.count(id) && !removing_.count(id) && a.configuration.phase == RegistrationPhase::registered)
                alive.insert(id);
        coordinator_.host = elect_coordinator(alive, m);
        elected_at_ = now_;
        auto r = record(k::coordinator_elected);
        r.module = coordinator_.host;
        r.detail = "handover:" + m;
        log_.append(std::move(r));
    }
    if (coordinator_.topology.modules.count(m))
        coordinator_.topology = with_status(coordinator_.topology, m, OperationalState::removed);
    if (auto it = coordinator_.registry.entries.find(m); it != coordinator_.registry.entries.end())
        it->second.alive = false;
    if (auto it = agents_.find(m); it != agents_.end())
        it->second.configuration.phase = RegistrationPhase::deregistering;
    removing_.insert(m);
    auto r = record(k::module_removed);
    r.module = m;
    log_.append(std::move(r));
    ++changes_;
    handle_layout_change({m});
    try_complete_removals();
}

void Simulation::try_complete_removals()
{
    if (!coordinator_.active || removing_.empty()) return;
    auto pending = removing_;
    for (const auto& m : pending) {
        auto it = agents_.find(m);
        bool busy = it != agents_.end() &&
                    (!it->second.system.occupants.empty() || !it->second.material_flow.reservations.empty());
        if (busy || book_.has_future_bookings(m, now_)) continue;
        try {
            auto res = deregister_module(coordinator_, m, now_, occupied_modules());
            coordinator_ = std::move(res.state);
            removing_.erase(m);
            if (it != agents_.end()) agents_.erase(it);
            auto r = record(k::module_deregistered);
            r.module = m;
            log_.append(std::move(r));
            for (auto& out : res.outgoing) send(std::move(out));
            ++changes_;
            handle_layout_change(res.affected);
        } catch (const Error& ex) {
            diagnose(m, std::string("deregistration failed: ") + ex.what());
            removing_.erase(m);
        }
    }
}

void Simulation::handle_layout_change(const std::set<ModuleId>& hint)
{
    std::set<ModuleId> h = hint;
    h.insert(layout_dirty_.begin(), layout_dirty_.end());
    layout_dirty_.clear();
    layout_pending_ = false;
    if (!coordinator_.active) return;
    if (strategy_ == RoutingStrategy::ssr) {
        RenegotiationPolicy policy{config_.parameters.reclaim_fraction};
        apply_outcome(renegotiate(coordinator_.routes, coordinator_.topology, LayoutChanged{h}, policy));
    } else if (strategy_ == RoutingStrategy::static_fixed) {
        refresh_fixed_routes();
    }
    process_all_queues();
}

void Simulation::apply_outcome(const RenegotiationOutcome& o)
{
    coordinator_.routes = o.route_set;
    auto proposals = [&](const SemiStaticRoute& route, Performative perf) {
        for (std::size_t i = 0; i < route.path.size(); ++i) {
            const auto& m = route.path[i];
            if (!agents_.count(m)) continue;
            RouteProposalPayload p{route.route_id, route.relation_id, route.predecessor(m), route.successor(m),
                                   route.reserved_capacity, route.status};
            send(make_message(kCoord, m, perf, "route:" + route.route_id, std::move(p)));
        }
    };
    for (const auto& id : o.revoked) {
        const auto& route = coordinator_.routes.routes.at(id);
        auto r = record(k::route_revoked);
        r.route = id;
        r.relation = route.relation_id;
        log_.append(std::move(r));
        proposals(route, Performative::inform);
    }
    for (const auto& id : o.installed) {
        const auto& route = coordinator_.routes.routes.at(id);
        auto r = record(k::route_installed);
        r.route = id;
        r.relation = route.relation_id;
        r.detail = join_path(route.path);
        log_.append(std::move(r));
        last_rejection_.erase(route.relation_id);
        proposals(route, Performative::request);
    }
    for (const auto& [rel, why] : o.rejected) {
        auto r = record(k::route_rejected);
        r.relation = rel;
        r.reason = why;
        log_.append(std::move(r));
        last_rejection_[rel] = why;
    }
    ++changes_;
}

void Simulation::refresh_fixed_routes()
{
    auto g = full_subgraph(coordinator_.topology);
    for (const auto& [id, rel] : relations_) {
        auto it = fixed_routes_.find(id);
        if (it != fixed_routes_.end()) {
            if (route_valid(it->second, coordinator_.topology)) continue;
            auto r = record(k::route_revoked);
            r.route = it->second.route_id;
            r.relation = id;
            log_.append(std::move(r));
            fixed_routes_.erase(it);
        }
        std::optional<PathResult> p;
        std::string why = "no_path";
        try {
            p = shortest_process_time_path(g, rel.source, rel.sink);
        } catch (const UnknownModuleError&) {
            why = g.modules.count(rel.source) ? "sink_absent" : "source_absent";
        }
        if (!p) {
            auto r = record(k::route_rejected);
            r.relation = id;
            r.reason = why;
            log_.append(std::move(r));
            continue;
        }
        SemiStaticRoute route{"fixed-" + std::to_string(next_fixed_number_++), id, p->path, p->hops,
                              rel.required_throughput, ms_to_seconds(p->cost), RouteStatus::active};
        auto r = record(k::route_installed);
        r.route = route.route_id;
        r.relation = id;
        r.detail = join_path(route.path);
        log_.append(std::move(r));
        fixed_routes_[id] = std::move(route);
    }
    ++changes_;
}

void Simulation::change_demand(const RelationId& relation, double throughput)
{
    auto it = relations_.find(relation);
    if (it == relations_.end()) throw Error("unknown relation '" + relation + "'");
    it->second.required_throughput = throughput;
    if (strategy_ == RoutingStrategy::ssr && coordinator_.active) {
        RenegotiationPolicy policy{config_.parameters.reclaim_fraction};
        apply_outcome(renegotiate(coordinator_.routes, coordinator_.topology, DemandChanged{relation, throughput}, policy));
    } else {
        coordinator_.routes.relations[relation].required_throughput = throughput;
    }
    ++generation_[relation];
    generate_releases(it->second, now_);
    process_queue(relation);
}

// ---------------------------------------------------------------------------
// commands

void Simulation::execute_reconfiguration(const ReconfigurationEvent& e)
{
    auto r = record(k::reconfiguration);
    r.reason = std::string(to_string(e.kind));
    r.module = e.module_id;
    r.relation = e.relation_id;
    log_.append(std::move(r));
    ++changes_;
    switch (e.kind) {
    case ReconfigurationKind::add_module:
        if (agents_.count(e.module_id)) throw Error("add_module: module '" + e.module_id + "' already present");
        create_agent(e.descriptor, e.placement, e.descriptor_ref);
        request_registration(e.module_id);
        break;
    case ReconfigurationKind::remove_module: begin_removal(e.module_id); break;
    case ReconfigurationKind::kill_coordinator: kill_coordinator(); break;
    case ReconfigurationKind::demand_change: change_demand(e.relation_id, e.required_throughput); break;
    case ReconfigurationKind::fault:
    case ReconfigurationKind::repair: {
        if (!coordinator_.topology.modules.count(e.module_id))
            throw UnknownModuleError("unknown module '" + e.module_id + "'");
        auto state = e.kind == ReconfigurationKind::fault ? OperationalState::fault : OperationalState::operational;
        coordinator_.topology = with_status(coordinator_.topology, e.module_id, state);
        auto s = record(k::module_status);
        s.module = e.module_id;
        s.detail = std::string(to_string(state));
        log_.append(std::move(s));
        handle_layout_change({e.module_id});
        break;
    }
    }
}

RenegotiationOutcome Simulation::override_route(const RouteId& route_id, const std::vector<ModuleId>& path)
{
    auto o = renegotiate(coordinator_.routes, coordinator_.topology, OperatorOverride{route_id, path});
    auto r = record(k::reconfiguration);
    r.reason = "override_route";
    r.route = route_id;
    r.detail = join_path(path);
    log_.append(std::move(r));
    apply_outcome(o);
    process_all_queues();
    return o;
}

void Simulation::set_strategy(RoutingStrategy s)
{
    strategy_ = s;
    auto r = record(k::strategy);
    r.detail = std::string(to_string(s));
    log_.append(std::move(r));
    ++changes_;
    handle_layout_change({});
}

void Simulation::remove_module(const ModuleId& m)
{
    if (!agents_.count(m) && !coordinator_.topology.modules.count(m))
        throw UnknownModuleError("unknown module '" + m + "'");
    if (auto it = agents_.find(m); it != agents_.end() && !it->second.system.occupants.empty())
        throw ModuleOccupied("module occupied");
    auto r = record(k::reconfiguration);
    r.reason = "remove_module";
    r.module = m;
    log_.append(std::move(r));
    begin_removal(m);
}

RunResult run_scenario(const ScenarioConfig& config)
{
    Simulation sim(config);
    sim.run_to_completion();
    RunResult out;
    out.metrics = compute_metrics(sim.log(), config.horizon);
    out.incremental = sim.metrics().report(config.horizon);
    out.log = sim.log();
    out.diagnostics = sim.diagnostics();
    out.horizon_counts = sim.horizon_counts();
    return out;
}

Simulation& execute_reconfiguration(Simulation& sim, const ReconfigurationEvent& event)
{
    sim.execute_reconfiguration(event);
    return sim;
}

}  // namespace amfs

#include "amfs/gateway.hpp"

#include <algorithm>
#include <cmath>

namespace amfs {

std::string_view to_string(CommandKind k)
{
    switch (k) {
    case CommandKind::override_route: return "override_route";
    case CommandKind::add_module: return "add_module";
    case CommandKind::remove_module: return "remove_module";
    case CommandKind::set_strategy: return "set_strategy";
    case CommandKind::pause: return "pause";
    case CommandKind::step: return "step";
    case CommandKind::resume: return "resume";
    case CommandKind::set_rate: return "set_rate";
    }
    return "?";
}

std::optional<CommandKind> parse_command_kind(std::string_view s)
{
    for (auto k : {CommandKind::override_route, CommandKind::add_module, CommandKind::remove_module,
                   CommandKind::set_strategy, CommandKind::pause, CommandKind::step, CommandKind::resume,
                   CommandKind::set_rate})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

namespace {

constexpr SimTime kUsageWindow = 60'000;

RouteView route_view(const SemiStaticRoute& r, const Simulation& sim)
{
    RouteView v{r.route_id, r.relation_id, r.path, r.reserved_capacity, 0.0, std::nullopt, r.status};
    if (auto it = sim.route_usage().find(r.route_id); it != sim.route_usage().end()) {
        const auto& u = it->second;
        auto n = std::count_if(u.recent_arrivals.begin(), u.recent_arrivals.end(),
                               [&](SimTime t) { return t > sim.now() - kUsageWindow; });
        SimTime window = std::clamp<SimTime>(sim.now(), 1, kUsageWindow);
        v.used_capacity = static_cast<double>(n) * 60'000.0 / static_cast<double>(window);
        if (u.deliveries > 0) v.average_duration = u.total_duration / static_cast<double>(u.deliveries);
    }
    return v;
}

OrderView order_view(const TransportUnit& tu)
{
    OrderView o{tu.tu_id, tu.relation_id, tu.state, tu.route_id, std::nullopt};
    if (tu.schedule) o.scheduled_arrival = tu.schedule->arrival();
    return o;
}

template <typename T, typename Key>
std::map<std::string, const T*> index_by(const std::vector<T>& v, Key key)
{
    std::map<std::string, const T*> out;
    for (const auto& x : v) out[key(x)] = &x;
    return out;
}

}  // namespace

bool LayoutSnapshot::same_state(const LayoutSnapshot& o) const
{
    return revision == o.revision && modules == o.modules && connections == o.connections && routes == o.routes &&
           orders == o.orders && strategy == o.strategy;
}

bool Delta::empty() const
{
    return modules_changed.empty() && modules_removed.empty() && !connections && routes_changed.empty() &&
           routes_removed.empty() && orders_changed.empty() && !strategy;
}

LayoutSnapshot take_snapshot(const Simulation& sim)
{
    LayoutSnapshot s;
    const auto& topo = sim.coordinator().topology;
    s.revision = topo.revision;
    s.time = sim.now();
    s.strategy = std::string(to_string(sim.strategy()));
    auto coordinator = sim.active_coordinator();
    for (const auto& [id, e] : topo.modules) {
        ModuleView m{id, e.descriptor.footprint, e.placement, e.status.operational_state, 0.0,
                     coordinator && *coordinator == id, {}};
        if (auto a = sim.agents().find(id); a != sim.agents().end()) {
            m.workload = workload(a->second);
            for (const auto& [act, st] : a->second.system.actuators)
                if (st.running) m.running_actuators.push_back({act, st.direction});
        }
        s.modules.push_back(std::move(m));
    }
    s.connections.assign(topo.connections.begin(), topo.connections.end());
    for (const auto& [id, r] : sim.coordinator().routes.routes)
        if (r.status == RouteStatus::active) s.routes.push_back(route_view(r, sim));
    if (sim.strategy() == RoutingStrategy::static_fixed)
        for (const auto& [rel, r] : sim.fixed_routes()) s.routes.push_back(route_view(r, sim));
    for (const auto& [id, tu] : sim.tus())
        if (tu.state != TuState::delivered) s.orders.push_back(order_view(tu));
    return s;
}

Delta diff_snapshots(const LayoutSnapshot& before, const LayoutSnapshot& after, const Simulation& sim)
{
    Delta d;
    d.sequence = after.sequence;
    d.prev_sequence = before.sequence;
    d.revision = after.revision;
    d.time = after.time;

    auto old_modules = index_by(before.modules, [](const ModuleView& m) { return m.module_id; });
    auto new_modules = index_by(after.modules, [](const ModuleView& m) { return m.module_id; });
    for (const auto& [id, m] : new_modules)
        if (auto it = old_modules.find(id); it == old_modules.end() || !(*it->second == *m)) d.modules_changed.push_back(*m);
    for (const auto& [id, m] : old_modules)
        if (!new_modules.count(id)) d.modules_removed.push_back(id);

    if (before.connections != after.connections) d.connections = after.connections;

    auto old_routes = index_by(before.routes, [](const RouteView& r) { return r.route_id; });
    auto new_routes = index_by(after.routes, [](const RouteView& r) { return r.route_id; });
    for (const auto& [id, r] : new_routes)
        if (auto it = old_routes.find(id); it == old_routes.end() || !(*it->second == *r)) d.routes_changed.push_back(*r);
    for (const auto& [id, r] : old_routes)
        if (!new_routes.count(id)) d.routes_removed.push_back(id);

    std::map<TuId, const OrderView*> old_orders, new_orders;
    for (const auto& o : before.orders) old_orders[o.tu_id] = &o;
    for (const auto& o : after.orders) new_orders[o.tu_id] = &o;
    std::set<TuId> ids;
    for (const auto& [id, o] : old_orders) ids.insert(id);
    for (const auto& [id, o] : new_orders) ids.insert(id);
    for (TuId id : ids) {
        auto n = new_orders.find(id);
        if (n != new_orders.end()) {
            auto o = old_orders.find(id);
            if (o == old_orders.end() || !(*o->second == *n->second)) d.orders_changed.push_back(*n->second);
        } else if (auto tu = sim.tus().find(id); tu != sim.tus().end()) {
            d.orders_changed.push_back(order_view(tu->second));
        }
    }

    if (before.strategy != after.strategy) d.strategy = after.strategy;
    return d;
}

LayoutSnapshot apply_delta(LayoutSnapshot s, const Delta& d)
{
    s.sequence = d.sequence;
    s.revision = d.revision;
    s.time = d.time;

    auto upsert = [](auto& list, const auto& item, auto key) {
        auto it = std::find_if(list.begin(), list.end(), [&](const auto& x) { return key(x) == key(item); });
        if (it == list.end()) {
            it = std::find_if(list.begin(), list.end(), [&](const auto& x) { return key(item) < key(x); });
            list.insert(it, item);
        } else {
            *it = item;
        }
    };
    auto module_key = [](const ModuleView& m) { return m.module_id; };
    auto route_key = [](const RouteView& r) { return r.route_id; };
    auto order_key = [](const OrderView& o) { return o.tu_id; };

    for (const auto& m : d.modules_changed) upsert(s.modules, m, module_key);
    for (const auto& id : d.modules_removed)
        std::erase_if(s.modules, [&](const ModuleView& m) { return m.module_id == id; });
    if (d.connections) s.connections = *d.connections;
    for (const auto& r : d.routes_changed) upsert(s.routes, r, route_key);
    for (const auto& id : d.routes_removed)
        std::erase_if(s.routes, [&](const RouteView& r) { return r.route_id == id; });
    for (const auto& o : d.orders_changed) {
        if (o.state == TuState::delivered)
            std::erase_if(s.orders, [&](const OrderView& x) { return x.tu_id == o.tu_id; });
        else
            upsert(s.orders, o, order_key);
    }
    if (d.strategy) s.strategy = *d.strategy;
    return s;
}

// ---------------------------------------------------------------------------

Gateway::Gateway(Simulation& sim, std::filesystem::path base_dir, bool paused, double rate)
    : sim_(sim), base_dir_(std::move(base_dir)), paused_(paused), rate_(rate)
{
    last_ = take_snapshot(sim_);
    last_change_ = sim_.change_counter();
}

std::optional<Delta> Gateway::publish()
{
    auto next = take_snapshot(sim_);
    last_change_ = sim_.change_counter();
    next.sequence = last_.sequence + 1;
    auto d = diff_snapshots(last_, next, sim_);
    if (d.empty()) {
        last_.time = next.time;
        return std::nullopt;
    }
    last_ = std::move(next);
    for (auto& [id, sub] : subscribers_) {
        if (sub.dropped) continue;
        sub.buffer.push_back(d);
        if (sub.buffer.size() > kMaxBufferedDeltas) {
            sub.dropped = true;
            sub.buffer.clear();
        }
    }
    return d;
}

const LayoutSnapshot& Gateway::snapshot()
{
    publish();
    return last_;
}

Gateway::SubscriberId Gateway::subscribe()
{
    publish();
    auto id = next_subscriber_++;
    subscribers_[id];
    return id;
}

void Gateway::unsubscribe(SubscriberId id) { subscribers_.erase(id); }

std::vector<Delta> Gateway::drain(SubscriberId id)
{
    auto it = subscribers_.find(id);
    if (it == subscribers_.end()) return {};
    std::vector<Delta> out(std::make_move_iterator(it->second.buffer.begin()),
                           std::make_move_iterator(it->second.buffer.end()));
    it->second.buffer.clear();
    return out;
}

bool Gateway::dropped(SubscriberId id) const
{
    auto it = subscribers_.find(id);
    return it == subscribers_.end() || it->second.dropped;
}

void Gateway::advance_wall(double wall_seconds)
{
    if (paused_ || sim_.halted()) return;
    pending_ms_ += wall_seconds * 1000.0 * rate_;
    auto whole = static_cast<SimTime>(std::floor(pending_ms_));
    if (whole <= 0) return;
    pending_ms_ -= static_cast<double>(whole);
    sim_.run_until(sim_.now() + whole);
}

Ack Gateway::reject(const OperatorCommand& c, std::string constraint, std::string detail)
{
    return {c.command_id, false, last_.revision, last_.sequence, std::move(constraint), std::move(detail)};
}

Ack Gateway::accept(const OperatorCommand& c)
{
    publish();
    return {c.command_id, true, last_.revision, last_.sequence, {}, {}};
}

Ack Gateway::apply(const OperatorCommand& c)
{
    publish();
    try {
        switch (c.kind) {
        case CommandKind::pause: paused_ = true; break;
        case CommandKind::resume: paused_ = false; break;
        case CommandKind::set_rate:
            if (!(c.rate > 0) || !std::isfinite(c.rate)) return reject(c, "invalid_argument", "rate must be > 0");
            rate_ = c.rate;
            break;
        case CommandKind::step:
            if (c.step_ms <= 0) return reject(c, "invalid_argument", "step must be > 0 ms");
            sim_.run_until(sim_.now() + c.step_ms);
            break;
        case CommandKind::set_strategy: sim_.set_strategy(c.strategy); break;
        case CommandKind::override_route:
            if (sim_.strategy() != RoutingStrategy::ssr)
                return reject(c, "strategy", "route overrides apply to semi-static routes only");
            if (!sim_.active_coordinator()) return reject(c, "no_coordinator", "no active coordinator");
            sim_.override_route(c.route_id, c.path);
            break;
        case CommandKind::remove_module:
            if (!sim_.active_coordinator()) return reject(c, "no_coordinator", "no active coordinator");
            sim_.remove_module(c.module_id);
            break;
        case CommandKind::add_module: {
            if (sim_.agents().count(c.placement.module_id) ||
                sim_.coordinator().topology.modules.count(c.placement.module_id))
                return reject(c, "duplicate_module", "module '" + c.placement.module_id + "' already present");
            ReconfigurationEvent e;
            e.at = sim_.now();
            e.kind = ReconfigurationKind::add_module;
            e.module_id = c.placement.module_id;
            e.descriptor_ref = c.descriptor_ref;
            e.descriptor = load_descriptor_file(base_dir_ / c.descriptor_ref);
            e.descriptor.module_id = e.module_id;
            e.placement = c.placement;
            apply_layout_change(sim_.coordinator().topology, AddModule{e.descriptor, e.placement},
                                sim_.config().parameters.tolerance);
            sim_.execute_reconfiguration(e);
            break;
        }
        }
    } catch (const OverrideRejected& ex) {
        return reject(c, ex.constraint(), ex.detail());
    } catch (const ModuleOccupied& ex) {
        return reject(c, "module_occupied", ex.what());
    } catch (const UnknownModuleError& ex) {
        return reject(c, "unknown_entity", ex.what());
    } catch (const OverlapError& ex) {
        return reject(c, "overlap", ex.what());
    } catch (const ScenarioError& ex) {
        return reject(c, "unknown_entity", ex.what());
    } catch (const Error& ex) {
        return reject(c, "invalid_command", ex.what());
    }
    return accept(c);
}

}  // namespace amfs

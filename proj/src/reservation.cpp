#include "amfs/reservation.hpp"

#include <algorithm>

namespace amfs {

namespace {

bool same_orientation(const Reservation& r, const LinkSlot& l) { return r.from == l.from && r.to == l.to; }
bool opposing(const Reservation& r, const LinkSlot& l) { return l.reversible && r.from == l.to && r.to == l.from; }

LinkSlot slot_of(const RouteHop& h) { return {h.link_from, h.link_to, h.reversible, h.concurrency}; }

}  // namespace

bool ReservationTable::fits(const LinkSlot& link, SimTime start, SimTime end) const
{
    std::vector<std::pair<SimTime, int>> sweep;
    for (const auto& r : entries_) {
        if (r.start > end) break;
        if (opposing(r, link) && r.start <= end && start <= r.end) return false;  // touching counts
        if (r.start >= end || r.end <= start) continue;
        if (same_orientation(r, link)) {
            sweep.push_back({std::max(r.start, start), +1});
            sweep.push_back({std::min(r.end, end), -1});
        }
    }
    if (sweep.empty()) return link.concurrency >= 1;
    std::sort(sweep.begin(), sweep.end());  // -1 sorts before +1 at equal times
    int cur = 0, peak = 0;
    for (auto [t, d] : sweep) {
        cur += d;
        peak = std::max(peak, cur);
    }
    return peak + 1 <= link.concurrency;
}

SimTime ReservationTable::earliest_fit(const LinkSlot& link, SimTime not_before, SimTime duration) const
{
    // Feasibility can only appear when the window's left edge passes the end
    // of a conflicting interval.
    std::vector<SimTime> candidates{not_before};
    for (const auto& r : entries_)
        if (r.end >= not_before && same_orientation(r, link)) candidates.push_back(r.end);
        else if (r.end >= not_before && opposing(r, link)) candidates.push_back(r.end + 1);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
    for (SimTime c : candidates)
        if (fits(link, c, c + duration)) return c;
    return candidates.back();
}

void ReservationTable::insert(Reservation r)
{
    auto pos = std::upper_bound(entries_.begin(), entries_.end(), r, [](const Reservation& a, const Reservation& b) {
        return std::tie(a.start, a.tu_id) < std::tie(b.start, b.tu_id);
    });
    entries_.insert(pos, std::move(r));
}

std::size_t ReservationTable::erase_tu(TuId tu)
{
    auto before = entries_.size();
    std::erase_if(entries_, [&](const Reservation& r) { return r.tu_id == tu; });
    return before - entries_.size();
}

bool ReservationTable::holds(TuId tu) const { return find(tu) != nullptr; }

const Reservation* ReservationTable::find(TuId tu) const
{
    for (const auto& r : entries_)
        if (r.tu_id == tu) return &r;
    return nullptr;
}

std::vector<const Reservation*> ReservationTable::active_at(SimTime t) const
{
    std::vector<const Reservation*> out;
    for (const auto& r : entries_) {
        if (r.start > t) break;
        if (r.end > t) out.push_back(&r);
    }
    return out;
}

int ReservationTable::peak_concurrency(const InterfaceId& from, const InterfaceId& to) const
{
    std::vector<std::pair<SimTime, int>> sweep;
    for (const auto& r : entries_) {
        if (r.from != from || r.to != to) continue;
        sweep.push_back({r.start, +1});
        sweep.push_back({r.end, -1});
    }
    std::sort(sweep.begin(), sweep.end());
    int cur = 0, peak = 0;
    for (auto [t, d] : sweep) {
        cur += d;
        peak = std::max(peak, cur);
    }
    return peak;
}

ReservationTable& ReservationBook::table(const ModuleId& module)
{
    auto it = tables_.find(module);
    if (it == tables_.end()) it = tables_.emplace(module, ReservationTable(module)).first;
    return it->second;
}

const ReservationTable* ReservationBook::find_table(const ModuleId& module) const
{
    auto it = tables_.find(module);
    return it == tables_.end() ? nullptr : &it->second;
}

const Schedule* ReservationBook::schedule_of(TuId tu) const
{
    auto it = schedules_.find(tu);
    return it == schedules_.end() ? nullptr : &it->second;
}

SimTime ReservationBook::last_arrival(const std::string& key) const
{
    auto it = last_arrival_.find(key);
    return it == last_arrival_.end() ? 0 : it->second;
}

bool ReservationBook::has_future_bookings(const ModuleId& module, SimTime now) const
{
    const auto* t = find_table(module);
    if (!t) return false;
    return std::any_of(t->entries().begin(), t->entries().end(), [&](const Reservation& r) { return r.end > now; });
}

Schedule schedule_transport(std::span<const RouteHop> hops, TuId tu_id, SimTime release_time, ReservationBook& book,
                            const ScheduleOptions& options)
{
    if (book.schedules_.count(tu_id)) throw Error("TU " + std::to_string(tu_id) + " already scheduled");
    const std::size_t n = hops.size();
    const SimTime fence = options.sequence_key.empty() ? 0 : book.last_arrival(options.sequence_key);
    SimTime start = std::max(release_time, options.earliest_start);
    std::vector<SimTime> dwell(n, 0);

    auto last_buffer_before = [&](std::size_t i) -> std::optional<std::size_t> {
        for (std::size_t b = i; b-- > 0;)
            if (hops[b].buffer) return b;
        return std::nullopt;
    };

    Schedule out{tu_id, release_time, {}};
    while (true) {
        if (start - release_time > options.horizon)
            throw HorizonExceeded("no slot for TU " + std::to_string(tu_id) + " within the scheduling horizon");

        std::vector<ScheduledHop> plan;
        SimTime t = start;
        std::optional<std::pair<std::size_t, SimTime>> conflict;  // hop index, required delay
        for (std::size_t i = 0; i < n && !conflict; ++i) {
            const auto& h = hops[i];
            SimTime len = h.process_time + dwell[i];
            auto& table = book.table(h.module_id);
            auto slot = slot_of(h);
            if (table.fits(slot, t, t + len)) {
                plan.push_back({h.module_id, h.link_from, h.link_to, t, t + len});
                t += len;
            } else {
                conflict = {{i, table.earliest_fit(slot, t, len) - t}};
            }
        }
        if (!conflict && n > 0 && t < fence) conflict = {{n, fence - t}};

        if (!conflict) {
            out.hops = std::move(plan);
            break;
        }
        auto [index, delay] = *conflict;
        delay = std::max<SimTime>(delay, 1);
        SimTime total_dwell = 0;
        for (auto d : dwell) total_dwell += d;
        if (auto b = last_buffer_before(index); b && total_dwell + delay <= options.horizon) {
            dwell[*b] += delay;
        } else {
            start += delay;
            std::fill(dwell.begin(), dwell.end(), 0);
        }
    }

    for (const auto& h : out.hops) book.table(h.module_id).insert({h.start, h.end, tu_id, h.from, h.to});
    if (!options.sequence_key.empty() && n > 0)
        book.last_arrival_[options.sequence_key] = std::max(fence, out.arrival());
    book.schedules_.emplace(tu_id, out);
    return out;
}

Schedule schedule_transport(const SemiStaticRoute& route, TuId tu_id, SimTime release_time, ReservationBook& book,
                            const ScheduleOptions& options)
{
    if (route.status != RouteStatus::active) throw Error("route '" + route.route_id + "' is not active");
    ScheduleOptions opts = options;
    if (opts.sequence_key.empty()) opts.sequence_key = route.relation_id;
    return schedule_transport(std::span<const RouteHop>(route.hops), tu_id, release_time, book, opts);
}

void release_schedule(ReservationBook& book, TuId tu_id)
{
    auto it = book.schedules_.find(tu_id);
    if (it == book.schedules_.end()) throw Error("unknown TU " + std::to_string(tu_id));
    for (const auto& h : it->second.hops) book.table(h.module_id).erase_tu(tu_id);
    book.schedules_.erase(it);
}

}  // namespace amfs

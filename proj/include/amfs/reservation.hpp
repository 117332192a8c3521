#pragma once

// Firm per-module time-slot reservations. A TU is only released onto its path
// once every module on it has a booked interval, which rules out opposing
// traversals of a reversible link and keeps each relation in release order.

#include "amfs/routing.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace amfs {

using TuId = std::uint64_t;

struct Reservation {
    SimTime start = 0;  // inclusive
    SimTime end = 0;    // exclusive
    TuId tu_id = 0;
    InterfaceId from;
    InterfaceId to;
    bool operator==(const Reservation&) const = default;
};

/// Link attributes the table needs to judge a candidate interval.
struct LinkSlot {
    InterfaceId from;
    InterfaceId to;
    bool reversible = false;
    int concurrency = 1;
};

class ReservationTable {
public:
    ReservationTable() = default;
    explicit ReservationTable(ModuleId module_id) : module_id_(std::move(module_id)) {}

    const ModuleId& module_id() const { return module_id_; }
    const std::vector<Reservation>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

    /// True if [start, end) on the link respects anisotropy and concurrency.
    /// Opposing intervals on a reversible link may not even touch.
    bool fits(const LinkSlot& link, SimTime start, SimTime end) const;
    /// Earliest start >= not_before at which an interval of `duration` fits.
    SimTime earliest_fit(const LinkSlot& link, SimTime not_before, SimTime duration) const;

    void insert(Reservation r);
    std::size_t erase_tu(TuId tu);
    bool holds(TuId tu) const;
    const Reservation* find(TuId tu) const;
    /// TUs whose interval covers `t`.
    std::vector<const Reservation*> active_at(SimTime t) const;
    /// Largest number of simultaneously held intervals on one orientation.
    int peak_concurrency(const InterfaceId& from, const InterfaceId& to) const;

private:
    ModuleId module_id_;
    std::vector<Reservation> entries_;  // sorted by (start, tu_id)
};

struct ScheduledHop {
    ModuleId module_id;
    InterfaceId from;
    InterfaceId to;
    SimTime start = 0;
    SimTime end = 0;
    bool operator==(const ScheduledHop&) const = default;
};

struct Schedule {
    TuId tu_id = 0;
    SimTime release_time = 0;
    std::vector<ScheduledHop> hops;
    SimTime start() const { return hops.empty() ? release_time : hops.front().start; }
    SimTime arrival() const { return hops.empty() ? release_time : hops.back().end; }
    bool operator==(const Schedule&) const = default;
};

class HorizonExceeded : public Error {
public:
    using Error::Error;
};

struct ScheduleOptions {
    /// Latest admissible delay between release and the first booked interval.
    SimTime horizon = 3'600'000;
    /// Earliest admissible start (e.g. release plus planning latency).
    SimTime earliest_start = 0;
    /// TUs sharing a key arrive at the sink in scheduling order.
    std::string sequence_key;
};

/// Reservation tables of every module, plus the per-sequence arrival fence.
class ReservationBook {
public:
    ReservationTable& table(const ModuleId& module);
    const ReservationTable* find_table(const ModuleId& module) const;
    const std::map<ModuleId, ReservationTable>& tables() const { return tables_; }

    const Schedule* schedule_of(TuId tu) const;
    const std::map<TuId, Schedule>& schedules() const { return schedules_; }
    SimTime last_arrival(const std::string& sequence_key) const;

    bool has_future_bookings(const ModuleId& module, SimTime now) const;

private:
    friend Schedule schedule_transport(std::span<const RouteHop>, TuId, SimTime, ReservationBook&,
                                       const ScheduleOptions&);
    friend void release_schedule(ReservationBook&, TuId);

    std::map<ModuleId, ReservationTable> tables_;
    std::map<TuId, Schedule> schedules_;
    std::map<std::string, SimTime> last_arrival_;
};

/// Books back-to-back intervals along the hops, shifting the whole tentative
/// schedule later on any conflict. Modules with a buffer ability may absorb
/// the delay by dwelling instead. Throws HorizonExceeded.
Schedule schedule_transport(std::span<const RouteHop> hops, TuId tu_id, SimTime release_time, ReservationBook& book,
                            const ScheduleOptions& options = {});
Schedule schedule_transport(const SemiStaticRoute& route, TuId tu_id, SimTime release_time, ReservationBook& book,
                            const ScheduleOptions& options = {});

/// Removes every interval of a TU. Throws Error for an unknown TU.
void release_schedule(ReservationBook& book, TuId tu_id);

}  // namespace amfs

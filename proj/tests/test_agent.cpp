#include "amfs/agent.hpp"
#include "amfs/coordinator.hpp"
#include "amfs/plan.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace amfs;
namespace t = amfs::testing;

namespace {

struct Diamond {
    CoordinatorState coordinator;
    std::map<ModuleId, AgentState> agents;

    Diamond()
    {
        coordinator = plan_routes(load_scenario(t::scenario_path("diamond.json"))).coordinator;
        for (const auto& [id, e] : coordinator.topology.modules) agents.emplace(id, make_agent(e.descriptor));
    }

    void book(const ModuleId& m, TuId tu, InterfaceId from, InterfaceId to, SimTime s, SimTime e)
    {
        auto msg = make_message("coordinator", m, Performative::request, "tu", ReservationRequestPayload{tu, "r", from, to, s, e});
        auto replies = dispatch_in_place(agents.at(m), msg, 0);
        REQUIRE(replies.size() == 1);
        REQUIRE(replies[0].performative == Performative::agree);
    }
};

}  // namespace

TEST_CASE("agents start unregistered with idle actuators")
{
    Diamond d;
    const auto& a = d.agents.at("L");
    CHECK(a.configuration.phase == RegistrationPhase::unregistered);
    CHECK(a.system.actuators.size() == 2);
    for (const auto& [id, s] : a.system.actuators) CHECK(!s.running);
    CHECK(workload(a) == 0.0);
}

TEST_CASE("operation sequences sum to the link process time")
{
    Diamond d;
    auto seq = build_sequence(d.agents.at("D").descriptor, 7, "a", "b");
    SimTime total = 0;
    for (const auto& s : seq.steps) total += s.expected_duration;
    CHECK(total == 20000);
    CHECK(seq.tu_id == 7);
}

TEST_CASE("reservation requests are agreed or refused with a reason")
{
    Diamond d;
    d.book("D", 1, "a", "b", 0, 20000);
    auto& D = d.agents.at("D");
    CHECK(D.functional.find(1));

    auto req = [&](TuId tu, InterfaceId f, InterfaceId to, SimTime s, SimTime e) {
        auto m = make_message("coordinator", "D", Performative::request, "tu", ReservationRequestPayload{tu, "r", f, to, s, e});
        return dispatch_in_place(D, m, 0).at(0);
    };
    CHECK(req(2, "b", "a", 10000, 30000).reason == "opposing_hold");
    CHECK(req(1, "a", "b", 30000, 40000).reason == "duplicate");
    CHECK(req(3, "a", "x", 0, 1).reason == "unknown_link");
    CHECK(req(4, "a", "b", 1000, 21000).performative == Performative::agree);

    auto cancel = make_message("coordinator", "D", Performative::inform, "tu", ReservationRequestPayload{4, "r", "a", "b", 1000, 21000});
    dispatch_in_place(D, cancel, 0);
    CHECK(!D.material_flow.reservations.holds(4));
}

TEST_CASE("handover moves the TU and drives the receiver actuator")
{
    Diamond d;
    d.book("L", 1, "io", "d", 0, 5000);
    d.book("D", 1, "a", "b", 5000, 25000);
    auto& L = d.agents.at("L");
    auto& D = d.agents.at("D");
    CHECK(accept_entry(L, 1, 0) == 5000);
    CHECK(workload(L) > 0);
    CHECK(handover_in_place(L, D, 1, 5000, d.coordinator.topology) == 20000);
    CHECK(!L.system.occupants.count(1));
    CHECK(D.system.occupants.at(1).from == "a");
    bool running = false;
    for (const auto& [id, s] : D.system.actuators) running = running || (s.running && s.direction == "a->b");
    CHECK(running);
    CHECK(!L.material_flow.reservations.holds(1));
}

TEST_CASE("simultaneous opposing handovers: the second is refused and nothing moves")
{
    Diamond d;
    auto& L = d.agents.at("L");
    auto& D = d.agents.at("D");
    auto& R = d.agents.at("R");
    d.book("L", 1, "io", "d", 0, 5000);
    d.book("D", 1, "a", "b", 5000, 25000);
    d.book("R", 2, "io", "u", 0, 5000);
    // a conflicting hold slipped past planning: D also expects TU 2 backwards
    D.material_flow.reservations.insert({5000, 25000, 2, "b", "a"});
    D.functional.queue.push_back(build_sequence(D.descriptor, 2, "b", "a"));

    accept_entry(L, 1, 0);
    accept_entry(R, 2, 0);
    handover_in_place(L, D, 1, 5000, d.coordinator.topology);
    auto before_r = R.system.occupants;
    auto before_d = D.system.occupants;
    try {
        handover_in_place(R, D, 2, 5000, d.coordinator.topology);
        FAIL("opposing handover accepted");
    } catch (const HandoverRefused& e) {
        CHECK(e.reason() == "opposing_transfer");
    }
    CHECK(R.system.occupants == before_r);
    CHECK(D.system.occupants == before_d);
}

TEST_CASE("handover without reservation or connection is refused")
{
    Diamond d;
    auto& L = d.agents.at("L");
    auto& U = d.agents.at("U");
    auto& R = d.agents.at("R");
    d.book("L", 1, "io", "d", 0, 5000);
    accept_entry(L, 1, 0);
    try {
        handover_in_place(L, U, 1, 5000, d.coordinator.topology);
        FAIL("accepted without reservation");
    } catch (const HandoverRefused& e) {
        CHECK(e.reason() == "missing_reservation");
    }
    d.book("R", 1, "u", "io", 5000, 10000);
    CHECK_THROWS_AS(handover_in_place(L, R, 1, 5000, d.coordinator.topology), ProtocolViolation);
    CHECK_THROWS_AS(handover_in_place(U, R, 9, 5000, d.coordinator.topology), ProtocolViolation);
    CHECK_THROWS_AS(release_exit(U, 9, 0), ProtocolViolation);
}

TEST_CASE("misaddressed or miscategorized messages are protocol violations")
{
    Diamond d;
    auto m = make_message("coordinator", "U", Performative::inform, "x", TopologyUpdatePayload{3, {}});
    CHECK_THROWS_AS(dispatch_in_place(d.agents.at("L"), m, 0), ProtocolViolation);
    auto cmd = make_message("console", "L", Performative::request, "x", OperatorCommandPayload{"c1", "pause", ""});
    CHECK_THROWS_AS(dispatch_in_place(d.agents.at("L"), cmd, 0), ProtocolViolation);
    auto bad = make_message("coordinator", "L", Performative::inform, "x", TopologyUpdatePayload{3, {}});
    bad.category = MessageCategory::time_critical;
    CHECK_THROWS_AS(dispatch_in_place(d.agents.at("L"), bad, 0), ProtocolViolation);
}

TEST_CASE("time critical messages are handled before planning traffic")
{
    Diamond d;
    auto& D = d.agents.at("D");
    d.book("D", 1, "a", "b", 0, 20000);
    deliver(D, make_message("coordinator", "D", Performative::inform, "t", TopologyUpdatePayload{5, {}}));
    deliver(D, make_message("L", "D", Performative::request, "h", HandoverSyncPayload{1, "L", "a"}));
    auto out = step_agent(D, 100);
    REQUIRE(out.size() == 1);
    CHECK(out[0].performative == Performative::confirm);
    CHECK(out[0].category == MessageCategory::time_critical);
    CHECK(D.configuration.topology_revision == 5);
    CHECK(D.inbox.empty());
}

TEST_CASE("message categories follow the payload kind")
{
    auto sync = make_message("a", "b", Performative::request, "c", HandoverSyncPayload{1, "a", "x"});
    CHECK(sync.category == MessageCategory::time_critical);
    auto plan = make_message("a", "b", Performative::request, "c", TopologyUpdatePayload{});
    CHECK(plan.category == MessageCategory::planning);
    auto reply = make_reply(sync, "b", Performative::confirm, sync.payload);
    CHECK(reply.conversation_id == "c");
    CHECK(reply.receiver == "a");
    CHECK(payload_digest(sync.payload) == payload_digest(reply.payload));
    CHECK(payload_digest(sync.payload).size() == 16);
    CHECK(fnv1a("") == 14695981039346656037ull);
}

TEST_CASE("registry lifecycle")
{
    auto config = load_scenario(t::scenario_path("diamond.json"));
    CoordinatorState c;
    CHECK_THROWS_AS(register_module(c, config.modules[0].descriptor, config.modules[0].placement, 0), InactiveCoordinator);
    c.active = true;
    c.host = "D";
    for (const auto& e : config.modules) {
        auto r = register_module(c, e.descriptor, e.placement, 10, e.descriptor_ref);
        CHECK(r.outgoing.size() >= 2);
        CHECK(r.outgoing[0].performative == Performative::agree);
        c = r.state;
    }
    CHECK(c.registry.entries.size() == 4);
    CHECK(c.topology.connections.size() == 4);
    CHECK_THROWS_AS(register_module(c, config.modules[0].descriptor, config.modules[0].placement, 0),
                    DuplicateRegistration);

    CHECK_THROWS_AS(deregister_module(c, "U", 20, {"U"}), ModuleOccupied);
    CHECK_THROWS_AS(deregister_module(c, "Q", 20), UnknownModuleError);
    auto d = deregister_module(c, "U", 20);
    CHECK(!d.state.registry.entries.count("U"));
    CHECK(d.state.topology.connections.size() == 2);

    CHECK(elect_coordinator({"U", "D", "L"}) == "D");
    CHECK(elect_coordinator({"U", "D", "L"}, ModuleId("D")) == "L");
    CHECK_THROWS_AS(elect_coordinator({"D"}, ModuleId("D")), EmptySystem);
    CHECK(alive_modules(c.registry).size() == 4);
}

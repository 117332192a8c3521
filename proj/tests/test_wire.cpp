#include "amfs/server.hpp"
#include "amfs/wire.hpp"
#include "support.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <doctest.h>

#include <chrono>
#include <thread>

using namespace amfs;
namespace t = amfs::testing;

TEST_CASE("frames carry a big endian length prefix")
{
    auto f = wire::encode_frame(Json{{"type", "hello"}});
    REQUIRE(f.size() > 4);
    std::uint32_t n = (static_cast<unsigned char>(f[0]) << 24) | (static_cast<unsigned char>(f[1]) << 16) |
                      (static_cast<unsigned char>(f[2]) << 8) | static_cast<unsigned char>(f[3]);
    CHECK(n == f.size() - 4);
}

TEST_CASE("decoder reassembles frames split at every byte")
{
    std::string stream = wire::encode_frame(wire::hello("client", "a")) + wire::encode_frame(wire::error_message("x", "y"));
    wire::FrameDecoder d;
    std::vector<Json> got;
    for (char c : stream) {
        d.feed(std::string_view(&c, 1));
        while (auto m = d.next()) got.push_back(*m);
    }
    REQUIRE(got.size() == 2);
    CHECK(got[0]["type"] == "hello");
    CHECK(got[1]["reason"] == "x");
    CHECK(d.buffered() == 0);
}

TEST_CASE("decoder rejects oversized and non object frames")
{
    wire::FrameDecoder big;
    big.feed(std::string("\x7f\xff\xff\xff", 4));
    CHECK_THROWS_AS(big.next(), WireError);
    wire::FrameDecoder arr;
    arr.feed(wire::encode_frame(Json::array({1, 2})));
    CHECK_THROWS_AS(arr.next(), WireError);
}

TEST_CASE("envelope checks type and version")
{
    CHECK(wire::check_envelope(wire::hello("client", "x")) == "hello");
    Json j = wire::hello("client", "x");
    j["protocol_version"] = 2;
    CHECK_THROWS_AS(wire::check_envelope(j), WireError);
    CHECK_THROWS_AS(wire::check_envelope(Json{{"protocol_version", 1}}), WireError);
    CHECK_THROWS_AS(wire::check_envelope(Json{{"type", "teleport"}, {"protocol_version", 1}}), WireError);
}

TEST_CASE("snapshot, delta, command and ack survive a round trip")
{
    auto c = load_scenario(t::scenario_path("diamond.json"));
    Simulation sim(c);
    Gateway gw(sim, t::scenario_dir());
    sim.run_until(60'000);
    auto s = gw.snapshot();
    auto back = wire::snapshot_from_json(wire::to_json(s));
    CHECK(back.same_state(s));
    CHECK(back.sequence == s.sequence);

    sim.run_until(90'000);
    auto d = gw.publish();
    REQUIRE(d);
    auto d2 = wire::delta_from_json(wire::to_json(*d));
    CHECK(apply_delta(s, d2).same_state(apply_delta(s, *d)));

    OperatorCommand cmd;
    cmd.command_id = "k";
    cmd.kind = CommandKind::add_module;
    cmd.descriptor_ref = "descriptors/straight.json";
    cmd.placement = {"X", {10, 20}, 90};
    auto cmd2 = wire::command_from_json(wire::command_message(cmd));
    CHECK(cmd2.placement == cmd.placement);
    CHECK(cmd2.descriptor_ref == cmd.descriptor_ref);
    CHECK_THROWS_AS(wire::command_from_json(Json{{"command_id", "z"}, {"kind", "override_route"}}), WireError);

    Ack a{"k", false, 3, 9, "overlap", "too close"};
    auto a2 = wire::ack_from_json(wire::to_json(a));
    CHECK(a2.constraint == "overlap");
    CHECK(a2.sequence == 9);
}

namespace {

struct Client {
    int fd = -1;
    wire::FrameDecoder decoder;

    explicit Client(std::uint16_t port)
    {
        fd = ::socket(AF_INET, SOCK_STREAM, 0);
        sockaddr_in a{};
        a.sin_family = AF_INET;
        a.sin_port = htons(port);
        ::inet_pton(AF_INET, "127.0.0.1", &a.sin_addr);
        REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof a) == 0);
        timeval tv{5, 0};
        ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof tv);
    }
    ~Client() { ::close(fd); }

    void send(const Json& j)
    {
        auto f = wire::encode_frame(j);
        REQUIRE(::send(fd, f.data(), f.size(), MSG_NOSIGNAL) == static_cast<ssize_t>(f.size()));
    }
    void send_raw(const std::string& bytes) { ::send(fd, bytes.data(), bytes.size(), MSG_NOSIGNAL); }

    /// Next message, or nullopt when the server closed or timed out.
    std::optional<Json> receive()
    {
        char buf[65536];
        for (;;) {
            if (auto m = decoder.next()) return m;
            ssize_t n = ::recv(fd, buf, sizeof buf, 0);
            if (n <= 0) return std::nullopt;
            decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
        }
    }
    std::optional<Json> receive_type(const std::string& type)
    {
        while (auto m = receive())
            if ((*m)["type"] == type) return m;
        return std::nullopt;
    }
};

Json request(std::string_view type)
{
    return Json{{"type", type}, {"protocol_version", kProtocolVersion}};
}

}  // namespace

TEST_CASE("gateway server speaks the protocol over TCP")
{
    auto c = load_scenario(t::scenario_path("diamond.json"));
    Simulation sim(c);
    sim.run_until(1000);
    Gateway gw(sim, t::scenario_dir(), true, 1.0);
    GatewayServer server(gw, parse_listen_address("127.0.0.1:0"), "test");
    REQUIRE(server.port() != 0);
    std::atomic<bool> stop{false};
    std::thread loop([&] { server.run(stop); });

    {
        Client a(server.port());
        a.send(wire::hello("client", "t"));
        auto hello = a.receive();
        REQUIRE(hello);
        CHECK((*hello)["type"] == "hello");
        CHECK((*hello)["protocol_version"] == kProtocolVersion);

        a.send(request("subscribe"));
        auto snap = a.receive_type("snapshot");
        REQUIRE(snap);
        auto s = wire::snapshot_from_json((*snap)["snapshot"]);
        CHECK(s.modules.size() == 4);

        OperatorCommand step;
        step.command_id = "s1";
        step.kind = CommandKind::step;
        step.step_ms = 5000;
        a.send(wire::command_message(step));
        auto ack = a.receive_type("ack");
        REQUIRE(ack);
        CHECK((*ack)["command_id"] == "s1");
        CHECK((*ack)["ack"]["accepted"] == true);
        auto delta = a.receive_type("delta");
        REQUIRE(delta);
        auto d = wire::delta_from_json((*delta)["delta"]);
        CHECK(d.prev_sequence >= s.sequence);

        OperatorCommand bad;
        bad.command_id = "o1";
        bad.kind = CommandKind::override_route;
        bad.route_id = "ssr-1";
        bad.path = {"L", "R"};
        a.send(wire::command_message(bad));
        auto rej = a.receive_type("ack");
        REQUIRE(rej);
        CHECK((*rej)["ack"]["accepted"] == false);
        CHECK((*rej)["ack"]["constraint"] == "disconnected_path");
    }
    {
        Client b(server.port());
        b.send(request("delta"));
        auto err = b.receive();
        REQUIRE(err);
        CHECK((*err)["type"] == "error");
        CHECK((*err)["reason"] == "protocol_violation");
        CHECK(!b.receive());
    }
    {
        Client c2(server.port());
        c2.send_raw(std::string("\x7f\xff\xff\xff", 4));
        auto err = c2.receive();
        REQUIRE(err);
        CHECK((*err)["type"] == "error");
    }
    {
        Client d(server.port());
        Json old = wire::hello("client", "old");
        old["protocol_version"] = 0;
        d.send(old);
        auto err = d.receive();
        REQUIRE(err);
        CHECK((*err)["type"] == "error");
    }
    stop = true;
    loop.join();
}

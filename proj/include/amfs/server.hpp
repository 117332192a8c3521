#pragma once

// TCP host for the gateway. Connections are read on their own threads; every
// request is queued and handled by the loop that owns the simulation.

#include "amfs/wire.hpp"

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>

namespace amfs {

struct ListenAddress {
    std::string host = "127.0.0.1";
    std::uint16_t port = 7400;
};

/// Parses "host:port" or ":port". Throws Error.
ListenAddress parse_listen_address(std::string_view s);

class GatewayServer {
public:
    /// Binds immediately; throws Error when the address is in use.
    GatewayServer(Gateway& gateway, const ListenAddress& address, std::string name = "amfs");
    ~GatewayServer();
    GatewayServer(const GatewayServer&) = delete;
    GatewayServer& operator=(const GatewayServer&) = delete;

    std::uint16_t port() const;
    /// Serves until `stop` becomes true. Wall time drives the simulation
    /// through Gateway::advance_wall.
    void run(const std::atomic<bool>& stop);

    static constexpr std::size_t kMaxQueuedFrames = 1024;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace amfs

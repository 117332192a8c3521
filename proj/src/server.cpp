#include "amfs/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <fcntl.h>
#include <iostream>
#include <list>
#include <mutex>
#include <poll.h>
#include <thread>

namespace amfs {

ListenAddress parse_listen_address(std::string_view s)
{
    auto colon = s.rfind(':');
    if (colon == std::string_view::npos) throw Error("listen address must be host:port, got '" + std::string(s) + "'");
    ListenAddress a;
    if (colon > 0) a.host = std::string(s.substr(0, colon));
    auto port = s.substr(colon + 1);
    if (port.empty() || port.size() > 5 || port.find_first_not_of("0123456789") != std::string_view::npos)
        throw Error("invalid port in '" + std::string(s) + "'");
    auto p = std::stoul(std::string(port));
    if (p > 65535) throw Error("invalid port in '" + std::string(s) + "'");
    a.port = static_cast<std::uint16_t>(p);
    return a;
}

namespace {

struct ClientConnection {
    std::uint64_t id = 0;
    int fd = -1;
    std::thread reader;
    std::thread writer;
    std::mutex m;
    std::condition_variable cv;
    std::deque<std::string> out;
    bool closing = false;
    std::atomic<bool> dead{false};
    std::optional<Gateway::SubscriberId> subscription;

    void enqueue(std::string frame)
    {
        std::lock_guard lock(m);
        if (closing) return;
        if (out.size() >= GatewayServer::kMaxQueuedFrames) {
            dead = true;
            closing = true;
            ::shutdown(fd, SHUT_RDWR);
        } else {
            out.push_back(std::move(frame));
        }
        cv.notify_one();
    }

    /// Sends what is queued, then closes.
    void finish()
    {
        std::lock_guard lock(m);
        closing = true;
        cv.notify_one();
    }
};

struct Inbound {
    std::uint64_t connection = 0;
    std::optional<Json> message;
    std::string error;  // set when the stream was malformed
};

}  // namespace

struct GatewayServer::Impl {
    Gateway& gateway;
    std::string name;
    int listen_fd = -1;
    std::uint16_t port = 0;
    std::list<std::shared_ptr<ClientConnection>> connections;
    std::uint64_t next_id = 1;

    std::mutex in_m;
    std::deque<Inbound> inbound;

    Impl(Gateway& g, std::string n) : gateway(g), name(std::move(n)) {}

    void push_inbound(Inbound in)
    {
        std::lock_guard lock(in_m);
        inbound.push_back(std::move(in));
    }

    void start(const std::shared_ptr<ClientConnection>& c)
    {
        c->reader = std::thread([this, c] {
            wire::FrameDecoder decoder;
            char buf[8192];
            while (!c->dead) {
                ssize_t n = ::recv(c->fd, buf, sizeof buf, 0);
                if (n <= 0) break;
                decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
                try {
                    while (auto msg = decoder.next()) push_inbound({c->id, std::move(msg), {}});
                } catch (const WireError& e) {
                    push_inbound({c->id, std::nullopt, e.what()});
                    return;
                }
            }
            c->dead = true;
            c->finish();
        });
        c->writer = std::thread([c] {
            std::unique_lock lock(c->m);
            for (;;) {
                c->cv.wait(lock, [&] { return !c->out.empty() || c->closing; });
                if (c->out.empty()) break;
                std::string frame = std::move(c->out.front());
                c->out.pop_front();
                lock.unlock();
                std::size_t sent = 0;
                while (sent < frame.size()) {
                    ssize_t n = ::send(c->fd, frame.data() + sent, frame.size() - sent, MSG_NOSIGNAL);
                    if (n <= 0) break;
                    sent += static_cast<std::size_t>(n);
                }
                lock.lock();
                if (sent < frame.size()) {
                    c->dead = true;
                    break;
                }
            }
            c->dead = true;
            ::shutdown(c->fd, SHUT_RDWR);
        });
    }

    void close(const std::shared_ptr<ClientConnection>& c)
    {
        c->dead = true;
        c->finish();
        if (c->writer.joinable()) c->writer.join();
        ::shutdown(c->fd, SHUT_RDWR);
        if (c->reader.joinable()) c->reader.join();
        ::close(c->fd);
        if (c->subscription) gateway.unsubscribe(*c->subscription);
    }

    void accept_pending()
    {
        for (;;) {
            int fd = ::accept(listen_fd, nullptr, nullptr);
            if (fd < 0) return;
            auto c = std::make_shared<ClientConnection>();
            c->id = next_id++;
            c->fd = fd;
            connections.push_back(c);
            start(c);
        }
    }

    std::shared_ptr<ClientConnection> find(std::uint64_t id)
    {
        for (auto& c : connections)
            if (c->id == id) return c;
        return nullptr;
    }

    void violation(const std::shared_ptr<ClientConnection>& c, const std::string& what)
    {
        std::cerr << "connection " << c->id << ": protocol violation: " << what << "\n";
        c->enqueue(wire::encode_frame(wire::error_message("protocol_violation", what)));
        c->dead = true;
        c->finish();
    }

    void handle(const std::shared_ptr<ClientConnection>& c, const Json& msg)
    {
        std::string type;
        try {
            type = wire::check_envelope(msg);
        } catch (const WireError& e) {
            violation(c, e.what());
            return;
        }
        if (type == "hello") {
            c->enqueue(wire::encode_frame(wire::hello("server", name)));
        } else if (type == "snapshot_request") {
            c->enqueue(wire::encode_frame(wire::snapshot_message(gateway.snapshot())));
        } else if (type == "subscribe") {
            if (!c->subscription) c->subscription = gateway.subscribe();
            c->enqueue(wire::encode_frame(wire::snapshot_message(gateway.snapshot())));
        } else if (type == "command") {
            OperatorCommand cmd;
            try {
                cmd = wire::command_from_json(msg);
            } catch (const WireError& e) {
                violation(c, e.what());
                return;
            }
            c->enqueue(wire::encode_frame(wire::ack_message(gateway.apply(cmd))));
        } else {
            violation(c, "clients may not send '" + type + "'");
        }
    }

    void process_inbound()
    {
        std::deque<Inbound> batch;
        {
            std::lock_guard lock(in_m);
            batch.swap(inbound);
        }
        for (auto& in : batch) {
            auto c = find(in.connection);
            if (!c || (c->dead && c->closing)) continue;
            if (in.message) handle(c, *in.message);
            else violation(c, in.error);
        }
    }

    void stream_deltas()
    {
        gateway.publish();
        for (auto& c : connections) {
            if (!c->subscription || c->dead) continue;
            if (gateway.dropped(*c->subscription)) {
                violation(c, "slow consumer");
                continue;
            }
            for (const auto& d : gateway.drain(*c->subscription))
                c->enqueue(wire::encode_frame(wire::delta_message(d)));
        }
    }

    void reap()
    {
        for (auto it = connections.begin(); it != connections.end();) {
            if ((*it)->dead) {
                close(*it);
                it = connections.erase(it);
            } else {
                ++it;
            }
        }
    }
};

GatewayServer::GatewayServer(Gateway& gateway, const ListenAddress& address, std::string name)
    : impl_(std::make_unique<Impl>(gateway, std::move(name)))
{
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw Error(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(address.port);
    std::string host = address.host == "localhost" ? "127.0.0.1" : address.host;
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw Error("cannot parse listen host '" + address.host + "'");
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 16) != 0) {
        std::string why = std::strerror(errno);
        ::close(fd);
        throw Error("cannot listen on " + address.host + ":" + std::to_string(address.port) + ": " + why);
    }
    ::fcntl(fd, F_SETFL, ::fcntl(fd, F_GETFL) | O_NONBLOCK);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    impl_->listen_fd = fd;
    impl_->port = ntohs(addr.sin_port);
}

GatewayServer::~GatewayServer()
{
    for (auto& c : impl_->connections) impl_->close(c);
    if (impl_->listen_fd >= 0) ::close(impl_->listen_fd);
}

std::uint16_t GatewayServer::port() const { return impl_->port; }

void GatewayServer::run(const std::atomic<bool>& stop)
{
    using clock = std::chrono::steady_clock;
    auto last = clock::now();
    while (!stop) {
        pollfd p{impl_->listen_fd, POLLIN, 0};
        ::poll(&p, 1, 10);
        impl_->accept_pending();
        impl_->process_inbound();
        auto now = clock::now();
        impl_->gateway.advance_wall(std::chrono::duration<double>(now - last).count());
        last = now;
        impl_->stream_deltas();
        impl_->reap();
    }
}

}  // namespace amfs

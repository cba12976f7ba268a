#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>

#include "lorentz/teleop.hpp"

namespace lorentz {

namespace detail {
struct ServerImpl;
}

class PortBusyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ServerOptions {
    std::string bind_address = "127.0.0.1";
    unsigned short port = 7878;                 // line-delimited JSON over TCP; 0 picks a free port
    std::optional<unsigned short> ws_port;      // WebSocket; default port + 1 (0 when port is 0)
    std::filesystem::path event_log;            // JSON lines, flushed on shutdown; empty: none
    std::optional<std::uint64_t> max_ticks;     // stop after this many ticks
    bool handle_signals = false;                // stop cleanly on SIGINT / SIGTERM
    std::size_t max_pending_messages = 1024;    // per client, beyond telemetry; slower clients are dropped
};

// Teleop service: one simulation loop on a fixed tick, fed by an ordered command queue,
// publishing telemetry snapshots to every connected client.
class TeleopServer {
public:
    // Binds both listeners. Throws PortBusyError when an address is in use.
    TeleopServer(SessionSettings settings, ServerOptions options);
    ~TeleopServer();
    TeleopServer(const TeleopServer&) = delete;
    TeleopServer& operator=(const TeleopServer&) = delete;

    // Runs until stop() or max_ticks; flushes the event log before returning.
    void run();
    // Thread-safe.
    void stop();

    unsigned short tcp_port() const;
    unsigned short ws_port() const;
    std::uint64_t ticks() const;

private:
    std::unique_ptr<detail::ServerImpl> impl_;
};

}  // namespace lorentz

#pragma once

#include "bridgekit/config.hpp"
#include "bridgekit/error.hpp"
#include "bridgekit/json_rpc.hpp"
#include "bridgekit/util.hpp"

#include <sys/types.h>

#include <atomic>
#include <condition_variable>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace bridgekit {

enum class ServerState { starting, healthy, degraded, stopped };

std::string_view to_string(ServerState state);

/// Point-in-time view of a supervised server.
struct ServerConnection {
    std::string id;
    ServerConfig config;
    Capabilities capabilities;
    ServerState state = ServerState::starting;
    WallClock::time_point last_heartbeat;
    std::size_t queue_depth = 0;
    std::vector<pid_t> pids;
    double handshake_ms = 0.0;
    std::uint64_t requests_routed = 0;
    int reconnects = 0;
};

namespace detail {
class Instance;
struct Connection;
}  // namespace detail

/// Owns the server registry: spawns servers, completes the MCP handshake,
/// serializes requests per STDIO instance, pings idle servers and respawns
/// the ones that die. Safe to use from any number of threads.
class ServerManager {
public:
    using StateListener = std::function<void(const std::string& id, ServerState state)>;

    explicit ServerManager(SupervisorOptions options = {});
    ~ServerManager();

    ServerManager(const ServerManager&) = delete;
    ServerManager& operator=(const ServerManager&) = delete;

    /// Spawns (or connects), handshakes within config.connect_timeout_ms and
    /// registers. On failure nothing is registered and no process survives.
    ServerConnection start_server(const ServerConfig& config);

    /// Terminates the server and removes it. Queued and in-flight requests
    /// fail with server_stopped. Unknown id throws Error(not_found).
    void stop_server(const std::string& id);

    /// Sends tools/call through the server's FIFO queue and returns the MCP
    /// result object.
    json route_request(const std::string& id, const std::string& tool, const json& arguments);

    /// One supervision pass: dead or unresponsive servers become degraded.
    std::vector<std::pair<std::string, ServerState>> heartbeat_tick();

    /// Respawns a degraded server with exponential backoff, keeping its id.
    /// A healthy server is returned untouched. After the last failed attempt
    /// the server is left in state stopped and Error(server_unavailable) is thrown.
    ServerConnection reconnect(const std::string& id);

    /// Lookup by id, or by name when no id matches.
    std::optional<ServerConnection> get(const std::string& id_or_name) const;
    std::vector<ServerConnection> list() const;
    std::size_t size() const;

    /// Periodic heartbeats plus automatic reconnection of degraded servers.
    void start_supervisor();
    void stop_all();

    void on_state_change(StateListener listener);

    /// Every child process currently owned by the registry.
    std::vector<pid_t> live_pids() const;

    const SupervisorOptions& options() const { return options_; }

private:
    std::shared_ptr<detail::Connection> find(const std::string& id_or_name) const;
    std::vector<std::shared_ptr<detail::Connection>> snapshot() const;
    std::vector<std::shared_ptr<detail::Instance>> spawn_instances(const ServerConfig& config,
                                                                   const std::string& id,
                                                                   std::uint64_t generation,
                                                                   Capabilities& caps);
    void instance_closed(const std::string& id, std::uint64_t generation, const std::string& reason);
    void set_state(detail::Connection& conn, ServerState state);
    void emit(const std::string& id, ServerState state);
    void supervisor_loop();
    void schedule_reconnect(const std::shared_ptr<detail::Connection>& conn);
    ServerConnection view(const detail::Connection& conn) const;

    SupervisorOptions options_;
    mutable std::shared_mutex registry_mutex_;
    std::map<std::string, std::shared_ptr<detail::Connection>> registry_;

    std::mutex listener_mutex_;
    std::vector<StateListener> listeners_;

    std::mutex supervisor_mutex_;
    std::condition_variable supervisor_cv_;
    bool shutting_down_ = false;
    bool wake_ = false;
    std::thread supervisor_;
    struct ReconnectTask {
        std::thread thread;
        std::shared_ptr<std::atomic<bool>> done;
    };
    std::vector<ReconnectTask> reconnect_threads_;
};

}  // namespace bridgekit

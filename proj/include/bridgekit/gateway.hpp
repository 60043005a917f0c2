#pragma once

/// The bridge's HTTP API: server management, capability listing, tool
/// execution by risk level and the confirmation endpoint.

#include "bridgekit/config.hpp"
#include "bridgekit/error.hpp"
#include "bridgekit/risk.hpp"
#include "bridgekit/server_manager.hpp"

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace bridgekit {

struct ApiResponse {
    int status = 200;
    json body;  // null for 204
};

ApiResponse error_response(ErrorCode code, const std::string& message);

struct GatewayOptions {
    std::string host = "0.0.0.0";
    int port = 3000;  // 0 picks a free port
    std::optional<std::string> shared_secret;
    std::size_t threads = 128;
};

/// How many tool requests took each branch of the pipeline.
struct PathCounters {
    std::uint64_t direct = 0;
    std::uint64_t confirmation = 0;   // 202 issued
    std::uint64_t confirmed = 0;      // approved and executed
    std::uint64_t sandboxed = 0;
};

class Gateway {
public:
    /// `sandbox` may be null; level-3 requests then fail with sandbox_unavailable.
    Gateway(ServerManager& manager, ConfirmationStore& confirmations, SandboxBackend* sandbox,
            GatewayOptions options = {});
    ~Gateway();

    Gateway(const Gateway&) = delete;
    Gateway& operator=(const Gateway&) = delete;

    /// Binds and serves on a background thread; returns the bound port.
    int start();
    void stop();
    int port() const { return port_; }

    // Route handlers, usable without HTTP.
    ApiResponse list_servers() const;
    ApiResponse start_server(const std::string& body);
    ApiResponse stop_server(const std::string& id);
    ApiResponse list_capabilities(const std::string& id, const std::string& kind) const;
    ApiResponse process_tool_request(const std::string& id, const std::string& tool, const std::string& body);
    ApiResponse resolve_confirmation(const std::string& id, const std::string& body);
    ApiResponse health() const;

    PathCounters counters() const;

    /// Startup bookkeeping reported by /health.
    void record_startup_failure(const std::string& name, const std::string& error);
    void set_startup_complete();

private:
    void install_routes();

    ServerManager& manager_;
    ConfirmationStore& confirmations_;
    SandboxBackend* sandbox_;
    GatewayOptions options_;
    Clock::time_point started_ = Clock::now();
    std::unique_ptr<httplib::Server> server_;
    std::thread listener_;
    int port_ = -1;

    std::atomic<std::uint64_t> direct_{0};
    std::atomic<std::uint64_t> confirmation_{0};
    std::atomic<std::uint64_t> confirmed_{0};
    std::atomic<std::uint64_t> sandboxed_{0};

    mutable std::mutex startup_mutex_;
    bool startup_complete_ = false;
    std::vector<std::pair<std::string, std::string>> startup_failures_;
};

/// Everything `bridgekit serve` runs: registry, confirmation store, sandbox
/// backend and gateway built from one configuration.
class Bridge {
public:
    Bridge(BridgeConfig config, GatewayOptions options);
    ~Bridge();

    /// Starts listening first, then brings the configured servers up in the
    /// background. Returns the bound port.
    int start();
    /// Blocks until every configured server has either started or failed.
    void wait_for_startup();
    void stop();

    Gateway& gateway() { return *gateway_; }
    ServerManager& manager() { return manager_; }
    ConfirmationStore& confirmations() { return confirmations_; }

private:
    BridgeConfig config_;
    ServerManager manager_;
    ConfirmationStore confirmations_;
    std::unique_ptr<SandboxBackend> sandbox_;
    std::unique_ptr<Gateway> gateway_;
    std::thread startup_;
};

}  // namespace bridgekit

#pragma once

#include "bridgekit/config.hpp"
#include "bridgekit/json_rpc.hpp"
#include "bridgekit/server_manager.hpp"
#include "bridgekit/util.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>

namespace bridgekit {

/// Execution tier of a tool call.
enum class RiskLevel : int {
    direct = 1,        // executed immediately
    confirmation = 2,  // held until approved with a single-use token
    sandboxed = 3,     // executed in an isolated one-shot sandbox
};

RiskLevel risk_level_from_int(int value);

/// Per-tool override if configured, otherwise the server's level.
RiskLevel classify(const ServerConnection& server, const std::string& tool);
RiskLevel classify(const ServerConfig& config, const std::string& tool);

struct PendingConfirmation {
    std::string confirmation_id;
    std::string token;
    std::string server_id;
    std::string tool;
    json params;
    WallClock::time_point created_at;
    WallClock::time_point expires_at;
};

enum class Decision { approve, reject };

struct Cancelled {};

/// Store of medium-risk requests awaiting approval. Entries are single use:
/// a resolve takes the entry out atomically, so concurrent approvals of the
/// same id execute the call at most once. Unknown ids, wrong tokens and
/// expired entries are indistinguishable to the caller (Error(not_found)).
class ConfirmationStore {
public:
    using ClockFn = std::function<WallClock::time_point()>;
    using Executor = std::function<json(const PendingConfirmation&)>;

    static constexpr std::size_t kDefaultCapacity = 10000;

    explicit ConfirmationStore(std::chrono::seconds ttl = std::chrono::seconds(300),
                               std::size_t capacity = kDefaultCapacity,
                               ClockFn clock = [] { return WallClock::now(); });

    /// Throws Error(resource_exhausted) when the store is full.
    PendingConfirmation create(const std::string& server_id, const std::string& tool, const json& params);

    /// Approve runs `execute` on the frozen call and returns its result;
    /// reject returns Cancelled without executing.
    std::variant<json, Cancelled> resolve(const std::string& confirmation_id, const std::string& token,
                                          Decision decision, const Executor& execute);

    std::optional<PendingConfirmation> peek(const std::string& confirmation_id) const;

    /// Removes every entry with expires_at <= now; returns the count.
    std::size_t purge_expired(WallClock::time_point now);
    std::size_t purge_expired() { return purge_expired(clock_()); }

    /// Entries that have not yet expired.
    std::size_t live_count() const;
    std::size_t size() const;

    std::chrono::seconds ttl() const { return ttl_; }

private:
    std::chrono::seconds ttl_;
    std::size_t capacity_;
    ClockFn clock_;
    mutable std::mutex mutex_;
    std::map<std::string, PendingConfirmation> entries_;
};

/// Runs one tool call in isolation: start the server's command inside the
/// sandbox, handshake, tools/call, tear down.
class SandboxBackend {
public:
    virtual ~SandboxBackend() = default;

    virtual std::string name() const = 0;
    virtual bool available() const = 0;

    /// Throws Error(sandbox_unavailable) when the backend cannot run and
    /// Error(sandbox_timeout) when spec.timeout_sec elapses; teardown is
    /// guaranteed in both cases.
    virtual json execute(const ServerConfig& server, const std::string& tool, const json& params,
                         const SandboxSpec& spec) = 0;
};

/// Container runtime shell-out (`docker run --rm -i ...`).
class ContainerSandbox final : public SandboxBackend {
public:
    explicit ContainerSandbox(std::string runtime = "docker");

    std::string name() const override { return runtime_; }
    bool available() const override;
    json execute(const ServerConfig& server, const std::string& tool, const json& params,
                 const SandboxSpec& spec) override;

    /// The full argv used to launch the container.
    std::vector<std::string> run_argv(const ServerConfig& server, const SandboxSpec& spec,
                                      const std::string& container_name) const;

private:
    std::string runtime_;
};

/// Restricted subprocess: own process group plus address-space, CPU-time and
/// file-descriptor limits. Network and volume settings are not enforced.
/// Used where no container runtime exists (tests, CI).
class ProcessSandbox final : public SandboxBackend {
public:
    std::string name() const override { return "process"; }
    bool available() const override { return true; }
    json execute(const ServerConfig& server, const std::string& tool, const json& params,
                 const SandboxSpec& spec) override;

    std::size_t executions() const { return executions_; }

private:
    std::atomic<std::size_t> executions_{0};
};

std::unique_ptr<SandboxBackend> make_sandbox_backend(const std::string& kind, const std::string& runtime);

/// Looks `program` up on PATH (or checks it directly if it contains '/').
bool executable_on_path(const std::string& program);

}  // namespace bridgekit

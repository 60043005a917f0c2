#pragma once

#include "bridgekit/json_rpc.hpp"

#include <chrono>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bridgekit {

enum class TransportKind { stdio, sse };

struct SandboxSpec {
    std::string image = "node:22-alpine";
    int memory_limit_mb = 512;
    std::string network = "none";        // none | bridge
    std::vector<std::string> volumes;    // host:container
    int timeout_sec = 60;

    bool operator==(const SandboxSpec&) const = default;
};

struct ServerConfig {
    std::string name;
    TransportKind transport = TransportKind::stdio;
    std::string command;
    std::vector<std::string> args;
    std::map<std::string, std::string> env;   // values already ${VAR}-expanded
    std::string url;                          // SSE stream URL
    std::optional<std::string> message_url;   // SSE POST endpoint override
    int risk_level = 1;
    std::map<std::string, int> tool_risk;     // per-tool overrides
    std::optional<SandboxSpec> sandbox;
    int pool_size = 1;
    int connect_timeout_ms = 5000;

    bool operator==(const ServerConfig&) const = default;
};

/// Throws Error(invalid_config, "Invalid server configuration: ...") when the
/// config breaks an invariant (missing command or URL, risk outside 1..3, ...).
void validate(const ServerConfig& config);

/// Parses one server entry. `name` overrides a "name" field in the body.
/// Environment values get ${VAR} expansion. Validation is included.
ServerConfig server_config_from_json(const json& body, std::optional<std::string> name = std::nullopt);

json to_json(const ServerConfig& config);
json to_json(const SandboxSpec& spec);
SandboxSpec sandbox_spec_from_json(const json& body);

/// Knobs for the supervisor; defaults are the production values.
struct SupervisorOptions {
    std::chrono::milliseconds heartbeat_interval{10000};
    std::chrono::milliseconds heartbeat_deadline{2000};
    std::chrono::milliseconds request_timeout{30000};
    std::chrono::milliseconds backoff_initial{500};
    std::chrono::milliseconds backoff_cap{8000};
    int max_reconnect_attempts = 5;
    std::chrono::milliseconds shutdown_grace{3000};
    bool auto_reconnect = true;
};

/// Whole-bridge configuration file:
/// {"mcpServers": {"<name>": {...}}, "sandboxBackend": "docker"|"process", ...}
struct BridgeConfig {
    std::vector<ServerConfig> servers;   // in file order
    std::string sandbox_backend = "docker";
    std::string container_runtime = "docker";
    std::optional<std::string> shared_secret;
    std::chrono::seconds confirmation_ttl{300};
    SupervisorOptions supervisor;
};

BridgeConfig bridge_config_from_json(const json& body);
json to_json(const BridgeConfig& config);
BridgeConfig load_bridge_config(const std::string& path);

}  // namespace bridgekit

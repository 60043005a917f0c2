#include "bridgekit/config.hpp"

#include "bridgekit/error.hpp"
#include "bridgekit/util.hpp"

#include <fstream>

namespace bridgekit {

namespace {

[[noreturn]] void invalid(const std::string& why) {
    throw Error(ErrorCode::invalid_config, "Invalid server configuration: " + why);
}

template <typename T>
T field(const json& body, const char* key, T fallback) {
    const auto it = body.find(key);
    if (it == body.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        invalid(std::string("field '") + key + "' has the wrong type");
    }
}

}  // namespace

void validate(const ServerConfig& c) {
    if (c.name.empty()) invalid("missing name");
    if (c.transport == TransportKind::stdio && c.command.empty()) invalid("stdio server needs a command");
    if (c.transport == TransportKind::sse && c.url.empty()) invalid("sse server needs a url");
    if (c.risk_level < 1 || c.risk_level > 3) invalid("riskLevel must be 1, 2 or 3");
    for (const auto& [tool, level] : c.tool_risk) {
        if (level < 1 || level > 3) invalid("toolRisk for '" + tool + "' must be 1, 2 or 3");
    }
    if (c.pool_size < 1) invalid("poolSize must be positive");
    if (c.connect_timeout_ms <= 0) invalid("connectTimeoutMs must be positive");
    if (c.sandbox) {
        if (c.sandbox->memory_limit_mb <= 0) invalid("sandbox memoryLimitMb must be positive");
        if (c.sandbox->timeout_sec <= 0) invalid("sandbox timeoutSec must be positive");
        if (c.sandbox->network != "none" && c.sandbox->network != "bridge") {
            invalid("sandbox network must be 'none' or 'bridge'");
        }
    }
}

SandboxSpec sandbox_spec_from_json(const json& body) {
    if (!body.is_object()) invalid("sandbox must be an object");
    SandboxSpec s;
    s.image = field<std::string>(body, "image", s.image);
    s.memory_limit_mb = field<int>(body, "memoryLimitMb", s.memory_limit_mb);
    s.network = field<std::string>(body, "network", s.network);
    s.volumes = field<std::vector<std::string>>(body, "volumes", s.volumes);
    s.timeout_sec = field<int>(body, "timeoutSec", s.timeout_sec);
    return s;
}

ServerConfig server_config_from_json(const json& body, std::optional<std::string> name) {
    if (!body.is_object()) invalid("server entry must be an object");
    ServerConfig c;
    c.name = name ? *name : field<std::string>(body, "name", "");
    c.command = field<std::string>(body, "command", "");
    c.args = field<std::vector<std::string>>(body, "args", {});
    c.url = field<std::string>(body, "url", "");
    if (body.contains("messageUrl")) c.message_url = field<std::string>(body, "messageUrl", "");

    const std::string transport =
        field<std::string>(body, "transport", c.command.empty() && !c.url.empty() ? "sse" : "stdio");
    if (transport == "stdio") {
        c.transport = TransportKind::stdio;
    } else if (transport == "sse") {
        c.transport = TransportKind::sse;
    } else {
        invalid("unknown transport '" + transport + "'");
    }

    for (const auto& [k, v] : field<std::map<std::string, std::string>>(body, "env", {})) {
        c.env[k] = expand_env(v);
    }
    c.risk_level = field<int>(body, "riskLevel", 1);
    c.tool_risk = field<std::map<std::string, int>>(body, "toolRisk", {});
    c.pool_size = field<int>(body, "poolSize", 1);
    c.connect_timeout_ms = field<int>(body, "connectTimeoutMs", 5000);
    if (const auto s = body.find("sandbox"); s != body.end() && !s->is_null()) {
        c.sandbox = sandbox_spec_from_json(*s);
    }
    validate(c);
    return c;
}

json to_json(const SandboxSpec& s) {
    return {{"image", s.image},
            {"memoryLimitMb", s.memory_limit_mb},
            {"network", s.network},
            {"volumes", s.volumes},
            {"timeoutSec", s.timeout_sec}};
}

json to_json(const ServerConfig& c) {
    json j = {{"name", c.name},
              {"transport", c.transport == TransportKind::stdio ? "stdio" : "sse"},
              {"riskLevel", c.risk_level},
              {"poolSize", c.pool_size},
              {"connectTimeoutMs", c.connect_timeout_ms}};
    if (c.transport == TransportKind::stdio) {
        j["command"] = c.command;
        j["args"] = c.args;
        j["env"] = c.env;
    } else {
        j["url"] = c.url;
        if (c.message_url) j["messageUrl"] = *c.message_url;
    }
    if (!c.tool_risk.empty()) j["toolRisk"] = c.tool_risk;
    if (c.sandbox) j["sandbox"] = to_json(*c.sandbox);
    return j;
}

BridgeConfig bridge_config_from_json(const json& body) {
    if (!body.is_object()) throw Error(ErrorCode::invalid_config, "bridge config must be a JSON object");
    BridgeConfig cfg;
    if (const auto servers = body.find("mcpServers"); servers != body.end()) {
        if (!servers->is_object()) throw Error(ErrorCode::invalid_config, "mcpServers must be an object");
        // nlohmann::json objects are key-sorted; keep that order (deterministic).
        for (const auto& [name, entry] : servers->items()) {
            cfg.servers.push_back(server_config_from_json(entry, name));
        }
    }
    cfg.sandbox_backend = field<std::string>(body, "sandboxBackend", cfg.sandbox_backend);
    cfg.container_runtime = field<std::string>(body, "containerRuntime", cfg.container_runtime);
    if (body.contains("sharedSecret")) cfg.shared_secret = field<std::string>(body, "sharedSecret", "");
    cfg.confirmation_ttl = std::chrono::seconds(field<int>(body, "confirmationTtlSec", 300));

    auto& sup = cfg.supervisor;
    auto ms = [&](const char* key, std::chrono::milliseconds def) {
        return std::chrono::milliseconds(field<long>(body, key, static_cast<long>(def.count())));
    };
    sup.heartbeat_interval = ms("heartbeatIntervalMs", sup.heartbeat_interval);
    sup.heartbeat_deadline = ms("heartbeatDeadlineMs", sup.heartbeat_deadline);
    sup.request_timeout = ms("requestTimeoutMs", sup.request_timeout);
    sup.max_reconnect_attempts = field<int>(body, "maxReconnectAttempts", sup.max_reconnect_attempts);
    return cfg;
}

json to_json(const BridgeConfig& cfg) {
    json servers = json::object();
    for (const auto& s : cfg.servers) {
        json entry = to_json(s);
        entry.erase("name");
        servers[s.name] = std::move(entry);
    }
    json j = {{"mcpServers", servers},
              {"sandboxBackend", cfg.sandbox_backend},
              {"containerRuntime", cfg.container_runtime},
              {"confirmationTtlSec", cfg.confirmation_ttl.count()},
              {"heartbeatIntervalMs", cfg.supervisor.heartbeat_interval.count()},
              {"heartbeatDeadlineMs", cfg.supervisor.heartbeat_deadline.count()},
              {"requestTimeoutMs", cfg.supervisor.request_timeout.count()},
              {"maxReconnectAttempts", cfg.supervisor.max_reconnect_attempts}};
    if (cfg.shared_secret) j["sharedSecret"] = *cfg.shared_secret;
    return j;
}

BridgeConfig load_bridge_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::invalid_config, "cannot open config file " + path);
    json body = json::parse(in, nullptr, false);
    if (body.is_discarded()) throw Error(ErrorCode::invalid_config, "config file is not valid JSON: " + path);
    return bridge_config_from_json(body);
}

}  // namespace bridgekit

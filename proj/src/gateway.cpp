#include "bridgekit/gateway.hpp"

#include "bridgekit/error.hpp"
#include "bridgekit/util.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace bridgekit {

ApiResponse error_response(ErrorCode code, const std::string& message) {
    return {http_status(code), {{"error", {{"code", std::string(to_string(code))}, {"message", message}}}}};
}

namespace {

json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    json j = json::parse(body, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::bad_request, "Request body is not valid JSON");
    return j;
}

template <typename F>
ApiResponse guarded(F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        return error_response(e.code(), e.what());
    } catch (const json::exception& e) {
        return error_response(ErrorCode::bad_request, e.what());
    } catch (const std::exception& e) {
        return {500, {{"error", {{"code", "internal_error"}, {"message", e.what()}}}}};
    }
}

json server_summary(const ServerConnection& s) {
    return {{"id", s.id},
            {"name", s.config.name},
            {"state", std::string(to_string(s.state))},
            {"riskLevel", s.config.risk_level},
            {"toolCount", s.capabilities.tools.size()},
            {"transport", s.config.transport == TransportKind::sse ? "sse" : "stdio"}};
}

}  // namespace

Gateway::Gateway(ServerManager& manager, ConfirmationStore& confirmations, SandboxBackend* sandbox,
                 GatewayOptions options)
    : manager_(manager), confirmations_(confirmations), sandbox_(sandbox), options_(std::move(options)) {}

Gateway::~Gateway() { stop(); }

ApiResponse Gateway::list_servers() const {
    json out = json::array();
    for (const auto& s : manager_.list()) out.push_back(server_summary(s));
    return {200, out};
}

ApiResponse Gateway::start_server(const std::string& body) {
    return guarded([&] {
        const json j = parse_body(body);
        if (!j.is_object()) throw Error(ErrorCode::bad_request, "Server configuration must be a JSON object");
        const auto config = server_config_from_json(j);
        const auto conn = manager_.start_server(config);
        return ApiResponse{201, {{"id", conn.id}, {"name", conn.config.name}, {"toolCount", conn.capabilities.tools.size()}}};
    });
}

ApiResponse Gateway::stop_server(const std::string& id) {
    return guarded([&] {
        manager_.stop_server(id);
        return ApiResponse{204, nullptr};
    });
}

ApiResponse Gateway::list_capabilities(const std::string& id, const std::string& kind) const {
    return guarded([&] {
        const auto conn = manager_.get(id);
        if (!conn) throw Error(ErrorCode::not_found, "Server not found");
        json out = json::array();
        if (kind == "tools") {
            for (const auto& t : conn->capabilities.tools) out.push_back(to_json(t));
        } else if (kind == "resources") {
            for (const auto& r : conn->capabilities.resources) out.push_back(r);
        } else {
            for (const auto& p : conn->capabilities.prompts) out.push_back(p);
        }
        return ApiResponse{200, out};
    });
}

ApiResponse Gateway::process_tool_request(const std::string& id, const std::string& tool, const std::string& body) {
    return guarded([&] {
        const auto conn = manager_.get(id);
        if (!conn) throw Error(ErrorCode::not_found, "Server not found");
        if (conn->capabilities.find_tool(tool) == nullptr) throw Error(ErrorCode::not_found, "Tool not found");
        const json params = parse_body(body);
        if (!params.is_object()) throw Error(ErrorCode::bad_request, "Tool arguments must be a JSON object");

        switch (classify(*conn, tool)) {
            case RiskLevel::direct: {
                ++direct_;
                json result = manager_.route_request(conn->id, tool, params);
                return ApiResponse{200, {{"serverId", conn->id}, {"tool", tool}, {"result", std::move(result)}}};
            }
            case RiskLevel::confirmation: {
                const auto pending = confirmations_.create(conn->id, tool, params);
                ++confirmation_;
                return ApiResponse{202,
                                   {{"status", "confirmation_required"},
                                    {"confirmationId", pending.confirmation_id},
                                    {"token", pending.token},
                                    {"expiresAt", to_rfc3339(pending.expires_at)},
                                    {"riskLevel", 2},
                                    {"serverId", conn->id},
                                    {"tool", tool}}};
            }
            case RiskLevel::sandboxed: {
                if (sandbox_ == nullptr) {
                    throw Error(ErrorCode::sandbox_unavailable, "No sandbox backend configured for high-risk tools");
                }
                ++sandboxed_;
                const SandboxSpec spec = conn->config.sandbox.value_or(SandboxSpec{});
                json result = sandbox_->execute(conn->config, tool, params, spec);
                return ApiResponse{200,
                                   {{"serverId", conn->id}, {"tool", tool}, {"sandboxed", true}, {"result", std::move(result)}}};
            }
        }
        throw Error(ErrorCode::bad_request, "unclassified risk level");
    });
}

ApiResponse Gateway::resolve_confirmation(const std::string& id, const std::string& body) {
    return guarded([&] {
        const json j = parse_body(body);
        if (!j.is_object() || !j.contains("token") || !j.at("token").is_string()) {
            throw Error(ErrorCode::bad_request, "Confirmation requires a string token");
        }
        const auto decision_text = j.value("decision", std::string("approve"));
        Decision decision;
        if (decision_text == "approve") {
            decision = Decision::approve;
        } else if (decision_text == "reject") {
            decision = Decision::reject;
        } else {
            throw Error(ErrorCode::bad_request, "decision must be \"approve\" or \"reject\"");
        }
        std::string server_id;
        std::string tool;
        auto outcome = confirmations_.resolve(id, j.at("token").get<std::string>(), decision,
                                              [&](const PendingConfirmation& p) {
                                                  server_id = p.server_id;
                                                  tool = p.tool;
                                                  ++confirmed_;
                                                  return manager_.route_request(p.server_id, p.tool, p.params);
                                              });
        if (std::holds_alternative<Cancelled>(outcome)) {
            return ApiResponse{200, {{"status", "cancelled"}, {"confirmationId", id}}};
        }
        return ApiResponse{200, {{"serverId", server_id}, {"tool", tool}, {"result", std::get<json>(std::move(outcome))}}};
    });
}

ApiResponse Gateway::health() const {
    json servers = json::array();
    for (const auto& s : manager_.list()) {
        servers.push_back({{"id", s.id},
                           {"name", s.config.name},
                           {"state", std::string(to_string(s.state))},
                           {"handshakeMs", s.handshake_ms}});
    }
    json failed = json::array();
    bool complete = false;
    {
        std::lock_guard lock(startup_mutex_);
        complete = startup_complete_;
        for (const auto& [name, error] : startup_failures_) failed.push_back({{"name", name}, {"error", error}});
    }
    return {200,
            {{"status", "ok"},
             {"uptimeMs", to_ms(Clock::now() - started_)},
             {"servers", servers},
             {"pendingConfirmations", confirmations_.live_count()},
             {"startup", {{"complete", complete}, {"failed", failed}}}}};
}

PathCounters Gateway::counters() const { return {direct_, confirmation_, confirmed_, sandboxed_}; }

void Gateway::record_startup_failure(const std::string& name, const std::string& error) {
    std::lock_guard lock(startup_mutex_);
    startup_failures_.emplace_back(name, error);
}

void Gateway::set_startup_complete() {
    std::lock_guard lock(startup_mutex_);
    startup_complete_ = true;
}

void Gateway::install_routes() {
    auto& svr = *server_;
    auto reply = [](httplib::Response& res, const ApiResponse& api) {
        res.status = api.status;
        if (api.status != 204) res.set_content(api.body.dump(), "application/json");
    };

    if (options_.shared_secret) {
        svr.set_pre_routing_handler([this, reply](const httplib::Request& req, httplib::Response& res) {
            if (req.path == "/health") return httplib::Server::HandlerResponse::Unhandled;
            if (constant_time_equal(req.get_header_value("X-Bridge-Secret"), *options_.shared_secret)) {
                return httplib::Server::HandlerResponse::Unhandled;
            }
            reply(res, {401, {{"error", {{"code", "unauthorized"}, {"message", "Missing or invalid shared secret"}}}}});
            return httplib::Server::HandlerResponse::Handled;
        });
    }

    svr.Get("/health", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, health()); });
    svr.Get("/servers", [this, reply](const httplib::Request&, httplib::Response& res) { reply(res, list_servers()); });
    svr.Post("/servers", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, start_server(req.body));
    });
    svr.Delete("/servers/:id", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, stop_server(req.path_params.at("id")));
    });
    for (const char* kind : {"tools", "resources", "prompts"}) {
        svr.Get(std::string("/servers/:id/") + kind,
                [this, reply, kind = std::string(kind)](const httplib::Request& req, httplib::Response& res) {
                    reply(res, list_capabilities(req.path_params.at("id"), kind));
                });
    }
    svr.Post("/servers/:id/tools/:tool", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, process_tool_request(req.path_params.at("id"), req.path_params.at("tool"), req.body));
    });
    svr.Post("/confirmations/:id", [this, reply](const httplib::Request& req, httplib::Response& res) {
        reply(res, resolve_confirmation(req.path_params.at("id"), req.body));
    });
    svr.set_error_handler([reply](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        if (res.status == 404) {
            reply(res, error_response(ErrorCode::not_found, "Route not found"));
        } else {
            reply(res, {res.status, {{"error", {{"code", "http_error"}, {"message", httplib::status_message(res.status)}}}}});
        }
    });
    svr.set_exception_handler([reply](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "unknown error";
        try {
            if (ep) std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        reply(res, {500, {{"error", {{"code", "internal_error"}, {"message", what}}}}});
    });
}

int Gateway::start() {
    if (server_) return port_;
    server_ = std::make_unique<httplib::Server>();
    const auto threads = options_.threads;
    server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    server_->set_tcp_nodelay(true);
    server_->set_keep_alive_max_count(100000);
    server_->set_keep_alive_timeout(5);
    server_->set_payload_max_length(16u << 20);
    install_routes();

    port_ = options_.port == 0 ? server_->bind_to_any_port(options_.host)
                               : (server_->bind_to_port(options_.host, options_.port) ? options_.port : -1);
    if (port_ < 0) {
        server_.reset();
        throw Error(ErrorCode::invalid_config,
                    "cannot listen on " + options_.host + ":" + std::to_string(options_.port));
    }
    started_ = Clock::now();
    listener_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    spdlog::info("gateway listening on {}:{}", options_.host, port_);
    return port_;
}

void Gateway::stop() {
    if (!server_) return;
    server_->stop();
    if (listener_.joinable()) listener_.join();
    server_.reset();
}

Bridge::Bridge(BridgeConfig config, GatewayOptions options)
    : config_(std::move(config)),
      manager_(config_.supervisor),
      confirmations_(config_.confirmation_ttl) {
    if (!options.shared_secret) options.shared_secret = config_.shared_secret;
    sandbox_ = make_sandbox_backend(config_.sandbox_backend, config_.container_runtime);
    gateway_ = std::make_unique<Gateway>(manager_, confirmations_, sandbox_.get(), std::move(options));
}

Bridge::~Bridge() { stop(); }

int Bridge::start() {
    const int port = gateway_->start();
    startup_ = std::thread([this] {
        std::vector<std::thread> starters;
        starters.reserve(config_.servers.size());
        for (const auto& server : config_.servers) {
            starters.emplace_back([this, server] {
                try {
                    const auto conn = manager_.start_server(server);
                    spdlog::info("server {} ready in {:.1f} ms with {} tools", server.name, conn.handshake_ms,
                                 conn.capabilities.tools.size());
                } catch (const std::exception& e) {
                    spdlog::error("server {} failed to start: {}", server.name, e.what());
                    gateway_->record_startup_failure(server.name, e.what());
                }
            });
        }
        for (auto& t : starters) t.join();
        gateway_->set_startup_complete();
        manager_.start_supervisor();
    });
    return port;
}

void Bridge::wait_for_startup() {
    if (startup_.joinable()) startup_.join();
}

void Bridge::stop() {
    wait_for_startup();
    if (gateway_) gateway_->stop();
    manager_.stop_all();
}

}  // namespace bridgekit

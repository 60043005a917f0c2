#include "bridgekit/gateway.hpp"
#include "support.hpp"

#include <httplib.h>
#include <doctest.h>

#include <csignal>

using namespace bridgekit;
using namespace std::chrono_literals;
using testsupport::behavior;

namespace {

mock::MockTool tool(std::string name, mock::Handler h) {
    mock::MockTool t;
    t.name = std::move(name);
    t.handler = h;
    return t;
}

/// Manager, store, process sandbox and a gateway on a free port, plus three
/// mock servers: one per risk level, all writing to their own counter file.
struct Fixture {
    testsupport::TempDir dir;
    ServerManager manager{testsupport::fast_supervisor()};
    ConfirmationStore store;
    ProcessSandbox sandbox;
    Gateway gateway;
    std::unique_ptr<httplib::Client> client;
    std::map<int, std::string> ids;

    explicit Fixture(GatewayOptions options = test_options()) : gateway(manager, store, &sandbox, options) {
        for (int level = 1; level <= 3; ++level) {
            auto b = behavior("level" + std::to_string(level),
                              {tool("echo", mock::Handler::echo), tool("count", mock::Handler::counter)});
            b.counter_file = counter(level);
            ids[level] = manager.start_server(testsupport::mock_config(b, level)).id;
        }
        const int port = gateway.start();
        client = std::make_unique<httplib::Client>("127.0.0.1", port);
        client->set_read_timeout(10, 0);
    }
    ~Fixture() {
        gateway.stop();
        manager.stop_all();
    }

    static GatewayOptions test_options() {
        GatewayOptions o;
        o.host = "127.0.0.1";
        o.port = 0;
        o.threads = 8;
        return o;
    }

    std::string counter(int level) const { return dir.file("level" + std::to_string(level) + ".count"); }

    httplib::Result post(const std::string& path, const json& body) {
        return client->Post(path, body.dump(), "application/json");
    }
};

json body_of(const httplib::Result& r) { return json::parse(r->body); }

}  // namespace

TEST_CASE("error codes map onto one http status each") {
    CHECK(http_status(ErrorCode::not_found) == 404);
    CHECK(http_status(ErrorCode::bad_request) == 400);
    CHECK(http_status(ErrorCode::parse_error) == 400);
    CHECK(http_status(ErrorCode::encoding_error) == 400);
    CHECK(http_status(ErrorCode::request_timeout) == 504);
    CHECK(http_status(ErrorCode::sandbox_timeout) == 504);
    CHECK(http_status(ErrorCode::server_unavailable) == 503);
    CHECK(http_status(ErrorCode::resource_exhausted) == 503);
    CHECK(http_status(ErrorCode::sandbox_unavailable) == 503);
    CHECK(http_status(ErrorCode::tool_error) == 502);
    CHECK(http_status(ErrorCode::spawn_failed) == 502);
    const auto r = error_response(ErrorCode::not_found, "Server not found");
    CHECK(r.status == 404);
    CHECK(r.body["error"]["code"] == "not_found");
    CHECK(r.body["error"]["message"] == "Server not found");
}

TEST_CASE("listing servers and capabilities") {
    Fixture f;
    auto r = f.client->Get("/servers");
    REQUIRE(r);
    CHECK(r->status == 200);
    const auto servers = body_of(r);
    REQUIRE(servers.size() == 3);
    for (const auto& s : servers) {
        CHECK(s["state"] == "healthy");
        CHECK(s["toolCount"] == 2);
        CHECK(s["transport"] == "stdio");
    }
    r = f.client->Get("/servers/" + f.ids[1] + "/tools");
    REQUIRE(r);
    CHECK(r->status == 200);
    CHECK(body_of(r).size() == 2);
    CHECK(body_of(r)[0].contains("inputSchema"));
    r = f.client->Get("/servers/level1/prompts");
    CHECK(r->status == 200);
    CHECK(body_of(r).empty());
    r = f.client->Get("/servers/nope/tools");
    CHECK(r->status == 404);
    CHECK(body_of(r)["error"]["message"] == "Server not found");
}

TEST_CASE("level 1 executes immediately") {
    Fixture f;
    const auto r = f.post("/servers/" + f.ids[1] + "/tools/echo", {{"message", "hi"}});
    REQUIRE(r);
    CHECK(r->status == 200);
    const auto b = body_of(r);
    CHECK(b["result"]["content"][0]["text"] == "hi");
    CHECK(b["serverId"] == f.ids[1]);
    CHECK(f.gateway.counters().direct == 1);
}

TEST_CASE("level 2 waits for approval and executes once") {
    Fixture f;
    auto r = f.post("/servers/" + f.ids[2] + "/tools/count", json::object());
    REQUIRE(r);
    CHECK(r->status == 202);
    const auto pending = body_of(r);
    CHECK(pending["status"] == "confirmation_required");
    CHECK(pending["riskLevel"] == 2);
    CHECK(mock::read_counter(f.counter(2)) == 0);
    CHECK(body_of(f.client->Get("/health"))["pendingConfirmations"] == 1);

    const std::string path = "/confirmations/" + pending["confirmationId"].get<std::string>();
    r = f.post(path, {{"token", "wrong"}});
    CHECK(r->status == 404);
    CHECK(body_of(r)["error"]["message"] == "Invalid confirmation ID or expired request");

    r = f.post(path, {{"token", pending["token"]}});
    CHECK(r->status == 200);
    CHECK(body_of(r)["result"]["structuredContent"]["count"] == 1);
    CHECK(mock::read_counter(f.counter(2)) == 1);

    r = f.post(path, {{"token", pending["token"]}});
    CHECK(r->status == 404);
    CHECK(mock::read_counter(f.counter(2)) == 1);
    CHECK(body_of(f.client->Get("/health"))["pendingConfirmations"] == 0);
    CHECK(f.gateway.counters().confirmation == 1);
    CHECK(f.gateway.counters().confirmed == 1);
}

TEST_CASE("level 2 rejection never executes") {
    Fixture f;
    const auto pending = body_of(f.post("/servers/level2/tools/count", json::object()));
    const std::string path = "/confirmations/" + pending["confirmationId"].get<std::string>();
    auto r = f.post(path, {{"token", pending["token"]}, {"decision", "reject"}});
    CHECK(r->status == 200);
    CHECK(body_of(r)["status"] == "cancelled");
    r = f.post(path, {{"token", pending["token"]}});
    CHECK(r->status == 404);
    CHECK(mock::read_counter(f.counter(2)) == 0);
    r = f.post(path, {{"decision", "approve"}});
    CHECK(r->status == 400);
}

TEST_CASE("level 3 runs in the sandbox and not on the registered instance") {
    Fixture f;
    const auto r = f.post("/servers/" + f.ids[3] + "/tools/count", json::object());
    REQUIRE(r);
    CHECK(r->status == 200);
    const auto b = body_of(r);
    CHECK(b["sandboxed"] == true);
    CHECK(f.sandbox.executions() == 1);
    CHECK(f.manager.get(f.ids[3])->requests_routed == 0);
    CHECK(f.gateway.counters().sandboxed == 1);
}

TEST_CASE("request validation and unknown routes") {
    Fixture f;
    auto r = f.post("/servers/level1/tools/missing", json::object());
    CHECK(r->status == 404);
    CHECK(body_of(r)["error"]["message"] == "Tool not found");
    r = f.client->Post("/servers/level1/tools/echo", "[1,2]", "application/json");
    CHECK(r->status == 400);
    r = f.client->Post("/servers/level1/tools/echo", "{not json", "application/json");
    CHECK(r->status == 400);
    r = f.client->Get("/no/such/route");
    CHECK(r->status == 404);
    CHECK(body_of(r)["error"]["code"] == "not_found");
}

TEST_CASE("servers can be added and removed over http") {
    Fixture f;
    const auto cfg = to_json(testsupport::mock_config(behavior("added", {tool("echo", mock::Handler::echo)})));
    auto r = f.post("/servers", cfg);
    REQUIRE(r);
    CHECK(r->status == 201);
    const auto id = body_of(r)["id"].get<std::string>();
    CHECK(body_of(r)["toolCount"] == 1);
    CHECK(f.post("/servers", cfg)->status == 502);
    r = f.post("/servers", {{"name", "broken"}, {"command", ""}});
    CHECK(r->status == 502);
    CHECK(body_of(r)["error"]["message"].get<std::string>().find("Invalid server configuration") == 0);
    r = f.client->Delete("/servers/" + id);
    CHECK(r->status == 204);
    CHECK(f.client->Delete("/servers/" + id)->status == 404);
    CHECK(body_of(f.client->Get("/servers")).size() == 3);
}

TEST_CASE("health reports startup state") {
    Fixture f;
    f.gateway.record_startup_failure("ghost", "Failed to start MCP server: boom");
    f.gateway.set_startup_complete();
    const auto h = body_of(f.client->Get("/health"));
    CHECK(h["status"] == "ok");
    CHECK(h["servers"].size() == 3);
    CHECK(h["startup"]["complete"] == true);
    CHECK(h["startup"]["failed"][0]["name"] == "ghost");
}

TEST_CASE("a shared secret guards every route except health") {
    auto options = Fixture::test_options();
    options.shared_secret = "s3cret";
    Fixture f(options);
    CHECK(f.client->Get("/health")->status == 200);
    auto r = f.client->Get("/servers");
    CHECK(r->status == 401);
    r = f.client->Get("/servers", httplib::Headers{{"X-Bridge-Secret", "nope"}});
    CHECK(r->status == 401);
    r = f.client->Get("/servers", httplib::Headers{{"X-Bridge-Secret", "s3cret"}});
    CHECK(r->status == 200);
}

TEST_CASE("a degraded server answers 503") {
    Fixture f;
    ::kill(f.manager.get(f.ids[1])->pids.at(0), SIGKILL);
    REQUIRE(testsupport::wait_until([&] { return f.manager.get(f.ids[1])->state == ServerState::degraded; }, 2000ms));
    const auto r = f.post("/servers/level1/tools/echo", json::object());
    CHECK(r->status == 503);
    CHECK(body_of(r)["error"]["code"] == "server_unavailable");
}

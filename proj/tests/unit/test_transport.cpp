#include "bridgekit/rpc_channel.hpp"
#include "bridgekit/transport.hpp"
#include "support.hpp"

#include <doctest.h>

#include <thread>

using namespace bridgekit;
using namespace std::chrono_literals;
using testsupport::behavior;

namespace {

std::vector<std::pair<std::string, std::string>> parse_all(const std::vector<std::string>& chunks) {
    std::vector<std::pair<std::string, std::string>> events;
    SseParser parser([&](const std::string& e, const std::string& d) { events.emplace_back(e, d); });
    for (const auto& c : chunks) parser.feed(c);
    return events;
}

std::unique_ptr<RpcChannel> mock_channel(const mock::MockBehavior& b) {
    const auto cfg = testsupport::mock_config(b);
    SpawnOptions spawn;
    spawn.argv.push_back(cfg.command);
    spawn.argv.insert(spawn.argv.end(), cfg.args.begin(), cfg.args.end());
    auto channel = std::make_unique<RpcChannel>(std::make_unique<StdioTransport>(spawn));
    channel->start();
    return channel;
}

mock::MockTool tool(std::string name, mock::Handler h) {
    mock::MockTool t;
    t.name = std::move(name);
    t.handler = h;
    return t;
}

}  // namespace

TEST_CASE("sse parser splits events on blank lines") {
    const auto events = parse_all({"event: endpoint\ndata: /message?x=1\n\n", "data: {\"a\":1}\n\n"});
    REQUIRE(events.size() == 2);
    CHECK(events[0] == std::pair<std::string, std::string>{"endpoint", "/message?x=1"});
    CHECK(events[1] == std::pair<std::string, std::string>{"message", "{\"a\":1}"});
}

TEST_CASE("sse parser handles chunk boundaries, CRLF, CR and comments") {
    const std::string stream = ": keepalive\r\nevent: message\r\ndata: one\r\ndata: two\r\n\r\ndata: three\r\rdata:four\n\n";
    const auto whole = parse_all({stream});
    REQUIRE(whole.size() == 3);
    CHECK(whole[0].second == "one\ntwo");
    CHECK(whole[1].second == "three");
    CHECK(whole[2].second == "four");

    std::vector<std::string> bytes;
    for (char c : stream) bytes.emplace_back(1, c);
    CHECK(parse_all(bytes) == whole);
}

TEST_CASE("sse parser ignores events without data") {
    CHECK(parse_all({"event: ping\n\n"}).empty());
}

TEST_CASE("handshake against a stdio mock follows pagination") {
    auto b = behavior("paged", {tool("a", mock::Handler::echo), tool("b", mock::Handler::sum),
                                tool("c", mock::Handler::echo), tool("d", mock::Handler::echo),
                                tool("e", mock::Handler::echo)});
    b.page_size = 2;
    b.resources.push_back({{"uri", "file:///x"}, {"name", "x"}});
    b.prompts.push_back({{"name", "greet"}});
    auto channel = mock_channel(b);
    const auto caps = initialize_handshake(*channel, 5000ms);
    REQUIRE(caps.tools.size() == 5);
    CHECK(caps.tools[0].name == "a");
    CHECK(caps.tools[4].name == "e");
    CHECK(caps.resources.size() == 1);
    CHECK(caps.prompts.size() == 1);
    CHECK(caps.find_tool("c") != nullptr);
    CHECK(caps.find_tool("z") == nullptr);
    channel->close(ErrorCode::server_stopped, "done", 500ms);
}

TEST_CASE("tool calls return results and error responses") {
    auto channel = mock_channel(behavior("m", {tool("sum", mock::Handler::sum), tool("boom", mock::Handler::fail)}));
    initialize_handshake(*channel, 5000ms);
    const auto r = channel->call("tools/call", {{"name", "sum"}, {"arguments", {{"a", 2}, {"b", 40}}}}, 3000ms);
    CHECK(r["structuredContent"]["sum"] == 42);
    CHECK_THROWS_AS(channel->call("tools/call", {{"name", "boom"}, {"arguments", json::object()}}, 3000ms), RpcFault);
    try {
        channel->call("nope/method", json::object(), 3000ms);
        FAIL("expected a fault");
    } catch (const RpcFault& f) {
        CHECK(f.rpc_error().code == rpc_codes::method_not_found);
    }
    channel->close(ErrorCode::server_stopped, "done", 500ms);
}

TEST_CASE("concurrent callers each receive their own response") {
    auto channel = mock_channel(behavior("m", {tool("sum", mock::Handler::sum)}));
    initialize_handshake(*channel, 5000ms);
    constexpr int kThreads = 8;
    constexpr int kCalls = 25;
    std::atomic<int> mismatches{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < kThreads; ++t) {
        threads.emplace_back([&, t] {
            for (int i = 0; i < kCalls; ++i) {
                const auto r = channel->call("tools/call",
                                             {{"name", "sum"}, {"arguments", {{"a", t * 1000}, {"b", i}}}}, 5000ms);
                if (r["structuredContent"]["sum"] != t * 1000 + i) ++mismatches;
            }
        });
    }
    for (auto& th : threads) th.join();
    CHECK(mismatches == 0);
    CHECK(channel->in_flight() == 0);
    channel->close(ErrorCode::server_stopped, "done", 500ms);
}

TEST_CASE("malformed lines are counted and skipped") {
    auto b = behavior("noisy", {tool("echo", mock::Handler::echo)});
    b.faults.malformed_every = 3;
    auto channel = mock_channel(b);
    initialize_handshake(*channel, 5000ms);
    for (int i = 0; i < 20; ++i) {
        const auto r = channel->call("tools/call", {{"name", "echo"}, {"arguments", {{"message", std::to_string(i)}}}}, 3000ms);
        CHECK(r["content"][0]["text"] == std::to_string(i));
    }
    CHECK(channel->malformed_frames() > 0);
    CHECK(channel->open());
    channel->close(ErrorCode::server_stopped, "done", 500ms);
}

TEST_CASE("a server that never answers initialize times out") {
    auto b = behavior("hang", {tool("echo", mock::Handler::echo)});
    b.faults.hang_on_init = true;
    auto channel = mock_channel(b);
    const auto start = Clock::now();
    try {
        initialize_handshake(*channel, 400ms);
        FAIL("expected a timeout");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::connect_timeout);
        CHECK(std::string(e.what()).find("Failed to connect to MCP server") != std::string::npos);
    }
    CHECK(Clock::now() - start < 3s);
    channel->close(ErrorCode::server_stopped, "done", 200ms);
}

TEST_CASE("spawning a missing executable fails") {
    SpawnOptions spawn;
    spawn.argv = {"/nonexistent/bridgekit-no-such-binary"};
    try {
        StdioTransport t(spawn);
        FAIL("expected spawn failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::spawn_failed);
    }
}

TEST_CASE("a crashing server fails the in-flight call and reports close") {
    auto b = behavior("crash", {tool("echo", mock::Handler::echo)});
    b.faults.crash_after = 1;
    const auto cfg = testsupport::mock_config(b);
    SpawnOptions spawn;
    spawn.argv.push_back(cfg.command);
    spawn.argv.insert(spawn.argv.end(), cfg.args.begin(), cfg.args.end());
    RpcChannel channel(std::make_unique<StdioTransport>(spawn));
    std::atomic<bool> closed{false};
    channel.start([&](const std::string&) { closed = true; });
    initialize_handshake(channel, 5000ms);
    CHECK_NOTHROW(channel.call("tools/call", {{"name", "echo"}, {"arguments", json::object()}}, 3000ms));
    try {
        channel.call("tools/call", {{"name", "echo"}, {"arguments", json::object()}}, 3000ms);
        FAIL("expected failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::transport_failure);
    }
    CHECK(testsupport::wait_until([&] { return closed.load(); }, 2000ms));
    CHECK_FALSE(channel.alive());
}

TEST_CASE("request timeout leaves the channel usable") {
    mock::MockTool slow = tool("slow", mock::Handler::sleep);
    slow.sleep_ms = 600;
    auto channel = mock_channel(behavior("slow", {slow, tool("echo", mock::Handler::echo)}));
    initialize_handshake(*channel, 5000ms);
    try {
        channel->call("tools/call", {{"name", "slow"}, {"arguments", json::object()}}, 100ms);
        FAIL("expected timeout");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::request_timeout);
    }
    const auto r = channel->call("tools/call", {{"name", "echo"}, {"arguments", {{"message", "after"}}}}, 3000ms);
    CHECK(r["content"][0]["text"] == "after");
    channel->close(ErrorCode::server_stopped, "done", 500ms);
}

TEST_CASE("sse transport talks to an sse mock") {
    std::atomic<bool> stop{false};
    std::atomic<int> port{0};
    const auto b = behavior("sse", {tool("sum", mock::Handler::sum)});
    std::thread server([&] { mock::serve_mock_sse(b, "127.0.0.1", 0, stop, &port); });
    REQUIRE(testsupport::wait_until([&] { return port.load() > 0; }, 5000ms));
    {
        RpcChannel channel(std::make_unique<SseTransport>(
            "http://127.0.0.1:" + std::to_string(port.load()) + "/sse", std::nullopt));
        channel.start();
        const auto caps = initialize_handshake(channel, 5000ms);
        REQUIRE(caps.tools.size() == 1);
        const auto r = channel.call("tools/call", {{"name", "sum"}, {"arguments", {{"a", 1}, {"b", 2}}}}, 3000ms);
        CHECK(r["structuredContent"]["sum"] == 3);
        channel.close(ErrorCode::server_stopped, "done", 500ms);
    }
    stop = true;
    server.join();
}

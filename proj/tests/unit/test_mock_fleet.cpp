#include "bridgekit/error.hpp"
#include "bridgekit/mock_fleet.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>

using namespace bridgekit;
using namespace bridgekit::mock;

namespace {

MockBehavior sample_behavior() {
    MockBehavior b;
    b.server_name = "sample";
    b.tools = {{"echo", Handler::echo, "", 0, -32000},
               {"add", Handler::sum, "", 0, -32000},
               {"nap", Handler::sleep, "", 5, -32000},
               {"boom", Handler::fail, "", 0, -32042},
               {"tick", Handler::counter, "", 0, -32000}};
    return b;
}

json request(int id, const std::string& method, json params = json::object()) {
    return {{"jsonrpc", "2.0"}, {"id", id}, {"method", method}, {"params", std::move(params)}};
}

json one(MockEngine& engine, const json& msg) {
    const auto lines = engine.handle(msg.dump());
    REQUIRE(lines.size() == 1);
    return json::parse(lines[0]);
}

json call(MockEngine& engine, int id, const std::string& tool, json args) {
    return one(engine, request(id, "tools/call", {{"name", tool}, {"arguments", std::move(args)}}));
}

}  // namespace

TEST_CASE("initialize echoes the requested protocol version") {
    MockEngine engine(sample_behavior());
    const auto r = one(engine, request(1, "initialize", {{"protocolVersion", "2025-03-26"}}));
    CHECK(r["id"] == 1);
    CHECK(r["result"]["protocolVersion"] == "2025-03-26");
    CHECK(r["result"]["serverInfo"]["name"] == "sample");
    CHECK(one(engine, request(2, "ping"))["result"] == json::object());
}

TEST_CASE("each handler answers deterministically") {
    testsupport::TempDir dir;
    auto b = sample_behavior();
    b.counter_file = dir.file("c.count");
    MockEngine engine(b);

    CHECK(call(engine, 1, "echo", {{"message", "hi"}})["result"]["content"][0]["text"] == "hi");
    CHECK(call(engine, 2, "echo", {{"x", 1}})["result"]["structuredContent"] == json{{"x", 1}});
    CHECK(call(engine, 3, "add", {{"a", 2}, {"b", 3}})["result"]["structuredContent"]["sum"] == 5);
    CHECK(call(engine, 4, "add", {{"a", 0.5}, {"b", 0.25}})["result"]["structuredContent"]["sum"] == 0.75);
    CHECK(call(engine, 5, "add", {{"a", "x"}})["error"]["code"] == rpc_codes::invalid_params);
    CHECK(call(engine, 6, "nap", json::object())["result"]["structuredContent"]["ms"] == 5);
    CHECK(call(engine, 7, "nap", {{"ms", 1}})["result"]["structuredContent"]["ms"] == 1);
    CHECK(call(engine, 8, "boom", json::object())["error"]["code"] == -32042);
    CHECK(call(engine, 9, "tick", json::object())["result"]["structuredContent"]["count"] == 1);
    CHECK(call(engine, 10, "tick", json::object())["result"]["structuredContent"]["count"] == 2);
    CHECK(call(engine, 11, "nope", json::object())["error"]["code"] == rpc_codes::invalid_params);
    CHECK(engine.counter_executions() == 2);
    CHECK(engine.tool_calls() == 11);
    CHECK(read_counter(b.counter_file) == 2);
    CHECK(read_counter(dir.file("absent.count")) == 0);

    // Same input, same output.
    MockEngine a(sample_behavior()), c(sample_behavior());
    for (int i = 0; i < 5; ++i) {
        const auto msg = request(i, "tools/call", {{"name", "add"}, {"arguments", {{"a", i}, {"b", 7}}}}).dump();
        CHECK(a.handle(msg) == c.handle(msg));
    }
}

TEST_CASE("protocol errors") {
    MockEngine engine(sample_behavior());
    const auto bad = engine.handle("{not json");
    REQUIRE(bad.size() == 1);
    CHECK(json::parse(bad[0])["error"]["code"] == rpc_codes::parse_error);
    CHECK(json::parse(bad[0])["id"].is_null());
    CHECK(one(engine, request(3, "bogus/method"))["error"]["code"] == rpc_codes::method_not_found);
    CHECK(engine.handle(R"({"jsonrpc":"2.0","method":"notifications/initialized"})").empty());
    CHECK(engine.handle(R"({"jsonrpc":"2.0","id":9,"result":{}})").empty());
}

TEST_CASE("tools/list pages through cursors") {
    auto b = sample_behavior();
    b.page_size = 2;
    MockEngine engine(b);
    std::vector<std::string> names;
    json params = json::object();
    int pages = 0;
    for (;;) {
        const auto r = one(engine, request(pages, "tools/list", params))["result"];
        ++pages;
        for (const auto& t : r["tools"]) {
            names.push_back(t["name"]);
            CHECK(t["inputSchema"]["type"] == "object");
        }
        if (!r.contains("nextCursor")) break;
        params = {{"cursor", r["nextCursor"]}};
    }
    CHECK(pages == 3);
    CHECK(names == std::vector<std::string>{"echo", "add", "nap", "boom", "tick"});

    MockEngine all(sample_behavior());
    const auto r = one(all, request(1, "tools/list"))["result"];
    CHECK(r["tools"].size() == 5);
    CHECK_FALSE(r.contains("nextCursor"));
}

TEST_CASE("fault injection") {
    SUBCASE("crash after N calls") {
        auto b = sample_behavior();
        b.faults.crash_after = 2;
        MockEngine engine(b);
        call(engine, 1, "echo", json::object());
        call(engine, 2, "echo", json::object());
        CHECK(engine.handle(request(3, "tools/call", {{"name", "echo"}}).dump()).empty());
        CHECK(engine.crashed());
        CHECK(engine.handle(request(4, "ping").dump()).empty());
    }
    SUBCASE("hang on initialize") {
        auto b = sample_behavior();
        b.faults.hang_on_init = true;
        MockEngine engine(b);
        CHECK(engine.handle(request(1, "initialize").dump()).empty());
        CHECK(engine.handle(request(2, "ping").dump()).size() == 1);
    }
    SUBCASE("every Kth line is garbage") {
        auto b = sample_behavior();
        b.faults.malformed_every = 3;
        MockEngine engine(b);
        std::vector<std::string> lines;
        for (int i = 0; i < 6; ++i) {
            for (auto& l : engine.handle(request(i, "ping").dump())) lines.push_back(std::move(l));
        }
        std::size_t garbage = 0, valid = 0;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            const auto j = json::parse(lines[i], nullptr, false);
            if (j.is_discarded()) {
                ++garbage;
                CHECK((i + 1) % 3 == 0);
            } else {
                ++valid;
            }
        }
        CHECK(valid == 6);
        CHECK(garbage == 2);
        CHECK(lines.size() == 8);
    }
}

TEST_CASE("behavior json round-trips") {
    auto b = sample_behavior();
    b.faults.crash_after = 4;
    b.faults.malformed_every = 7;
    b.counter_file = "/tmp/x.count";
    b.page_size = 3;
    b.latency_ms = 2;
    b.resources = {{{"uri", "file:///a"}}};
    b.prompts = {{{"name", "p"}}};
    const auto j = to_json(b);
    const auto back = behavior_from_json(j);
    CHECK(to_json(back) == j);
    CHECK(back.tools.size() == 5);
    CHECK(back.tools[2].sleep_ms == 5);
    CHECK(back.tools[3].fail_code == -32042);
    CHECK(*back.faults.crash_after == 4);
    CHECK(back.page_size == 3);

    CHECK_THROWS_AS(behavior_from_json(json::array()), Error);
    CHECK_THROWS_AS(behavior_from_json({{"faults", {{"malformedEveryK", 0}}}}), Error);
    CHECK_THROWS_AS(behavior_from_json({{"tools", {{{"name", "t"}, {"handler", "teleport"}}}}}), Error);
}

TEST_CASE("default fleet shape") {
    FleetOptions options;
    options.executable = testsupport::kBinary;
    options.counter_dir = "/tmp/fleet";
    const auto fleet = default_fleet(options);
    REQUIRE(fleet.size() == 4);
    CHECK(fleet[0].name == "filesystem");
    CHECK(fleet[1].name == "filesystem-medium");
    CHECK(fleet[2].name == "memory");
    CHECK(fleet[3].name == "everything");
    CHECK(fleet[0].risk_level == 1);
    CHECK(fleet[1].risk_level == 2);
    CHECK(fleet[2].risk_level == 1);
    CHECK(default_fleet_tool_count() == 18);
    for (const auto& s : fleet) {
        CHECK(s.command == testsupport::kBinary);
        REQUIRE(s.args.size() == 3);
        CHECK(s.args[0] == "mock");
        const auto b = behavior_from_json(json::parse(s.args[2]));
        CHECK(b.server_name == s.name);
        CHECK(b.latency_ms == 1);
        CHECK(b.counter_file == "/tmp/fleet/" + s.name + ".count");
    }
}

TEST_CASE("stdio front end serves a real session") {
    testsupport::TempDir dir;
    auto b = sample_behavior();
    b.counter_file = dir.file("c.count");
    const auto cfg = mock_server_config(testsupport::kBinary, b, 1);
    std::string input;
    input += request(1, "initialize").dump() + "\n";
    input += request(2, "tools/call", {{"name", "tick"}, {"arguments", json::object()}}).dump() + "\n";
    const auto in_path = dir.file("in.jsonl");
    const auto out_path = dir.file("out.jsonl");
    {
        std::ofstream(in_path) << input;
    }
    std::string cmd = "'" + cfg.command + "'";
    for (const auto& a : cfg.args) {
        std::string quoted;
        for (char ch : a) quoted += ch == '\'' ? std::string("'\\''") : std::string(1, ch);
        cmd += " '" + quoted + "'";
    }
    cmd += " < '" + in_path + "' > '" + out_path + "'";
    REQUIRE(std::system(cmd.c_str()) == 0);
    std::ifstream out(out_path);
    std::string line;
    std::vector<json> replies;
    while (std::getline(out, line)) replies.push_back(json::parse(line));
    REQUIRE(replies.size() == 2);
    CHECK(replies[0]["id"] == 1);
    CHECK(replies[1]["result"]["structuredContent"]["count"] == 1);
    CHECK(read_counter(b.counter_file) == 1);
}

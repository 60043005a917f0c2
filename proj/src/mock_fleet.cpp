#include "bridgekit/mock_fleet.hpp"

#include "bridgekit/error.hpp"
#include "bridgekit/rpc_channel.hpp"
#include "bridgekit/util.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <httplib.h>

#include <algorithm>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

namespace bridgekit::mock {

namespace {

Handler handler_from_string(const std::string& s) {
    if (s == "echo") return Handler::echo;
    if (s == "sum") return Handler::sum;
    if (s == "sleep") return Handler::sleep;
    if (s == "fail") return Handler::fail;
    if (s == "counter") return Handler::counter;
    throw Error(ErrorCode::invalid_config, "unknown mock handler: " + s);
}

const char* handler_name(Handler h) {
    switch (h) {
        case Handler::echo: return "echo";
        case Handler::sum: return "sum";
        case Handler::sleep: return "sleep";
        case Handler::fail: return "fail";
        case Handler::counter: return "counter";
    }
    return "echo";
}

json input_schema(Handler h) {
    switch (h) {
        case Handler::echo:
            return {{"type", "object"}, {"properties", {{"message", {{"type", "string"}}}}}};
        case Handler::sum:
            return {{"type", "object"},
                    {"properties", {{"a", {{"type", "number"}}}, {"b", {{"type", "number"}}}}},
                    {"required", {"a", "b"}}};
        case Handler::sleep:
            return {{"type", "object"}, {"properties", {{"ms", {{"type", "integer"}}}}}};
        case Handler::fail:
        case Handler::counter:
            return {{"type", "object"}, {"properties", json::object()}};
    }
    return json::object();
}

json text_result(const std::string& text, json structured) {
    json r = {{"content", {{{"type", "text"}, {"text", text}}}}, {"isError", false}};
    if (!structured.is_null()) r["structuredContent"] = std::move(structured);
    return r;
}

json response(const json& id, json result) { return {{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}}; }

json error_response(const json& id, std::int64_t code, const std::string& message) {
    return {{"jsonrpc", "2.0"}, {"id", id}, {"error", {{"code", code}, {"message", message}}}};
}

struct CallOutcome {
    json result;
    std::optional<RpcError> error;
};

void append_counter_line(const std::string& path) {
    if (path.empty()) return;
    const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) return;
    const char line[] = "1\n";
    [[maybe_unused]] const auto n = ::write(fd, line, sizeof(line) - 1);
    ::close(fd);
}

}  // namespace

MockBehavior behavior_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::invalid_config, "mock behavior must be a JSON object");
    MockBehavior b;
    b.server_name = j.value("name", b.server_name);
    for (const auto& t : j.value("tools", json::array())) {
        MockTool tool;
        tool.name = t.at("name").get<std::string>();
        tool.handler = handler_from_string(t.value("handler", "echo"));
        tool.description = t.value("description", std::string("Mock ") + handler_name(tool.handler) + " tool");
        tool.sleep_ms = t.value("ms", 0);
        tool.fail_code = t.value("code", -32000);
        b.tools.push_back(std::move(tool));
    }
    if (const auto f = j.find("faults"); f != j.end() && f->is_object()) {
        if (f->contains("crashAfterN")) b.faults.crash_after = f->at("crashAfterN").get<int>();
        b.faults.hang_on_init = f->value("hangOnInit", false);
        if (f->contains("malformedEveryK")) {
            const int k = f->at("malformedEveryK").get<int>();
            if (k < 1) throw Error(ErrorCode::invalid_config, "malformedEveryK must be at least 1");
            b.faults.malformed_every = k;
        }
    }
    b.counter_file = j.value("counterFile", "");
    for (const auto& r : j.value("resources", json::array())) b.resources.push_back(r);
    for (const auto& p : j.value("prompts", json::array())) b.prompts.push_back(p);
    b.page_size = j.value("pageSize", std::size_t{0});
    b.latency_ms = j.value("latencyMs", 0);
    return b;
}

json to_json(const MockBehavior& b) {
    json tools = json::array();
    for (const auto& t : b.tools) {
        json jt = {{"name", t.name}, {"handler", handler_name(t.handler)}, {"description", t.description}};
        if (t.handler == Handler::sleep) jt["ms"] = t.sleep_ms;
        if (t.handler == Handler::fail) jt["code"] = t.fail_code;
        tools.push_back(std::move(jt));
    }
    json j = {{"name", b.server_name}, {"tools", tools}};
    json faults = json::object();
    if (b.faults.crash_after) faults["crashAfterN"] = *b.faults.crash_after;
    if (b.faults.hang_on_init) faults["hangOnInit"] = true;
    if (b.faults.malformed_every) faults["malformedEveryK"] = *b.faults.malformed_every;
    if (!faults.empty()) j["faults"] = faults;
    if (!b.counter_file.empty()) j["counterFile"] = b.counter_file;
    if (!b.resources.empty()) j["resources"] = b.resources;
    if (!b.prompts.empty()) j["prompts"] = b.prompts;
    if (b.page_size > 0) j["pageSize"] = b.page_size;
    if (b.latency_ms > 0) j["latencyMs"] = b.latency_ms;
    return j;
}

MockEngine::MockEngine(MockBehavior behavior) : behavior_(std::move(behavior)) {}

void MockEngine::emit(std::vector<std::string>& out, std::string line) {
    if (const auto k = behavior_.faults.malformed_every; k && (lines_out_ + 1) % static_cast<std::uint64_t>(*k) == 0) {
        out.emplace_back("{\"jsonrpc\": \"2.0\", garbage");
        ++lines_out_;
    }
    out.push_back(std::move(line));
    ++lines_out_;
}

json MockEngine::call_tool(const std::string& name, const json& args) {
    const auto it = std::find_if(behavior_.tools.begin(), behavior_.tools.end(),
                                 [&](const MockTool& t) { return t.name == name; });
    if (it == behavior_.tools.end()) {
        return {{"error", {{"code", rpc_codes::invalid_params}, {"message", "Unknown tool: " + name}}}};
    }
    switch (it->handler) {
        case Handler::echo: {
            const auto msg = args.find("message");
            const std::string text = msg != args.end() && msg->is_string() ? msg->get<std::string>() : args.dump();
            return {{"result", text_result(text, args)}};
        }
        case Handler::sum: {
            const auto a = args.find("a");
            const auto b = args.find("b");
            if (a == args.end() || b == args.end() || !a->is_number() || !b->is_number()) {
                return {{"error", {{"code", rpc_codes::invalid_params}, {"message", "sum needs numeric a and b"}}}};
            }
            const json total = a->is_number_integer() && b->is_number_integer()
                                   ? json(a->get<std::int64_t>() + b->get<std::int64_t>())
                                   : json(a->get<double>() + b->get<double>());
            return {{"result", text_result(total.dump(), {{"sum", total}})}};
        }
        case Handler::sleep: {
            const int ms = args.contains("ms") && args.at("ms").is_number_integer() ? args.at("ms").get<int>()
                                                                                    : it->sleep_ms;
            std::this_thread::sleep_for(std::chrono::milliseconds(std::max(0, ms)));
            return {{"result", text_result("slept " + std::to_string(ms) + " ms", {{"ms", ms}})}};
        }
        case Handler::fail:
            return {{"error", {{"code", it->fail_code}, {"message", "mock tool " + name + " failed"}}}};
        case Handler::counter: {
            ++counter_;
            append_counter_line(behavior_.counter_file);
            return {{"result", text_result("count " + std::to_string(counter_), {{"count", counter_}})}};
        }
    }
    return {{"result", json::object()}};
}

std::vector<std::string> MockEngine::handle(std::string_view line) {
    std::vector<std::string> out;
    if (crashed_) return out;
    const json msg = json::parse(line, nullptr, false);
    if (msg.is_discarded() || !msg.is_object()) {
        emit(out, error_response(nullptr, rpc_codes::parse_error, "Parse error").dump());
        return out;
    }
    const auto method = msg.find("method");
    if (method == msg.end() || !method->is_string()) return out;  // a response to us; nothing to do
    const auto id_it = msg.find("id");
    if (id_it == msg.end()) return out;  // notification
    const json id = *id_it;
    const std::string m = method->get<std::string>();
    const json params = msg.value("params", json::object());

    if (m == "initialize") {
        if (behavior_.faults.hang_on_init) return out;
        const json result = {
            {"protocolVersion", params.value("protocolVersion", std::string(kProtocolVersion))},
            {"capabilities", {{"tools", {{"listChanged", false}}}, {"resources", json::object()}, {"prompts", json::object()}}},
            {"serverInfo", {{"name", behavior_.server_name}, {"version", "1.0.0"}}}};
        emit(out, response(id, result).dump());
    } else if (m == "ping") {
        emit(out, response(id, json::object()).dump());
    } else if (m == "tools/list") {
        std::size_t start = 0;
        if (const auto c = params.find("cursor"); c != params.end() && c->is_string()) {
            start = std::stoul(c->get<std::string>());
        }
        const std::size_t n = behavior_.tools.size();
        const std::size_t end = behavior_.page_size == 0 ? n : std::min(n, start + behavior_.page_size);
        json tools = json::array();
        for (std::size_t i = start; i < end; ++i) {
            const auto& t = behavior_.tools[i];
            tools.push_back({{"name", t.name}, {"description", t.description}, {"inputSchema", input_schema(t.handler)}});
        }
        json result = {{"tools", tools}};
        if (end < n) result["nextCursor"] = std::to_string(end);
        emit(out, response(id, result).dump());
    } else if (m == "resources/list") {
        emit(out, response(id, {{"resources", behavior_.resources}}).dump());
    } else if (m == "prompts/list") {
        emit(out, response(id, {{"prompts", behavior_.prompts}}).dump());
    } else if (m == "tools/call") {
        if (behavior_.faults.crash_after && tool_calls_ >= static_cast<std::uint64_t>(*behavior_.faults.crash_after)) {
            crashed_ = true;
            return out;
        }
        ++tool_calls_;
        if (behavior_.latency_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(behavior_.latency_ms));
        const json reply = call_tool(params.value("name", ""), params.value("arguments", json::object()));
        if (reply.contains("error")) {
            emit(out, json{{"jsonrpc", "2.0"}, {"id", id}, {"error", reply.at("error")}}.dump());
        } else {
            emit(out, response(id, reply.at("result")).dump());
        }
    } else {
        emit(out, error_response(id, rpc_codes::method_not_found, "Method not found: " + m).dump());
    }
    return out;
}

int run_mock_stdio(const MockBehavior& behavior) {
    MockEngine engine(behavior);
    std::string line;
    while (std::getline(std::cin, line)) {
        if (line.empty()) continue;
        for (const auto& l : engine.handle(line)) {
            std::fwrite(l.data(), 1, l.size(), stdout);
            std::fputc('\n', stdout);
        }
        std::fflush(stdout);
        if (engine.crashed()) return 3;
    }
    return 0;
}

namespace {

struct Session {
    std::mutex mutex;
    std::condition_variable cv;
    std::deque<std::string> queue;
    bool closed = false;
};

}  // namespace

int serve_mock_sse(const MockBehavior& behavior, const std::string& host, int port, const std::atomic<bool>& stop,
                   std::atomic<int>* bound_port) {
    httplib::Server server;
    MockEngine engine(behavior);
    std::mutex engine_mutex;
    std::mutex sessions_mutex;
    std::map<std::string, std::shared_ptr<Session>> sessions;
    std::atomic<bool> crashed{false};

    server.Get("/sse", [&](const httplib::Request&, httplib::Response& res) {
        const auto id = random_hex(8);
        auto session = std::make_shared<Session>();
        {
            std::lock_guard lock(sessions_mutex);
            sessions[id] = session;
        }
        res.set_header("Cache-Control", "no-cache");
        res.set_chunked_content_provider(
            "text/event-stream",
            [&, session, id, announced = false](std::size_t, httplib::DataSink& sink) mutable {
                if (!announced) {
                    announced = true;
                    const std::string ev = "event: endpoint\ndata: /message?sessionId=" + id + "\n\n";
                    return sink.write(ev.data(), ev.size());
                }
                std::unique_lock lock(session->mutex);
                session->cv.wait_for(lock, std::chrono::milliseconds(100),
                                     [&] { return !session->queue.empty() || session->closed || stop || crashed; });
                if (stop || crashed || session->closed) {
                    sink.done();
                    return true;
                }
                while (!session->queue.empty()) {
                    const std::string ev = "event: message\ndata: " + session->queue.front() + "\n\n";
                    session->queue.pop_front();
                    if (!sink.write(ev.data(), ev.size())) return false;
                }
                return true;
            },
            [&, session, id](bool) {
                {
                    std::lock_guard lock(session->mutex);
                    session->closed = true;
                }
                std::lock_guard lock(sessions_mutex);
                sessions.erase(id);
            });
    });

    server.Post("/message", [&](const httplib::Request& req, httplib::Response& res) {
        std::shared_ptr<Session> session;
        {
            std::lock_guard lock(sessions_mutex);
            const auto it = sessions.find(req.get_param_value("sessionId"));
            if (it != sessions.end()) session = it->second;
        }
        if (!session) {
            res.status = 404;
            res.set_content("unknown session", "text/plain");
            return;
        }
        std::vector<std::string> lines;
        {
            std::lock_guard lock(engine_mutex);
            lines = engine.handle(req.body);
            if (engine.crashed()) crashed = true;
        }
        {
            std::lock_guard lock(session->mutex);
            for (auto& l : lines) session->queue.push_back(std::move(l));
        }
        session->cv.notify_all();
        res.status = 202;
        res.set_content("Accepted", "text/plain");
    });

    const int actual = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
    if (actual < 0) {
        std::fprintf(stderr, "mock: cannot bind %s:%d\n", host.c_str(), port);
        return 1;
    }
    if (bound_port) *bound_port = actual;
    std::atomic<bool> finished{false};
    std::thread watcher([&] {
        while (!stop && !crashed && !finished) std::this_thread::sleep_for(std::chrono::milliseconds(20));
        server.stop();
    });
    server.listen_after_bind();
    finished = true;
    watcher.join();
    return crashed ? 3 : 0;
}

std::uint64_t read_counter(const std::string& path) {
    std::ifstream in(path);
    if (!in) return 0;
    std::uint64_t n = 0;
    std::string line;
    while (std::getline(in, line)) ++n;
    return n;
}

ServerConfig mock_server_config(const std::string& executable, const MockBehavior& behavior, int risk_level) {
    ServerConfig c;
    c.name = behavior.server_name;
    c.command = executable;
    c.args = {"mock", "--behavior", to_json(behavior).dump()};
    c.risk_level = risk_level;
    return c;
}

namespace {

MockBehavior filesystem_behavior(const std::string& name, const std::string& counter_dir) {
    MockBehavior b;
    b.server_name = name;
    b.tools = {{"read_file", Handler::echo, "Read the complete contents of a file", 0, -32000},
               {"write_file", Handler::counter, "Create or overwrite a file with new content", 0, -32000},
               {"list_directory", Handler::echo, "List files and directories at a path", 0, -32000},
               {"search_files", Handler::echo, "Recursively search for files matching a pattern", 0, -32000},
               {"get_file_info", Handler::echo, "Retrieve metadata about a file or directory", 0, -32000}};
    b.resources = {{{"uri", "file:///workspace"}, {"name", "workspace"}, {"mimeType", "inode/directory"}}};
    if (!counter_dir.empty()) b.counter_file = counter_dir + "/" + name + ".count";
    return b;
}

MockBehavior memory_behavior(const std::string& counter_dir) {
    MockBehavior b;
    b.server_name = "memory";
    b.tools = {{"create_entities", Handler::echo, "Create entities in the knowledge graph", 0, -32000},
               {"search_nodes", Handler::echo, "Search the knowledge graph", 0, -32000},
               {"read_graph", Handler::echo, "Read the entire knowledge graph", 0, -32000},
               {"add_observations", Handler::counter, "Add observations to existing entities", 0, -32000}};
    if (!counter_dir.empty()) b.counter_file = counter_dir + "/memory.count";
    return b;
}

MockBehavior everything_behavior(const std::string& counter_dir) {
    MockBehavior b;
    b.server_name = "everything";
    b.tools = {{"echo", Handler::echo, "Echoes back the input", 0, -32000},
               {"get-sum", Handler::sum, "Returns the sum of two numbers", 0, -32000},
               {"longRunningOperation", Handler::sleep, "Sleeps for a configurable time", 20, -32000},
               {"increment", Handler::counter, "Increments an execution counter", 0, -32000}};
    b.prompts = {{{"name", "simple_prompt"}, {"description", "A prompt without arguments"}}};
    if (!counter_dir.empty()) b.counter_file = counter_dir + "/everything.count";
    return b;
}

}  // namespace

std::vector<ServerConfig> default_fleet(const FleetOptions& options) {
    auto fs = filesystem_behavior("filesystem", options.counter_dir);
    auto fs_medium = filesystem_behavior("filesystem-medium", options.counter_dir);
    auto memory = memory_behavior(options.counter_dir);
    auto everything = everything_behavior(options.counter_dir);
    for (auto* b : {&fs, &fs_medium, &memory, &everything}) b->latency_ms = options.latency_ms;
    return {mock_server_config(options.executable, fs, 1),
            mock_server_config(options.executable, fs_medium, options.medium_risk_level),
            mock_server_config(options.executable, memory, 1),
            mock_server_config(options.executable, everything, 1)};
}

std::size_t default_fleet_tool_count() {
    return filesystem_behavior("filesystem", "").tools.size() * 2 + memory_behavior("").tools.size() +
           everything_behavior("").tools.size();
}

}  // namespace bridgekit::mock

#include "bridgekit/agent.hpp"
#include "bridgekit/bench.hpp"
#include "bridgekit/config.hpp"
#include "bridgekit/gateway.hpp"
#include "bridgekit/mock_fleet.hpp"
#include "bridgekit/process.hpp"
#include "bridgekit/reward.hpp"
#include "bridgekit/toolcall_eval.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace bridgekit;

namespace {

std::string self_path() { return fs::read_symlink("/proc/self/exe").string(); }

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::bad_request, "cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::bad_request, "cannot write " + path.string());
    out << text;
}

/// Writes to `path`, or stdout when it is empty or "-".
void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
    } else {
        write_file(path, text);
    }
}

std::vector<json> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::bad_request, "cannot open " + path);
    std::vector<json> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw Error(ErrorCode::parse_error, path + ":" + std::to_string(n) + ": invalid JSON");
        out.push_back(std::move(j));
    }
    return out;
}

int free_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    socklen_t len = sizeof(addr);
    int port = 0;
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0 &&
        ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0) {
        port = ntohs(addr.sin_port);
    }
    ::close(fd);
    return port;
}

void wait_for_signal() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    int sig = 0;
    sigwait(&set, &sig);
    spdlog::info("received signal {}, shutting down", sig);
}

void block_signals() {
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

// ---- serve ----

struct ServeArgs {
    std::string config;
    std::string host = "0.0.0.0";
    int port = 3000;
};

int cmd_serve(const ServeArgs& a) {
    block_signals();
    BridgeConfig cfg = a.config.empty() ? BridgeConfig{} : load_bridge_config(a.config);
    GatewayOptions opts;
    opts.host = a.host;
    opts.port = a.port;
    Bridge bridge(std::move(cfg), opts);
    const int port = bridge.start();
    std::cerr << "bridgekit listening on " << a.host << ":" << port << std::endl;
    wait_for_signal();
    bridge.stop();
    return 0;
}

// ---- eval / reward ----

struct EvalArgs {
    std::string input;
    std::string out;
    std::uint64_t seed = 0;
    int bootstrap = 10000;
    double level = 0.95;
};

int cmd_eval(const EvalArgs& a) {
    std::vector<eval::EvalSample> samples;
    for (const auto& record : read_jsonl(a.input)) samples.push_back(eval::sample_from_json(record));
    const auto report = eval::evaluate(samples, {a.bootstrap, a.level, a.seed});
    if (report.empty_ground_truth > 0) {
        spdlog::warn("{} sample(s) have an empty ground-truth set", report.empty_ground_truth);
    }
    emit(a.out, eval::to_json(report).dump(2) + "\n");
    return 0;
}

struct RewardArgs {
    std::string input;
    std::string out;
    std::string mode = "full";
    std::string tables;
};

int cmd_reward(const RewardArgs& a) {
    reward::RewardConfig cfg = a.mode == "selection" ? reward::RewardConfig::selection_only()
                               : a.mode == "format"  ? reward::RewardConfig::format_only()
                                                     : reward::RewardConfig::full();
    if (!a.tables.empty()) {
        json overrides = json::parse(read_file(a.tables));
        overrides.erase("useSelection");
        overrides.erase("useFormat");
        cfg = reward::reward_config_from_json(overrides, cfg);
    }
    std::ostringstream os;
    for (const auto& record : read_jsonl(a.input)) {
        const auto sample = eval::sample_from_json(record);
        json line = reward::to_json(reward::score(sample.model_output, sample.ground_truth, cfg));
        line["id"] = sample.id;
        line["mode"] = a.mode;
        os << line.dump() << '\n';
    }
    emit(a.out, os.str());
    return 0;
}

// ---- mock ----

struct MockArgs {
    std::string behavior;
    std::string host = "127.0.0.1";
    int sse_port = -1;
};

int cmd_mock(const MockArgs& a) {
    const std::string text = !a.behavior.empty() && a.behavior.front() == '{' ? a.behavior : read_file(a.behavior);
    const auto behavior = mock::behavior_from_json(json::parse(text));
    if (a.sse_port < 0) return mock::run_mock_stdio(behavior);

    block_signals();
    static std::atomic<bool> stop{false};
    std::atomic<int> bound{0};
    std::thread waiter([] {
        wait_for_signal();
        stop = true;
    });
    waiter.detach();
    return mock::serve_mock_sse(behavior, a.host, a.sse_port, stop, &bound);
}

// ---- agent ----

struct AgentArgs {
    std::string mcp_url = "http://localhost:3000";
    int mcp_port = -1;
    bool hide_json = false;
    int json_width = 100;
    std::string query;
    std::string script;
    std::string llm_endpoint;
    std::string model = "gpt-4o-mini";
    std::string api_key_env = "LLM_API_KEY";
    bool yes = false;
    std::size_t max_tools = 40;
    std::size_t max_description = 160;
    std::size_t max_calls = 16;
    int rounds = 1;
};

int cmd_agent(const AgentArgs& a) {
    Url url = parse_url(a.mcp_url);
    if (a.mcp_port > 0) url.port = a.mcp_port;
    const std::string base = url.origin() + (url.path == "/" ? "" : url.path);

    std::unique_ptr<agent::LlmBackend> llm;
    if (!a.script.empty()) {
        const json script = json::parse(read_file(a.script));
        llm = std::make_unique<agent::ScriptedLlm>(script.get<std::vector<std::string>>());
    } else if (!a.llm_endpoint.empty()) {
        agent::HttpLlmConfig llm_cfg;
        llm_cfg.endpoint = a.llm_endpoint;
        llm_cfg.model = a.model;
        llm_cfg.api_key_env = a.api_key_env;
        llm = std::make_unique<agent::HttpLlm>(llm_cfg);
    } else {
        std::cerr << "agent: give --script <file> or --llm-endpoint <url>\n";
        return 2;
    }
    std::unique_ptr<agent::Operator> op;
    if (a.yes) {
        op = std::make_unique<agent::ScriptedOperator>(std::vector<bool>(1024, true));
    } else {
        op = std::make_unique<agent::TerminalOperator>(std::cin, std::cout);
    }

    agent::BridgeClient bridge(base);
    agent::AgentOptions options;
    options.prompt = {a.max_tools, a.max_description};
    options.max_calls = a.max_calls;
    options.rounds = a.rounds;

    auto turn = [&](const std::string& query) {
        try {
            const auto result = agent::run_turn(query, bridge, *llm, *op, options);
            for (const auto& o : result.outcomes) {
                std::cout << "\n[" << (o.server.empty() ? o.tool : o.server + "::" + o.tool) << "] "
                          << agent::render_result(o.result, a.hide_json, a.json_width);
            }
            std::cout << "\n" << result.final_response << std::endl;
        } catch (const agent::TurnError& e) {
            std::cerr << "LLM failed after " << e.partial().outcomes.size() << " tool call(s): " << e.what() << "\n";
            for (const auto& o : e.partial().outcomes) {
                std::cerr << agent::render_result(agent::to_json(o), a.hide_json, a.json_width);
            }
            return false;
        } catch (const Error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return false;
        }
        return true;
    };

    if (!a.query.empty()) return turn(a.query) ? 0 : 1;
    std::string line;
    while (true) {
        std::cout << "\n> " << std::flush;
        if (!std::getline(std::cin, line)) break;
        if (line == "exit" || line == "quit") break;
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        turn(line);
    }
    return 0;
}

// ---- bench ----

struct BenchArgs {
    std::string config;
    std::string out = "bench-results";
    int runs = 3;
    int iterations = 50;
    std::vector<int> levels{1, 5, 10, 20, 50};
    int requests = 100;
    int duration_ms = 5000;
    int interval_ms = 100;
    int load_requests = 200;
    int timeout_ms = 60000;
};

/// Level-1 STDIO servers; the tool is filled in from the running bridge.
std::vector<bench::Operation> latency_ops(const BridgeConfig& cfg);

/// The configured fleet, or the built-in mock fleet with counters under `dir`.
BridgeConfig bench_config(const BenchArgs& a, const fs::path& dir) {
    if (!a.config.empty()) return load_bridge_config(a.config);
    BridgeConfig cfg;
    cfg.servers = mock::default_fleet({self_path(), (dir / "counters").string(), 2, 1});
    cfg.sandbox_backend = "process";
    fs::create_directories(dir / "counters");
    return cfg;
}

std::string ensure_config_file(const BenchArgs& a, const fs::path& dir) {
    if (!a.config.empty()) return a.config;
    const auto path = dir / "fleet.json";
    write_file(path, to_json(bench_config(a, dir)).dump(2));
    return path.string();
}

std::vector<bench::Operation> latency_ops(const BridgeConfig& cfg) {
    std::vector<bench::Operation> ops;
    for (const auto& s : cfg.servers) {
        if (s.transport != TransportKind::stdio || s.risk_level != 1) continue;
        ops.push_back({s.name, s, "", json::object()});
    }
    return ops;
}

int cmd_bench(const std::string& which, const BenchArgs& a) {
    const fs::path dir = a.out;
    fs::create_directories(dir);
    auto save = [&](const std::string& stem, const json& report, const std::string& csv) {
        write_file(dir / (stem + ".json"), report.dump(2) + "\n");
        if (!csv.empty()) write_file(dir / (stem + ".csv"), csv);
        std::cout << report.dump(2) << std::endl;
    };

    if (which == "coldstart") {
        const auto path = ensure_config_file(a, dir);
        const auto cs = bench::measure_cold_start(self_path(), path, free_port(), std::chrono::milliseconds(a.timeout_ms));
        save("coldstart", bench::to_json(cs), "");
        return cs.timed_out || !cs.failed.empty() ? 1 : 0;
    }

    if (which == "resources") {
        const auto path = ensure_config_file(a, dir);
        const int port = free_port();
        ChildProcess child(SpawnOptions{
            {self_path(), "serve", "--config", path, "--port", std::to_string(port), "--log-level", "warn"}, {}, true, {}});
        const std::string url = "http://127.0.0.1:" + std::to_string(port);
        agent::BridgeClient probe(url);
        for (int i = 0; i < 400; ++i) {
            try {
                const auto h = probe.get("/health");
                if (h.status == 200 && h.body["startup"].value("complete", false)) break;
            } catch (const Error&) {
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(25));
        }
        auto targets = bench::first_tool_targets(url);
        std::erase_if(targets, [](const bench::Target& t) { return t.risk_level != 1; });
        if (targets.empty()) throw Error(ErrorCode::bad_request, "resource load needs a level-1 server");
        const int ticks = std::max(1, a.duration_ms / std::max(1, a.interval_ms));
        const int per_tick = std::max(1, a.load_requests / ticks);
        std::size_t next = 0;
        int failures = 0;
        auto report = bench::sample_resources(
            child.pid(), std::chrono::milliseconds(a.interval_ms), std::chrono::milliseconds(a.duration_ms), [&] {
                for (int i = 0; i < per_tick; ++i) {
                    const auto& t = targets[next++ % targets.size()];
                    if (probe.call_tool(t.server, t.tool, t.arguments).status != 200) ++failures;
                }
            });
        if (failures > 0) spdlog::warn("{} load request(s) failed during sampling", failures);
        child.terminate(std::chrono::milliseconds(3000));
        save("resources", bench::to_json(report), bench::resources_csv(report));
        return 0;
    }

    BridgeConfig cfg = bench_config(a, dir);
    GatewayOptions opts;
    opts.host = "127.0.0.1";
    opts.port = 0;
    Bridge bridge(cfg, opts);
    const int port = bridge.start();
    bridge.wait_for_startup();
    const std::string url = "http://127.0.0.1:" + std::to_string(port);

    int rc = 0;
    if (which == "latency") {
        auto ops = latency_ops(cfg);
        for (auto& op : ops) {
            const auto conn = bridge.manager().get(op.server.name);
            if (!conn || conn->capabilities.tools.empty()) continue;
            const auto& tool = conn->capabilities.tools.front();
            op.tool = tool.name;
            op.name = op.server.name + "/" + tool.name;
            op.arguments = bench::sample_arguments(tool.input_schema);
        }
        std::erase_if(ops, [](const bench::Operation& op) { return op.tool.empty(); });
        const auto records = bench::run_latency_suite(ops, {url, a.iterations, a.runs, 2, std::chrono::milliseconds(a.timeout_ms)});
        json report = {{"records", json::array()}, {"overheadMs", json::object()}};
        for (const auto& r : records) {
            json j = bench::to_json(r);
            j.erase("samplesMs");
            report["records"].push_back(j);
        }
        for (const auto& [op, ms] : bench::bridge_overhead(records)) report["overheadMs"][op] = ms;
        write_file(dir / "latency_samples.json", [&] {
            json all = json::array();
            for (const auto& r : records) all.push_back(bench::to_json(r));
            return all.dump();
        }());
        save("latency", report, bench::latency_csv(records));
    } else if (which == "concurrency") {
        const auto targets = bench::first_tool_targets(url);
        const auto records = bench::run_concurrency_suite(url, targets, a.levels, a.requests);
        json report = json::array();
        for (const auto& r : records) {
            report.push_back(bench::to_json(r));
            rc |= r.errors > 0 ? 1 : 0;
        }
        save("concurrency", report, bench::concurrency_csv(records));
    } else if (which == "risk") {
        const ServerConnection* l1 = nullptr;
        const ServerConnection* l2 = nullptr;
        const auto servers = bridge.manager().list();
        for (const auto& s : servers) {
            if (s.capabilities.tools.empty()) continue;
            if (s.config.risk_level == 1 && !l1) l1 = &s;
            if (s.config.risk_level == 2 && !l2) l2 = &s;
        }
        if (!l1 || !l2) {
            std::cerr << "risk trace needs one level-1 and one level-2 server\n";
            return 2;
        }
        const auto& t1 = l1->capabilities.tools.front();
        std::string counter_file;
        const ToolDescriptor* t2 = &l2->capabilities.tools.front();
        if (a.config.empty()) {
            // the built-in fleet's level-2 write_file is a counter tool
            if (const auto* w = l2->capabilities.find_tool("write_file")) t2 = w;
            counter_file = (dir / "counters" / (l2->config.name + ".count")).string();
        }
        std::function<std::uint64_t()> counter;
        if (!counter_file.empty()) counter = [counter_file] { return mock::read_counter(counter_file); };
        const auto trace = bench::trace_risk_levels(
            url, {l1->id, t1.name, bench::sample_arguments(t1.input_schema)},
            {l2->id, t2->name, bench::sample_arguments(t2->input_schema)}, counter);
        save("risk", bench::to_json(trace), "");
    } else {
        std::cerr << "unknown benchmark " << which << "\n";
        rc = 2;
    }
    bridge.stop();
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    ignore_sigpipe();
    spdlog::set_default_logger(spdlog::stderr_color_mt("bridgekit"));

    CLI::App app{"bridgekit: REST bridge for MCP servers, tool-call evaluation and benchmarks"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

    ServeArgs serve;
    auto* serve_cmd = app.add_subcommand("serve", "Run the bridge");
    serve_cmd->add_option("--config", serve.config, "Bridge configuration (mcpServers JSON)");
    serve_cmd->add_option("--port", serve.port, "Listen port")->capture_default_str();
    serve_cmd->add_option("--host", serve.host, "Listen address")->capture_default_str();
    serve_cmd->add_option("--log-level", log_level);

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Score model outputs against reference tool sets");
    eval_cmd->add_option("--input", ev.input, "JSONL samples")->required();
    eval_cmd->add_option("--out", ev.out, "Report path (default stdout)");
    eval_cmd->add_option("--seed", ev.seed, "Bootstrap seed")->capture_default_str();
    eval_cmd->add_option("--bootstrap", ev.bootstrap, "Bootstrap iterations")->capture_default_str();
    eval_cmd->add_option("--level", ev.level, "Confidence level")->capture_default_str();

    RewardArgs rw;
    auto* reward_cmd = app.add_subcommand("reward", "Per-sample reward breakdowns");
    reward_cmd->add_option("--input", rw.input, "JSONL samples")->required();
    reward_cmd->add_option("--out", rw.out, "JSONL output (default stdout)");
    reward_cmd->add_option("--mode", rw.mode, "full|selection|format")
        ->check(CLI::IsMember({"full", "selection", "format"}))
        ->capture_default_str();
    reward_cmd->add_option("--tables", rw.tables, "JSON overrides for the reward tables");

    MockArgs mk;
    auto* mock_cmd = app.add_subcommand("mock", "Run a mock MCP server");
    mock_cmd->add_option("--behavior", mk.behavior, "Behavior JSON or a file containing it")->required();
    mock_cmd->add_option("--sse-port", mk.sse_port, "Serve over SSE on this port instead of STDIO");
    mock_cmd->add_option("--host", mk.host, "SSE listen address")->capture_default_str();

    AgentArgs ag;
    auto* agent_cmd = app.add_subcommand("agent", "Conversational agent using the bridge's tools");
    agent_cmd->add_flag("--hide-json", ag.hide_json, "Hide JSON results from tool executions");
    agent_cmd->add_option("--json-width", ag.json_width, "Maximum width for JSON output")
        ->check(CLI::Range(20, 100000))
        ->capture_default_str();
    agent_cmd->add_option("--mcp-url", ag.mcp_url, "MCP Bridge URL")->capture_default_str();
    agent_cmd->add_option("--mcp-port", ag.mcp_port, "MCP Bridge port (overrides the URL's port)");
    agent_cmd->add_option("--query", ag.query, "Single query; interactive when omitted");
    agent_cmd->add_option("--script", ag.script, "JSON array of canned LLM responses");
    agent_cmd->add_option("--llm-endpoint", ag.llm_endpoint, "Chat-completions URL");
    agent_cmd->add_option("--model", ag.model, "Model name")->capture_default_str();
    agent_cmd->add_option("--api-key-env", ag.api_key_env, "Environment variable holding the API key")
        ->capture_default_str();
    agent_cmd->add_flag("--yes", ag.yes, "Approve every confirmation without asking");
    agent_cmd->add_option("--max-tools", ag.max_tools, "Tools listed in the prompt")->capture_default_str();
    agent_cmd->add_option("--max-description", ag.max_description, "Description length cap")->capture_default_str();
    agent_cmd->add_option("--max-calls", ag.max_calls, "Tool calls executed per response")->capture_default_str();
    agent_cmd->add_option("--rounds", ag.rounds, "Tool rounds before the final answer")->capture_default_str();

    BenchArgs bn;
    std::string bench_which;
    auto* bench_cmd = app.add_subcommand("bench", "System benchmarks");
    bench_cmd->add_option("suite", bench_which, "latency|concurrency|risk|coldstart|resources")
        ->required()
        ->check(CLI::IsMember({"latency", "concurrency", "risk", "coldstart", "resources"}));
    bench_cmd->add_option("--config", bn.config, "Bridge configuration (default: built-in mock fleet)");
    bench_cmd->add_option("--out", bn.out, "Output directory")->capture_default_str();
    bench_cmd->add_option("--runs", bn.runs, "Latency runs")->capture_default_str();
    bench_cmd->add_option("--iterations", bn.iterations, "Latency iterations per run")->capture_default_str();
    bench_cmd->add_option("--levels", bn.levels, "Concurrency levels")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--requests", bn.requests, "Requests per concurrency level")->capture_default_str();
    bench_cmd->add_option("--duration-ms", bn.duration_ms, "Resource sampling duration")->capture_default_str();
    bench_cmd->add_option("--interval-ms", bn.interval_ms, "Resource sampling interval")->capture_default_str();
    bench_cmd->add_option("--load-requests", bn.load_requests, "Requests issued while sampling")->capture_default_str();
    bench_cmd->add_option("--timeout-ms", bn.timeout_ms, "Cold-start and request timeout")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));
    if (mock_cmd->parsed()) spdlog::set_level(spdlog::level::warn);

    try {
        if (serve_cmd->parsed()) return cmd_serve(serve);
        if (eval_cmd->parsed()) return cmd_eval(ev);
        if (reward_cmd->parsed()) return cmd_reward(rw);
        if (mock_cmd->parsed()) return cmd_mock(mk);
        if (agent_cmd->parsed()) return cmd_agent(ag);
        if (bench_cmd->parsed()) return cmd_bench(bench_which, bn);
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

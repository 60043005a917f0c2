#include "bridgekit/bench.hpp"

#include "bridgekit/agent.hpp"
#include "bridgekit/error.hpp"
#include "bridgekit/process.hpp"
#include "bridgekit/rpc_channel.hpp"
#include "bridgekit/transport.hpp"
#include "bridgekit/util.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

namespace bridgekit::bench {

namespace {

SpawnOptions spawn_options(const ServerConfig& server) {
    SpawnOptions s;
    s.argv.push_back(server.command);
    s.argv.insert(s.argv.end(), server.args.begin(), server.args.end());
    s.env = server.env;
    return s;
}

std::unique_ptr<httplib::Client> keep_alive_client(const std::string& url, std::chrono::milliseconds timeout) {
    auto client = std::make_unique<httplib::Client>(parse_url(url).origin());
    client->set_keep_alive(true);
    client->set_tcp_nodelay(true);
    const auto ms = timeout.count();
    client->set_read_timeout(static_cast<time_t>(ms / 1000), static_cast<time_t>((ms % 1000) * 1000));
    client->set_connection_timeout(5, 0);
    return client;
}

std::string tool_path(const std::string& server, const std::string& tool) {
    return "/servers/" + agent::url_encode(server) + "/tools/" + agent::url_encode(tool);
}

double mean_of(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

json tool_call_params(const Operation& op) { return {{"name", op.tool}, {"arguments", op.arguments}}; }

json initialize_params() {
    return {{"protocolVersion", kProtocolVersion},
            {"capabilities", json::object()},
            {"clientInfo", {{"name", "bridgekit-bench"}, {"version", "1.0.0"}}}};
}

using Probe = std::function<void()>;

LatencyRecord measure(const Operation& op, Mode mode, const LatencyOptions& options, const Probe& probe) {
    LatencyRecord rec;
    rec.operation = op.name;
    rec.mode = mode;
    for (int w = 0; w < options.warmup && mode != Mode::stdio_perspawn; ++w) probe();
    for (int r = 0; r < std::max(1, options.runs); ++r) {
        std::vector<double> run;
        for (int i = 0; i < std::max(1, options.iterations); ++i) {
            const auto t0 = Clock::now();
            probe();
            run.push_back(to_ms(Clock::now() - t0));
        }
        rec.run_means_ms.push_back(mean_of(run));
        rec.samples_ms.insert(rec.samples_ms.end(), run.begin(), run.end());
    }
    rec.stats = compute_stats(rec.samples_ms);
    if (rec.run_means_ms.size() >= 2) rec.run_std_ms = sample_std(rec.run_means_ms);
    return rec;
}

template <typename F>
auto labelled(Mode mode, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.code(), std::string(to_string(mode)) + ": " + e.what());
    }
}

}  // namespace

double percentile(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw Error(ErrorCode::bad_request, "percentile of an empty sample");
    const auto n = sorted.size();
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(n)));
    rank = std::clamp<std::size_t>(rank, 1, n);
    return sorted[rank - 1];
}

Stats compute_stats(std::vector<double> samples) {
    if (samples.empty()) throw Error(ErrorCode::bad_request, "statistics of an empty sample");
    std::sort(samples.begin(), samples.end());
    Stats s;
    s.n = samples.size();
    s.mean = mean_of(samples);
    s.std = sample_std(samples);
    s.p50 = percentile(samples, 50);
    s.p95 = percentile(samples, 95);
    s.p99 = percentile(samples, 99);
    s.min = samples.front();
    s.max = samples.back();
    return s;
}

std::string_view to_string(Mode mode) {
    switch (mode) {
        case Mode::bridge_rest: return "bridge_rest";
        case Mode::stdio_keepalive: return "stdio_keepalive";
        case Mode::stdio_perspawn: return "stdio_perspawn";
    }
    return "unknown";
}

std::vector<LatencyRecord> run_latency_suite(const std::vector<Operation>& ops, const LatencyOptions& options) {
    ignore_sigpipe();
    std::vector<LatencyRecord> out;
    for (const auto& op : ops) {
        labelled(Mode::bridge_rest, [&] {
            auto client = keep_alive_client(options.bridge_url, options.timeout);
            const auto path = tool_path(op.server.name, op.tool);
            const auto body = op.arguments.dump();
            out.push_back(measure(op, Mode::bridge_rest, options, [&] {
                auto res = client->Post(path, body, "application/json");
                if (!res) {
                    throw Error(ErrorCode::transport_failure,
                                "cannot reach " + options.bridge_url + ": " + httplib::to_string(res.error()));
                }
                if (res->status != 200) {
                    throw Error(ErrorCode::backend_error, op.name + " answered HTTP " + std::to_string(res->status));
                }
            }));
            return 0;
        });

        labelled(Mode::stdio_keepalive, [&] {
            RpcChannel channel(std::make_unique<StdioTransport>(spawn_options(op.server)));
            channel.start();
            initialize_handshake(channel, options.timeout);
            const auto params = tool_call_params(op);
            out.push_back(measure(op, Mode::stdio_keepalive, options,
                                  [&] { channel.call("tools/call", params, options.timeout); }));
            channel.close(ErrorCode::server_stopped, "benchmark finished", std::chrono::milliseconds(500));
            return 0;
        });

        labelled(Mode::stdio_perspawn, [&] {
            const auto spawn = spawn_options(op.server);
            const auto params = tool_call_params(op);
            out.push_back(measure(op, Mode::stdio_perspawn, options, [&] {
                RpcChannel channel(std::make_unique<StdioTransport>(spawn));
                channel.start();
                channel.call("initialize", initialize_params(), options.timeout);
                channel.notify("notifications/initialized");
                channel.call("tools/call", params, options.timeout);
                channel.close(ErrorCode::server_stopped, "request done", std::chrono::milliseconds(500));
            }));
            return 0;
        });
    }
    return out;
}

std::vector<std::pair<std::string, double>> bridge_overhead(const std::vector<LatencyRecord>& records) {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& bridge : records) {
        if (bridge.mode != Mode::bridge_rest) continue;
        for (const auto& keep : records) {
            if (keep.mode == Mode::stdio_keepalive && keep.operation == bridge.operation) {
                out.emplace_back(bridge.operation, bridge.stats.mean - keep.stats.mean);
            }
        }
    }
    return out;
}

json sample_arguments(const json& schema) {
    json args = json::object();
    const auto props = schema.find("properties");
    const auto required = schema.find("required");
    if (props == schema.end() || !props->is_object() || required == schema.end() || !required->is_array()) {
        return args;
    }
    for (const auto& key : *required) {
        if (!key.is_string()) continue;
        const auto& name = key.get_ref<const std::string&>();
        const auto type = props->contains(name) ? props->at(name).value("type", "string") : "string";
        if (type == "number" || type == "integer") {
            args[name] = 1;
        } else if (type == "boolean") {
            args[name] = true;
        } else if (type == "array") {
            args[name] = json::array();
        } else if (type == "object") {
            args[name] = json::object();
        } else {
            args[name] = "bench";
        }
    }
    return args;
}

std::vector<Target> first_tool_targets(const std::string& bridge_url) {
    agent::BridgeClient client(bridge_url);
    const auto servers = client.get("/servers");
    if (servers.status != 200 || !servers.body.is_array()) {
        throw Error(ErrorCode::transport_failure, "bridge did not list servers");
    }
    std::vector<Target> out;
    for (const auto& s : servers.body) {
        const auto id = s.value("id", "");
        const auto tools = client.get("/servers/" + agent::url_encode(id) + "/tools");
        if (tools.status != 200 || !tools.body.is_array() || tools.body.empty()) continue;
        const auto& first = tools.body.front();
        out.push_back({id, first.value("name", ""), sample_arguments(first.value("inputSchema", json::object())),
                       s.value("riskLevel", 1)});
    }
    return out;
}

ThroughputRecord run_concurrency_level(const std::string& bridge_url, const std::vector<Target>& targets, int level,
                                       int requests) {
    if (targets.empty()) throw Error(ErrorCode::bad_request, "no targets for the concurrency run");
    if (level < 1) throw Error(ErrorCode::bad_request, "concurrency level must be positive");
    ignore_sigpipe();

    std::vector<std::string> paths;
    std::vector<std::string> bodies;
    for (const auto& t : targets) {
        paths.push_back(tool_path(t.server, t.tool));
        bodies.push_back(t.arguments.dump());
    }
    std::vector<std::unique_ptr<httplib::Client>> clients;
    for (int i = 0; i < level; ++i) clients.push_back(keep_alive_client(bridge_url, std::chrono::milliseconds(60000)));

    std::atomic<int> next{0};
    std::atomic<int> errors{0};
    std::vector<double> latency_sums(static_cast<std::size_t>(level), 0.0);
    std::atomic<int> ready{0};
    std::atomic<bool> go{false};

    std::vector<std::thread> workers;
    for (int w = 0; w < level; ++w) {
        workers.emplace_back([&, w] {
            auto& client = *clients[static_cast<std::size_t>(w)];
            ++ready;
            while (!go) std::this_thread::yield();
            for (int i = next++; i < requests; i = next++) {
                const auto k = static_cast<std::size_t>(i) % paths.size();
                const auto t0 = Clock::now();
                auto res = client.Post(paths[k], bodies[k], "application/json");
                latency_sums[static_cast<std::size_t>(w)] += to_ms(Clock::now() - t0);
                if (!res || res->status / 100 != 2) ++errors;
            }
        });
    }
    while (ready < level) std::this_thread::yield();
    const auto t0 = Clock::now();
    go = true;
    for (auto& t : workers) t.join();
    const double elapsed = to_ms(Clock::now() - t0);

    ThroughputRecord rec;
    rec.concurrency = level;
    rec.total_requests = requests;
    rec.errors = errors;
    rec.elapsed_ms = elapsed;
    rec.requests_per_sec = elapsed > 0 ? static_cast<double>(requests) * 1000.0 / elapsed : 0.0;
    rec.mean_latency_ms =
        requests > 0 ? std::accumulate(latency_sums.begin(), latency_sums.end(), 0.0) / requests : 0.0;
    return rec;
}

std::vector<ThroughputRecord> run_concurrency_suite(const std::string& bridge_url, const std::vector<Target>& targets,
                                                    const std::vector<int>& levels, int requests_per_level) {
    std::vector<ThroughputRecord> out;
    for (int level : levels) out.push_back(run_concurrency_level(bridge_url, targets, level, requests_per_level));
    return out;
}

RiskTrace trace_risk_levels(const std::string& bridge_url, const Target& level1, const Target& level2,
                            const std::function<std::uint64_t()>& executions) {
    agent::BridgeClient client(bridge_url);
    RiskTrace trace;

    auto t0 = Clock::now();
    const auto r1 = client.call_tool(level1.server, level1.tool, level1.arguments);
    trace.level1_ms = to_ms(Clock::now() - t0);
    if (r1.status != 200) throw Error(ErrorCode::backend_error, "level-1 call answered HTTP " + std::to_string(r1.status));

    t0 = Clock::now();
    const auto pending = client.call_tool(level2.server, level2.tool, level2.arguments);
    trace.level2_request_ms = to_ms(Clock::now() - t0);
    trace.level2_request_status = pending.status;
    if (pending.status != 202) {
        throw Error(ErrorCode::backend_error, "level-2 call answered HTTP " + std::to_string(pending.status));
    }
    const auto id = pending.body.value("confirmationId", "");
    const auto token = pending.body.value("token", "");
    t0 = Clock::now();
    const auto confirmed = client.resolve(id, token, true);
    trace.level2_confirm_ms = to_ms(Clock::now() - t0);
    trace.level2_confirm_status = confirmed.status;
    trace.level2_total_ms = trace.level2_request_ms + trace.level2_confirm_ms;
    trace.resubmit_status = client.resolve(id, token, true).status;

    const std::uint64_t before = executions ? executions() : 0;
    const auto second = client.call_tool(level2.server, level2.tool, level2.arguments);
    const auto rejected =
        client.resolve(second.body.value("confirmationId", ""), second.body.value("token", ""), false);
    trace.reject_status = rejected.status;
    trace.reject_cancelled = rejected.body.is_object() && rejected.body.value("status", "") == "cancelled";
    if (executions) {
        trace.executions_during_reject = static_cast<std::int64_t>(executions()) - static_cast<std::int64_t>(before);
    }
    return trace;
}

ColdStart measure_cold_start(const std::string& executable, const std::string& config_path, int port,
                             std::chrono::milliseconds timeout) {
    const auto config = load_bridge_config(config_path);
    ColdStart out;
    const auto t0 = Clock::now();
    ChildProcess child(SpawnOptions{
        {executable, "serve", "--config", config_path, "--port", std::to_string(port), "--log-level", "warn"}, {}, true, {}});
    httplib::Client client("127.0.0.1", port);
    client.set_connection_timeout(0, 200000);
    client.set_read_timeout(2, 0);

    const auto deadline = t0 + timeout;
    json last;
    while (Clock::now() < deadline) {
        if (!child.running()) throw Error(ErrorCode::spawn_failed, "bridge exited during cold start");
        auto res = client.Get("/health");
        if (res && res->status == 200) {
            if (!out.gateway_up_ms) out.gateway_up_ms = to_ms(Clock::now() - t0);
            last = json::parse(res->body, nullptr, false);
            if (last.is_object() && last["startup"].value("complete", false)) break;
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    out.total_ms = to_ms(Clock::now() - t0);
    out.timed_out = !(last.is_object() && last["startup"].value("complete", false));

    std::vector<std::string> healthy;
    if (last.is_object()) {
        for (const auto& s : last.value("servers", json::array())) {
            if (s.value("state", "") != "healthy") continue;
            healthy.push_back(s.value("name", ""));
            out.servers.emplace_back(s.value("name", ""), s.value("handshakeMs", 0.0));
        }
    }
    for (const auto& s : config.servers) {
        if (std::find(healthy.begin(), healthy.end(), s.name) == healthy.end()) out.failed.push_back(s.name);
    }
    child.terminate(std::chrono::milliseconds(3000));
    return out;
}

std::optional<std::uint64_t> read_rss_kb(pid_t pid) {
    std::ifstream in("/proc/" + std::to_string(pid) + "/status");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("VmRSS:", 0) == 0) return std::stoull(line.substr(6));
    }
    return std::nullopt;
}

namespace {

void read_meminfo(ResourceSample& s) {
    std::ifstream in("/proc/meminfo");
    std::string key;
    std::uint64_t value = 0;
    std::string unit;
    while (in >> key >> value) {
        std::getline(in, unit);
        if (key == "MemFree:") s.mem_free_kb = value;
        if (key == "MemAvailable:") s.mem_available_kb = value;
    }
}

}  // namespace

bool detect_leak(const std::vector<std::uint64_t>& rss, std::uint64_t threshold_kb) {
    if (rss.size() < 3 || rss.back() <= rss.front() || rss.back() - rss.front() <= threshold_kb) return false;
    std::size_t rising = 0;
    for (std::size_t i = 1; i < rss.size(); ++i) rising += rss[i] >= rss[i - 1] ? 1 : 0;
    return static_cast<double>(rising) >= 0.9 * static_cast<double>(rss.size() - 1);
}

ResourceReport sample_resources(pid_t pid, std::chrono::milliseconds interval, std::chrono::milliseconds duration,
                                const std::function<void()>& tick, std::uint64_t leak_threshold_kb) {
    ResourceReport report;
    const auto t0 = Clock::now();
    auto next = t0;
    while (Clock::now() - t0 <= duration) {
        if (tick) tick();
        ResourceSample s;
        s.t_ms = to_ms(Clock::now() - t0);
        const auto rss = read_rss_kb(pid);
        if (!rss) break;
        s.rss_kb = *rss;
        read_meminfo(s);
        report.samples.push_back(s);
        next += interval;
        std::this_thread::sleep_until(next);
    }
    std::vector<std::uint64_t> series;
    for (const auto& s : report.samples) series.push_back(s.rss_kb);
    if (!series.empty()) {
        report.rss_min_kb = *std::min_element(series.begin(), series.end());
        report.rss_max_kb = *std::max_element(series.begin(), series.end());
    }
    report.leak_warning = detect_leak(series, leak_threshold_kb);
    return report;
}

json to_json(const Stats& s) {
    return {{"n", s.n},     {"mean", s.mean}, {"std", s.std}, {"p50", s.p50},
            {"p95", s.p95}, {"p99", s.p99},   {"min", s.min}, {"max", s.max}};
}

json to_json(const LatencyRecord& r) {
    return {{"operation", r.operation},
            {"mode", std::string(to_string(r.mode))},
            {"stats", to_json(r.stats)},
            {"runMeansMs", r.run_means_ms},
            {"runStdMs", r.run_std_ms ? json(*r.run_std_ms) : json(nullptr)},
            {"samplesMs", r.samples_ms}};
}

json to_json(const ThroughputRecord& r) {
    return {{"concurrency", r.concurrency},     {"requestsPerSec", r.requests_per_sec},
            {"meanLatencyMs", r.mean_latency_ms}, {"totalRequests", r.total_requests},
            {"errors", r.errors},               {"elapsedMs", r.elapsed_ms}};
}

json to_json(const RiskTrace& r) {
    return {{"level1Ms", r.level1_ms},
            {"level2RequestMs", r.level2_request_ms},
            {"level2ConfirmMs", r.level2_confirm_ms},
            {"level2TotalMs", r.level2_total_ms},
            {"level2RequestStatus", r.level2_request_status},
            {"level2ConfirmStatus", r.level2_confirm_status},
            {"resubmitStatus", r.resubmit_status},
            {"rejectStatus", r.reject_status},
            {"rejectCancelled", r.reject_cancelled},
            {"executionsDuringReject",
             r.executions_during_reject ? json(*r.executions_during_reject) : json(nullptr)}};
}

json to_json(const ColdStart& c) {
    json servers = json::array();
    for (const auto& [name, ms] : c.servers) servers.push_back({{"name", name}, {"handshakeMs", ms}});
    return {{"totalMs", c.total_ms},
            {"gatewayUpMs", c.gateway_up_ms ? json(*c.gateway_up_ms) : json(nullptr)},
            {"servers", servers},
            {"timedOut", c.timed_out},
            {"failed", c.failed}};
}

json to_json(const ResourceReport& r) {
    json samples = json::array();
    for (const auto& s : r.samples) {
        samples.push_back({{"tMs", s.t_ms}, {"rssKb", s.rss_kb}, {"memFreeKb", s.mem_free_kb},
                           {"memAvailableKb", s.mem_available_kb}});
    }
    return {{"samples", samples},
            {"rssMinKb", r.rss_min_kb},
            {"rssMaxKb", r.rss_max_kb},
            {"rssSpreadKb", r.rss_max_kb - r.rss_min_kb},
            {"leakWarning", r.leak_warning}};
}

std::string latency_csv(const std::vector<LatencyRecord>& records) {
    std::ostringstream os;
    os << "operation,mode,n,mean_ms,std_ms,p50_ms,p95_ms,p99_ms,min_ms,max_ms,run_std_ms\n";
    for (const auto& r : records) {
        const auto& s = r.stats;
        os << r.operation << ',' << to_string(r.mode) << ',' << s.n << ',' << s.mean << ',' << s.std << ',' << s.p50
           << ',' << s.p95 << ',' << s.p99 << ',' << s.min << ',' << s.max << ',';
        if (r.run_std_ms) os << *r.run_std_ms;
        os << '\n';
    }
    return os.str();
}

std::string concurrency_csv(const std::vector<ThroughputRecord>& records) {
    std::ostringstream os;
    os << "concurrency,requests_per_sec,mean_latency_ms,total_requests,errors\n";
    for (const auto& r : records) {
        os << r.concurrency << ',' << r.requests_per_sec << ',' << r.mean_latency_ms << ',' << r.total_requests << ','
           << r.errors << '\n';
    }
    return os.str();
}

std::string resources_csv(const ResourceReport& report) {
    std::ostringstream os;
    os << "t_ms,rss_kb,mem_free_kb,mem_available_kb\n";
    for (const auto& s : report.samples) {
        os << s.t_ms << ',' << s.rss_kb << ',' << s.mem_free_kb << ',' << s.mem_available_kb << '\n';
    }
    return os.str();
}

}  // namespace bridgekit::bench

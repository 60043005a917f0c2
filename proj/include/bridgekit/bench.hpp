#pragma once

/// Benchmark harness: latency of the three access paths, concurrency sweep,
/// risk-level traces, cold start and resource sampling.

#include "bridgekit/config.hpp"
#include "bridgekit/json_rpc.hpp"

#include <sys/types.h>

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bridgekit::bench {

struct Stats {
    std::size_t n = 0;
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1)
    double p50 = 0.0;
    double p95 = 0.0;
    double p99 = 0.0;
    double min = 0.0;
    double max = 0.0;
};

/// Nearest-rank percentile (p in (0, 100]) of an ascending sample.
double percentile(const std::vector<double>& sorted, double p);

/// Throws Error(bad_request) on an empty sample.
Stats compute_stats(std::vector<double> samples);

enum class Mode { bridge_rest, stdio_keepalive, stdio_perspawn };

std::string_view to_string(Mode mode);

/// One tool call benchmarked three ways.
struct Operation {
    std::string name;       // e.g. everything/get-sum
    ServerConfig server;    // spawned directly by the STDIO modes
    std::string tool;
    json arguments = json::object();
};

struct LatencyRecord {
    std::string operation;
    Mode mode = Mode::bridge_rest;
    std::vector<double> samples_ms;
    Stats stats;
    std::vector<double> run_means_ms;
    std::optional<double> run_std_ms;  // across run means; absent for a single run
};

struct LatencyOptions {
    std::string bridge_url;  // the bridge must already run the operations' servers
    int iterations = 50;
    int runs = 3;
    int warmup = 2;
    std::chrono::milliseconds timeout{30000};
};

/// Throws Error naming the mode when a target cannot be reached.
std::vector<LatencyRecord> run_latency_suite(const std::vector<Operation>& ops, const LatencyOptions& options);

/// mean(bridge_rest) - mean(stdio_keepalive) per operation.
std::vector<std::pair<std::string, double>> bridge_overhead(const std::vector<LatencyRecord>& records);

struct ThroughputRecord {
    int concurrency = 0;
    double requests_per_sec = 0.0;
    double mean_latency_ms = 0.0;
    int total_requests = 0;
    int errors = 0;
    double elapsed_ms = 0.0;
};

struct Target {
    std::string server;  // id or name
    std::string tool;
    json arguments = json::object();
    int risk_level = 1;
};

/// First tool of every server listed by the bridge, with arguments that
/// satisfy its input schema.
std::vector<Target> first_tool_targets(const std::string& bridge_url);

/// Placeholder arguments for the required properties of a JSON schema.
json sample_arguments(const json& schema);

/// Exactly `level` workers, each with one keep-alive connection, pull the
/// next request index from a shared counter; targets are used round-robin.
/// Non-2xx answers and transport failures count as errors.
ThroughputRecord run_concurrency_level(const std::string& bridge_url, const std::vector<Target>& targets, int level,
                                       int requests);

std::vector<ThroughputRecord> run_concurrency_suite(const std::string& bridge_url, const std::vector<Target>& targets,
                                                    const std::vector<int>& levels, int requests_per_level);

struct RiskTrace {
    double level1_ms = 0.0;
    double level2_request_ms = 0.0;
    double level2_confirm_ms = 0.0;
    double level2_total_ms = 0.0;
    int level2_request_status = 0;
    int level2_confirm_status = 0;
    int resubmit_status = 0;
    int reject_status = 0;
    bool reject_cancelled = false;
    std::optional<std::int64_t> executions_during_reject;  // when a counter is supplied
};

/// `executions` (optional) reads the level-2 tool's out-of-band execution count.
RiskTrace trace_risk_levels(const std::string& bridge_url, const Target& level1, const Target& level2,
                            const std::function<std::uint64_t()>& executions = {});

struct ColdStart {
    double total_ms = 0.0;
    std::optional<double> gateway_up_ms;
    std::vector<std::pair<std::string, double>> servers;  // handshake phase per server
    bool timed_out = false;
    std::vector<std::string> failed;  // servers that never became healthy
};

/// Launches `executable serve --config <config_path> --port <port>` and polls
/// /health until every configured server is up or `timeout` elapses.
ColdStart measure_cold_start(const std::string& executable, const std::string& config_path, int port,
                             std::chrono::milliseconds timeout);

struct ResourceSample {
    double t_ms = 0.0;
    std::uint64_t rss_kb = 0;
    std::uint64_t mem_free_kb = 0;
    std::uint64_t mem_available_kb = 0;
};

struct ResourceReport {
    std::vector<ResourceSample> samples;
    std::uint64_t rss_min_kb = 0;
    std::uint64_t rss_max_kb = 0;
    bool leak_warning = false;
};

std::optional<std::uint64_t> read_rss_kb(pid_t pid);

/// Growth from first to last above `threshold_kb` with at least 90% of the
/// steps non-decreasing.
bool detect_leak(const std::vector<std::uint64_t>& rss_kb, std::uint64_t threshold_kb);

/// Samples `pid` every `interval` for `duration`, calling `tick` (if any)
/// before each sample.
ResourceReport sample_resources(pid_t pid, std::chrono::milliseconds interval, std::chrono::milliseconds duration,
                                const std::function<void()>& tick = {}, std::uint64_t leak_threshold_kb = 8192);

json to_json(const Stats& s);
json to_json(const LatencyRecord& r);
json to_json(const ThroughputRecord& r);
json to_json(const RiskTrace& r);
json to_json(const ColdStart& c);
json to_json(const ResourceReport& r);

std::string latency_csv(const std::vector<LatencyRecord>& records);
std::string concurrency_csv(const std::vector<ThroughputRecord>& records);
std::string resources_csv(const ResourceReport& report);

}  // namespace bridgekit::bench

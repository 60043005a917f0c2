#pragma once

/// Deterministic MCP servers for tests and benchmarks. A mock is described by
/// a small JSON behavior document and run as `bridgekit mock --behavior ...`.

#include "bridgekit/config.hpp"
#include "bridgekit/json_rpc.hpp"

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bridgekit::mock {

enum class Handler { echo, sum, sleep, fail, counter };

struct MockTool {
    std::string name;
    Handler handler = Handler::echo;
    std::string description;
    int sleep_ms = 0;   // sleep handler default when the call has no "ms"
    int fail_code = -32000;
};

struct MockFaults {
    std::optional<int> crash_after;      // exit on the (N+1)th tools/call
    bool hang_on_init = false;           // never answer initialize
    std::optional<int> malformed_every;  // every Kth output line is garbage
};

struct MockBehavior {
    std::string server_name = "mock";
    std::vector<MockTool> tools;
    MockFaults faults;
    std::string counter_file;  // counter executions append one line here
    std::vector<json> resources;
    std::vector<json> prompts;
    std::size_t page_size = 0;  // tools/list page size; 0 lists everything at once
    int latency_ms = 0;         // service time added to every tools/call
};

/// {"name","tools":[{"name","handler","description","ms","code"}],
///  "faults":{"crashAfterN","hangOnInit","malformedEveryK"},"counterFile",
///  "resources":[...],"prompts":[...],"pageSize","latencyMs"}
MockBehavior behavior_from_json(const json& j);
json to_json(const MockBehavior& b);

/// Pure request/response core shared by the STDIO and SSE front ends.
/// Not thread-safe; one request at a time.
class MockEngine {
public:
    explicit MockEngine(MockBehavior behavior);

    /// Output lines (without newline) answering one input line.
    std::vector<std::string> handle(std::string_view line);

    /// Set once a crash fault fires; the front end must exit.
    bool crashed() const { return crashed_; }
    std::uint64_t tool_calls() const { return tool_calls_; }
    std::uint64_t counter_executions() const { return counter_; }

private:
    json call_tool(const std::string& name, const json& args);
    void emit(std::vector<std::string>& out, std::string line);

    MockBehavior behavior_;
    std::uint64_t tool_calls_ = 0;
    std::uint64_t counter_ = 0;
    std::uint64_t lines_out_ = 0;
    bool crashed_ = false;
};

/// Serves the behavior on stdin/stdout until EOF or a crash fault. Returns the
/// process exit code.
int run_mock_stdio(const MockBehavior& behavior);

/// Serves the behavior over SSE: GET /sse streams events (first an
/// "endpoint" event), POST /message?sessionId=... takes requests. Blocks
/// until `stop` becomes true. `bound_port` receives the listening port.
int serve_mock_sse(const MockBehavior& behavior, const std::string& host, int port,
                   const std::atomic<bool>& stop, std::atomic<int>* bound_port = nullptr);

/// Number of lines in a counter file (0 when absent).
std::uint64_t read_counter(const std::string& path);

struct FleetOptions {
    std::string executable;     // path to the bridgekit binary
    std::string counter_dir;    // where per-server counter files go; empty: none
    int medium_risk_level = 2;
    int latency_ms = 1;  // per-call service time of every fleet server
};

/// The four-server topology: filesystem (level 1) and filesystem-medium
/// (same implementation, level 2), memory and everything (level 1).
std::vector<ServerConfig> default_fleet(const FleetOptions& options);

/// Total number of tools across default_fleet().
std::size_t default_fleet_tool_count();

/// Stdio ServerConfig running `executable mock --behavior <json>`.
ServerConfig mock_server_config(const std::string& executable, const MockBehavior& behavior, int risk_level = 1);

}  // namespace bridgekit::mock

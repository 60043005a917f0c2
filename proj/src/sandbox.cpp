#include "bridgekit/error.hpp"
#include "bridgekit/risk.hpp"
#include "bridgekit/rpc_channel.hpp"

#include <sys/resource.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

namespace bridgekit {

bool executable_on_path(const std::string& program) {
    if (program.empty()) return false;
    if (program.find('/') != std::string::npos) return ::access(program.c_str(), X_OK) == 0;
    const char* path = std::getenv("PATH");
    if (!path) return false;
    std::stringstream dirs(path);
    std::string dir;
    while (std::getline(dirs, dir, ':')) {
        if (dir.empty()) dir = ".";
        const auto candidate = std::filesystem::path(dir) / program;
        if (::access(candidate.c_str(), X_OK) == 0) return true;
    }
    return false;
}

namespace {

/// Handshake + tools/call against a freshly spawned process, bounded by
/// `timeout` overall. The process group is always killed on return.
json run_one_shot(const SpawnOptions& spawn, const std::string& tool, const json& params,
                  std::chrono::milliseconds timeout, const std::function<void()>& on_timeout = {}) {
    const auto deadline = Clock::now() + timeout;
    auto remaining = [&] {
        return std::max(std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()),
                        std::chrono::milliseconds(1));
    };
    RpcChannel channel(std::make_unique<StdioTransport>(spawn));
    channel.start();
    try {
        channel.call("initialize",
                     {{"protocolVersion", kProtocolVersion},
                      {"capabilities", json::object()},
                      {"clientInfo", {{"name", "bridgekit-sandbox"}, {"version", "1.0.0"}}}},
                     remaining());
        channel.notify("notifications/initialized");
        json result = channel.call("tools/call", {{"name", tool}, {"arguments", params}}, remaining());
        channel.close(ErrorCode::server_stopped, "sandbox finished", std::chrono::milliseconds(0));
        return result;
    } catch (const RpcFault&) {
        channel.close(ErrorCode::server_stopped, "sandbox finished", std::chrono::milliseconds(0));
        throw;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::request_timeout) {
            if (on_timeout) on_timeout();
            channel.close(ErrorCode::sandbox_timeout, "sandbox timed out", std::chrono::milliseconds(0));
            throw Error(ErrorCode::sandbox_timeout,
                        "sandboxed execution exceeded " + std::to_string(timeout.count()) + " ms");
        }
        channel.close(ErrorCode::server_stopped, "sandbox failed", std::chrono::milliseconds(0));
        if (e.code() == ErrorCode::transport_failure) {
            throw Error(ErrorCode::backend_error, std::string("sandboxed server failed: ") + e.what());
        }
        throw;
    }
}

}  // namespace

ContainerSandbox::ContainerSandbox(std::string runtime) : runtime_(std::move(runtime)) {}

bool ContainerSandbox::available() const { return executable_on_path(runtime_); }

std::vector<std::string> ContainerSandbox::run_argv(const ServerConfig& server, const SandboxSpec& spec,
                                                    const std::string& container_name) const {
    std::vector<std::string> argv = {runtime_, "run", "--rm", "-i", "--name", container_name,
                                     "--network", spec.network,
                                     "--memory", std::to_string(spec.memory_limit_mb) + "m"};
    for (const auto& v : spec.volumes) {
        argv.push_back("-v");
        argv.push_back(v);
    }
    for (const auto& [k, v] : server.env) {
        argv.push_back("-e");
        argv.push_back(k + "=" + v);
    }
    argv.push_back(spec.image);
    argv.push_back(server.command);
    argv.insert(argv.end(), server.args.begin(), server.args.end());
    return argv;
}

json ContainerSandbox::execute(const ServerConfig& server, const std::string& tool, const json& params,
                               const SandboxSpec& spec) {
    if (!available()) {
        throw Error(ErrorCode::sandbox_unavailable, "sandbox backend '" + runtime_ + "' is not available");
    }
    const std::string name = "bridgekit-" + make_uuid();
    SpawnOptions spawn;
    spawn.argv = run_argv(server, spec, name);
    const std::string runtime = runtime_;
    auto kill_container = [runtime, name] {
        try {
            ChildProcess killer(SpawnOptions{{runtime, "kill", name}, {}, true, {}});
            killer.close_stdin();
            while (killer.read_line()) {
            }
            killer.terminate(std::chrono::milliseconds(5000));
        } catch (const std::exception&) {
        }
    };
    try {
        return run_one_shot(spawn, tool, params, std::chrono::seconds(spec.timeout_sec), kill_container);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::spawn_failed) throw Error(ErrorCode::sandbox_unavailable, e.what());
        throw;
    }
}

json ProcessSandbox::execute(const ServerConfig& server, const std::string& tool, const json& params,
                             const SandboxSpec& spec) {
    ++executions_;
    SpawnOptions spawn;
    spawn.argv.push_back(server.command);
    spawn.argv.insert(spawn.argv.end(), server.args.begin(), server.args.end());
    spawn.env = server.env;
    spawn.new_process_group = true;
    const rlim_t memory = static_cast<rlim_t>(spec.memory_limit_mb) * 1024 * 1024;
    const rlim_t cpu = static_cast<rlim_t>(spec.timeout_sec) + 1;
    spawn.pre_exec = [memory, cpu] {
        rlimit as{memory, memory};
        ::setrlimit(RLIMIT_AS, &as);
        rlimit cpu_limit{cpu, cpu};
        ::setrlimit(RLIMIT_CPU, &cpu_limit);
        rlimit files{256, 256};
        ::setrlimit(RLIMIT_NOFILE, &files);
    };
    return run_one_shot(spawn, tool, params, std::chrono::seconds(spec.timeout_sec));
}

std::unique_ptr<SandboxBackend> make_sandbox_backend(const std::string& kind, const std::string& runtime) {
    if (kind == "process") return std::make_unique<ProcessSandbox>();
    if (kind == "docker" || kind == "container") return std::make_unique<ContainerSandbox>(runtime);
    throw Error(ErrorCode::invalid_config, "unknown sandbox backend '" + kind + "'");
}

}  // namespace bridgekit

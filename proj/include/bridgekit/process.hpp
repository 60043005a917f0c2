#pragma once

#include <sys/types.h>

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bridgekit {

struct SpawnOptions {
    std::vector<std::string> argv;             // argv[0] is resolved through PATH
    std::map<std::string, std::string> env;    // merged over the parent environment
    bool new_process_group = true;
    /// Runs in the child between fork and exec. Must only make
    /// async-signal-safe calls (setrlimit, unshare, ...).
    std::function<void()> pre_exec;
};

/// A child process with its stdin and stdout connected to pipes. Stderr is
/// inherited. The destructor kills and reaps the child, so a ChildProcess
/// never leaves a zombie behind.
class ChildProcess {
public:
    /// Throws Error(spawn_failed) if fork or exec fails.
    explicit ChildProcess(const SpawnOptions& options);
    ~ChildProcess();

    ChildProcess(const ChildProcess&) = delete;
    ChildProcess& operator=(const ChildProcess&) = delete;

    pid_t pid() const noexcept { return pid_; }

    /// Writes all bytes to the child's stdin. Returns false once the pipe is broken.
    bool write_all(std::string_view data);

    /// Blocks until a full line (without the '\n') is available. Returns
    /// nullopt at EOF. Only one thread may read.
    std::optional<std::string> read_line();

    void close_stdin();

    /// Non-blocking liveness probe; reaps the child if it has exited.
    bool running();

    /// Closes stdin, sends SIGTERM, waits up to `grace`, then SIGKILLs. Always reaps.
    void terminate(std::chrono::milliseconds grace);

    /// SIGKILL (to the whole group when one was created) and reap.
    void kill();

    std::optional<int> exit_status() const { return exit_status_; }

private:
    bool reap(bool block);
    void signal(int sig);

    pid_t pid_ = -1;
    int stdin_fd_ = -1;
    int stdout_fd_ = -1;
    bool group_ = false;
    bool reaped_ = false;
    std::optional<int> exit_status_;
    std::string buffer_;
};

/// Ignores SIGPIPE process-wide so writes to dead children fail with EPIPE.
void ignore_sigpipe();

}  // namespace bridgekit

#include "bridgekit/process.hpp"

#include "bridgekit/error.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/syscall.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>
#include <thread>

extern char** environ;

namespace bridgekit {

void ignore_sigpipe() {
    static std::once_flag once;
    std::call_once(once, [] { ::signal(SIGPIPE, SIG_IGN); });
}

namespace {

constexpr unsigned kCloseRangeCloexec = 1u << 2;

void close_pair(int fds[2]) {
    if (fds[0] >= 0) ::close(fds[0]);
    if (fds[1] >= 0) ::close(fds[1]);
}

}  // namespace

ChildProcess::ChildProcess(const SpawnOptions& options) {
    ignore_sigpipe();
    if (options.argv.empty() || options.argv.front().empty()) {
        throw Error(ErrorCode::spawn_failed, "empty command");
    }

    // Everything the child needs is built before fork.
    std::vector<char*> argv;
    for (const auto& a : options.argv) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);

    std::map<std::string, std::string> merged;
    for (char** e = environ; e && *e; ++e) {
        std::string_view kv(*e);
        const auto eq = kv.find('=');
        if (eq == std::string_view::npos) continue;
        merged.emplace(std::string(kv.substr(0, eq)), std::string(kv.substr(eq + 1)));
    }
    for (const auto& [k, v] : options.env) merged[k] = v;
    std::vector<std::string> env_storage;
    env_storage.reserve(merged.size());
    for (const auto& [k, v] : merged) env_storage.push_back(k + "=" + v);
    std::vector<char*> envp;
    for (auto& s : env_storage) envp.push_back(s.data());
    envp.push_back(nullptr);

    int in_pipe[2] = {-1, -1};
    int out_pipe[2] = {-1, -1};
    int err_pipe[2] = {-1, -1};
    if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0 ||
        ::pipe2(err_pipe, O_CLOEXEC) != 0) {
        const int err = errno;
        close_pair(in_pipe);
        close_pair(out_pipe);
        close_pair(err_pipe);
        throw Error(ErrorCode::spawn_failed, std::string("pipe: ") + std::strerror(err));
    }

    const pid_t pid = ::fork();
    if (pid < 0) {
        const int err = errno;
        close_pair(in_pipe);
        close_pair(out_pipe);
        close_pair(err_pipe);
        throw Error(ErrorCode::spawn_failed, std::string("fork: ") + std::strerror(err));
    }

    if (pid == 0) {
        if (options.new_process_group) ::setpgid(0, 0);
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::signal(SIGPIPE, SIG_DFL);
        // Drop descriptors inherited from the parent (sockets, other children's pipes).
        // Everything above stderr becomes close-on-exec; err_pipe already is.
        if (::syscall(SYS_close_range, 3u, ~0u, kCloseRangeCloexec) != 0) {
            const long max_fd = ::sysconf(_SC_OPEN_MAX);
            for (int fd = 3; fd < max_fd && fd < 65536; ++fd) {
                if (fd != err_pipe[1]) ::close(fd);
            }
        }
        if (options.pre_exec) options.pre_exec();
        ::execvpe(argv[0], argv.data(), envp.data());
        const int err = errno;
        [[maybe_unused]] auto n = ::write(err_pipe[1], &err, sizeof(err));
        ::_exit(127);
    }

    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    pid_ = pid;
    group_ = options.new_process_group;
    stdin_fd_ = in_pipe[1];
    stdout_fd_ = out_pipe[0];

    int child_errno = 0;
    ssize_t n;
    do {
        n = ::read(err_pipe[0], &child_errno, sizeof(child_errno));
    } while (n < 0 && errno == EINTR);
    ::close(err_pipe[0]);
    if (n > 0) {
        reap(true);
        ::close(stdin_fd_);
        ::close(stdout_fd_);
        stdin_fd_ = stdout_fd_ = -1;
        throw Error(ErrorCode::spawn_failed,
                    "cannot execute '" + options.argv.front() + "': " + std::strerror(child_errno));
    }
}

ChildProcess::~ChildProcess() {
    kill();
    if (stdin_fd_ >= 0) ::close(stdin_fd_);
    if (stdout_fd_ >= 0) ::close(stdout_fd_);
}

bool ChildProcess::write_all(std::string_view data) {
    if (stdin_fd_ < 0) return false;
    while (!data.empty()) {
        const ssize_t n = ::write(stdin_fd_, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
    return true;
}

std::optional<std::string> ChildProcess::read_line() {
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        if (stdout_fd_ < 0) return std::nullopt;
        char chunk[16384];
        const ssize_t n = ::read(stdout_fd_, chunk, sizeof(chunk));
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            if (buffer_.empty()) return std::nullopt;
            std::string line = std::move(buffer_);
            buffer_.clear();
            return line;
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

void ChildProcess::close_stdin() {
    if (stdin_fd_ >= 0) {
        ::close(stdin_fd_);
        stdin_fd_ = -1;
    }
}

bool ChildProcess::reap(bool block) {
    if (reaped_) return true;
    int status = 0;
    pid_t r;
    do {
        r = ::waitpid(pid_, &status, block ? 0 : WNOHANG);
    } while (r < 0 && errno == EINTR);
    if (r == pid_ || (r < 0 && errno == ECHILD)) {
        reaped_ = true;
        if (r == pid_) {
            exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
        }
        return true;
    }
    return false;
}

bool ChildProcess::running() {
    if (pid_ <= 0) return false;
    return !reap(false);
}

void ChildProcess::signal(int sig) {
    if (reaped_ || pid_ <= 0) return;
    if (group_) {
        ::kill(-pid_, sig);
    } else {
        ::kill(pid_, sig);
    }
}

void ChildProcess::terminate(std::chrono::milliseconds grace) {
    if (pid_ <= 0) return;
    close_stdin();
    signal(SIGTERM);
    const auto deadline = std::chrono::steady_clock::now() + grace;
    while (std::chrono::steady_clock::now() < deadline) {
        if (reap(false)) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    kill();
}

void ChildProcess::kill() {
    if (pid_ <= 0 || reaped_) return;
    signal(SIGKILL);
    reap(true);
}

}  // namespace bridgekit

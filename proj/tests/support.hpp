#pragma once

#include "bridgekit/config.hpp"
#include "bridgekit/mock_fleet.hpp"
#include "bridgekit/util.hpp"

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <string>
#include <thread>

namespace testsupport {

inline const std::string kBinary = BRIDGEKIT_BIN;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir() {
        std::string tmpl = (std::filesystem::temp_directory_path() / "bridgekit-test-XXXXXX").string();
        path_ = ::mkdtemp(tmpl.data());
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

inline bool wait_until(const std::function<bool()>& pred, std::chrono::milliseconds timeout,
                       std::chrono::milliseconds step = std::chrono::milliseconds(10)) {
    const auto deadline = bridgekit::Clock::now() + timeout;
    while (bridgekit::Clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(step);
    }
    return pred();
}

/// A TCP port that was free a moment ago, for children that need a fixed port.
inline int free_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);
    return ntohs(addr.sin_port);
}

inline bridgekit::mock::MockBehavior behavior(const std::string& name,
                                              std::vector<bridgekit::mock::MockTool> tools) {
    bridgekit::mock::MockBehavior b;
    b.server_name = name;
    b.tools = std::move(tools);
    return b;
}

inline bridgekit::ServerConfig mock_config(const bridgekit::mock::MockBehavior& b, int risk = 1) {
    return bridgekit::mock::mock_server_config(kBinary, b, risk);
}

/// Supervisor timings short enough for tests.
inline bridgekit::SupervisorOptions fast_supervisor() {
    bridgekit::SupervisorOptions o;
    o.heartbeat_interval = std::chrono::milliseconds(300);
    o.heartbeat_deadline = std::chrono::milliseconds(500);
    o.request_timeout = std::chrono::milliseconds(3000);
    o.backoff_initial = std::chrono::milliseconds(50);
    o.backoff_cap = std::chrono::milliseconds(400);
    o.max_reconnect_attempts = 5;
    o.shutdown_grace = std::chrono::milliseconds(500);
    return o;
}

}  // namespace testsupport

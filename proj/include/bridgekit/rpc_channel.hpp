#pragma once

#include "bridgekit/error.hpp"
#include "bridgekit/json_rpc.hpp"
#include "bridgekit/transport.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <string>

namespace bridgekit {

/// A JSON-RPC error response returned by the server.
class RpcFault : public Error {
public:
    explicit RpcFault(RpcError error)
        : Error(ErrorCode::tool_error, error.message), error_(std::move(error)) {}

    const RpcError& rpc_error() const noexcept { return error_; }

private:
    RpcError error_;
};

/// Request/response correlation on top of a Transport. Ids are allocated per
/// channel; a response is handed only to the caller waiting on its id.
/// Malformed lines are counted and skipped, never fatal to the stream.
class RpcChannel {
public:
    using CloseHandler = std::function<void(const std::string& reason)>;

    explicit RpcChannel(std::unique_ptr<Transport> transport);
    ~RpcChannel();

    RpcChannel(const RpcChannel&) = delete;
    RpcChannel& operator=(const RpcChannel&) = delete;

    void start(CloseHandler on_close = {});

    /// Sends a request and blocks for its response. Throws RpcFault for an
    /// error response, Error(request_timeout) after `timeout`, and
    /// Error(transport_failure) (or the code given to close()) if the link dies.
    json call(const std::string& method, const json& params, std::chrono::milliseconds timeout);

    void notify(const std::string& method, const json& params = nullptr);

    /// Fails every outstanding call with `code` and shuts the transport down.
    void close(ErrorCode code, const std::string& reason, std::chrono::milliseconds grace);

    bool open() const { return open_; }
    bool alive();
    std::size_t malformed_frames() const { return malformed_; }
    std::size_t in_flight() const;
    std::vector<pid_t> pids() const { return transport_->pids(); }

private:
    void on_line(std::string_view line);
    void fail_pending(ErrorCode code, const std::string& reason);

    std::unique_ptr<Transport> transport_;
    mutable std::mutex mutex_;
    std::map<std::int64_t, std::promise<RpcMessage>> pending_;
    std::int64_t next_id_ = 1;
    std::atomic<bool> open_{false};
    std::atomic<bool> closing_{false};
    std::atomic<std::size_t> malformed_{0};
    ErrorCode close_code_ = ErrorCode::transport_failure;
    CloseHandler on_close_;
};

/// Runs `initialize`, sends `notifications/initialized`, then lists tools,
/// resources and prompts. Servers answering "method not found" to a list
/// call contribute an empty list. The whole exchange must finish within
/// `timeout`, otherwise Error(connect_timeout) is thrown.
Capabilities initialize_handshake(RpcChannel& channel, std::chrono::milliseconds timeout);

inline constexpr const char* kProtocolVersion = "2025-03-26";

}  // namespace bridgekit

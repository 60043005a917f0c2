#pragma once

#include "bridgekit/process.hpp"
#include "bridgekit/util.hpp"

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace httplib {
class Client;
}

namespace bridgekit {

/// A bidirectional line-oriented link to one MCP server. Each transport owns
/// exactly one reader thread; `send` is serialized internally so there is
/// only ever one writer.
class Transport {
public:
    using LineHandler = std::function<void(std::string_view line)>;
    using CloseHandler = std::function<void(const std::string& reason)>;

    virtual ~Transport() = default;

    /// Starts the reader. Handlers run on the reader thread and must not call
    /// `shutdown` on this transport.
    virtual void start(LineHandler on_line, CloseHandler on_close) = 0;

    /// Sends one newline-terminated frame. Returns false when the link is broken.
    virtual bool send(std::string_view frame) = 0;

    virtual void shutdown(std::chrono::milliseconds grace) = 0;

    virtual bool alive() = 0;

    /// Child processes backing this transport (empty for network transports).
    virtual std::vector<pid_t> pids() const { return {}; }
};

class StdioTransport final : public Transport {
public:
    explicit StdioTransport(const SpawnOptions& options);
    ~StdioTransport() override;

    void start(LineHandler on_line, CloseHandler on_close) override;
    bool send(std::string_view frame) override;
    void shutdown(std::chrono::milliseconds grace) override;
    bool alive() override;
    std::vector<pid_t> pids() const override;

private:
    ChildProcess child_;
    std::mutex mutex_;  // guards child_ writes and lifecycle calls
    std::thread reader_;
    std::atomic<bool> closed_{false};
};

/// Incremental parser for a `text/event-stream` body.
class SseParser {
public:
    using EventHandler = std::function<void(const std::string& event, const std::string& data)>;

    explicit SseParser(EventHandler handler) : handler_(std::move(handler)) {}

    void feed(std::string_view chunk);

private:
    void line(std::string_view l);

    EventHandler handler_;
    std::string pending_;
    std::string event_;
    std::string data_;
    bool has_data_ = false;
    bool skip_lf_ = false;
};

/// MCP over Server-Sent Events: server-to-bridge messages arrive as `data:`
/// fields on a long-lived GET, bridge-to-server messages are POSTed to the
/// message endpoint. The endpoint comes from configuration or, failing that,
/// from the server's `endpoint` event.
class SseTransport final : public Transport {
public:
    SseTransport(std::string stream_url, std::optional<std::string> post_url,
                 std::chrono::milliseconds endpoint_wait = std::chrono::milliseconds(5000));
    ~SseTransport() override;

    void start(LineHandler on_line, CloseHandler on_close) override;
    bool send(std::string_view frame) override;
    void shutdown(std::chrono::milliseconds grace) override;
    bool alive() override;

private:
    Url stream_url_;
    std::optional<std::string> post_url_;
    std::chrono::milliseconds endpoint_wait_;
    std::unique_ptr<httplib::Client> stream_client_;
    std::unique_ptr<httplib::Client> post_client_;
    std::mutex mutex_;
    std::condition_variable endpoint_cv_;
    std::mutex send_mutex_;
    std::thread reader_;
    std::atomic<bool> closed_{false};
    std::atomic<bool> stopping_{false};
};

}  // namespace bridgekit

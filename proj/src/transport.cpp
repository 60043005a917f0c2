#include "bridgekit/transport.hpp"

#include "bridgekit/error.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace bridgekit {

StdioTransport::StdioTransport(const SpawnOptions& options) : child_(options) {}

StdioTransport::~StdioTransport() { shutdown(std::chrono::milliseconds(0)); }

void StdioTransport::start(LineHandler on_line, CloseHandler on_close) {
    reader_ = std::thread([this, on_line = std::move(on_line), on_close = std::move(on_close)] {
        while (auto line = child_.read_line()) {
            on_line(*line);
        }
        closed_ = true;
        if (on_close) on_close("server process closed its output");
    });
}

bool StdioTransport::send(std::string_view frame) {
    std::lock_guard lock(mutex_);
    if (closed_) return false;
    return child_.write_all(frame);
}

void StdioTransport::shutdown(std::chrono::milliseconds grace) {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
        child_.terminate(grace);
    }
    if (reader_.joinable()) {
        if (reader_.get_id() == std::this_thread::get_id()) {
            reader_.detach();
        } else {
            reader_.join();
        }
    }
}

bool StdioTransport::alive() {
    std::lock_guard lock(mutex_);
    return !closed_ && child_.running();
}

std::vector<pid_t> StdioTransport::pids() const { return {child_.pid()}; }

void SseParser::feed(std::string_view chunk) {
    for (char c : chunk) {
        if (skip_lf_) {
            skip_lf_ = false;
            if (c == '\n') continue;
        }
        if (c == '\r' || c == '\n') {
            skip_lf_ = c == '\r';
            line(pending_);
            pending_.clear();
        } else {
            pending_.push_back(c);
        }
    }
}

void SseParser::line(std::string_view l) {
    if (l.empty()) {
        if (has_data_) handler_(event_.empty() ? "message" : event_, data_);
        event_.clear();
        data_.clear();
        has_data_ = false;
        return;
    }
    if (l.front() == ':') return;
    const auto colon = l.find(':');
    std::string_view field = l.substr(0, colon);
    std::string_view value;
    if (colon != std::string_view::npos) {
        value = l.substr(colon + 1);
        if (!value.empty() && value.front() == ' ') value.remove_prefix(1);
    }
    if (field == "event") {
        event_ = std::string(value);
    } else if (field == "data") {
        if (has_data_) data_.push_back('\n');
        data_ += value;
        has_data_ = true;
    }
}

SseTransport::SseTransport(std::string stream_url, std::optional<std::string> post_url,
                           std::chrono::milliseconds endpoint_wait)
    : stream_url_(parse_url(stream_url)), post_url_(std::move(post_url)), endpoint_wait_(endpoint_wait) {
    stream_client_ = std::make_unique<httplib::Client>(stream_url_.origin());
    stream_client_->set_read_timeout(std::chrono::hours(24));
    stream_client_->set_connection_timeout(std::chrono::seconds(5));
}

SseTransport::~SseTransport() { shutdown(std::chrono::milliseconds(0)); }

void SseTransport::start(LineHandler on_line, CloseHandler on_close) {
    reader_ = std::thread([this, on_line = std::move(on_line), on_close = std::move(on_close)] {
        SseParser parser([&](const std::string& event, const std::string& data) {
            if (event == "endpoint") {
                std::lock_guard lock(mutex_);
                if (!post_url_) {
                    post_url_ = data.rfind("http", 0) == 0 ? data : stream_url_.origin() + data;
                }
                endpoint_cv_.notify_all();
            } else if (event == "message") {
                on_line(data);
            }
        });
        httplib::Headers headers = {{"Accept", "text/event-stream"}};
        auto res = stream_client_->Get(stream_url_.path, headers, [&](const char* data, size_t n) {
            if (stopping_) return false;
            parser.feed(std::string_view(data, n));
            return true;
        });
        std::string reason = "event stream ended";
        if (!res) {
            reason = "event stream failed: " + httplib::to_string(res.error());
        } else if (res->status != 200) {
            reason = "event stream rejected with HTTP " + std::to_string(res->status);
        }
        closed_ = true;
        endpoint_cv_.notify_all();
        if (on_close) on_close(reason);
    });
}

bool SseTransport::send(std::string_view frame) {
    std::string target;
    {
        std::unique_lock lock(mutex_);
        if (!endpoint_cv_.wait_for(lock, endpoint_wait_, [&] { return post_url_.has_value() || closed_.load(); }) ||
            closed_) {
            return false;
        }
        target = *post_url_;
    }
    std::lock_guard send_lock(send_mutex_);
    Url url;
    try {
        url = parse_url(target);
    } catch (const Error& e) {
        spdlog::warn("sse: bad message endpoint {}: {}", target, e.what());
        return false;
    }
    if (!post_client_) {
        post_client_ = std::make_unique<httplib::Client>(url.origin());
        post_client_->set_keep_alive(true);
    }
    std::string body(frame);
    while (!body.empty() && body.back() == '\n') body.pop_back();
    auto res = post_client_->Post(url.path, body, "application/json");
    return res && res->status >= 200 && res->status < 300;
}

void SseTransport::shutdown(std::chrono::milliseconds) {
    stopping_ = true;
    closed_ = true;
    endpoint_cv_.notify_all();
    if (stream_client_) stream_client_->stop();
    if (reader_.joinable()) {
        if (reader_.get_id() == std::this_thread::get_id()) {
            reader_.detach();
        } else {
            reader_.join();
        }
    }
}

bool SseTransport::alive() { return !closed_; }

}  // namespace bridgekit

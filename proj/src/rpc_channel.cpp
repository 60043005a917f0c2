#include "bridgekit/rpc_channel.hpp"

#include <spdlog/spdlog.h>

#include <set>

namespace bridgekit {

RpcChannel::RpcChannel(std::unique_ptr<Transport> transport) : transport_(std::move(transport)) {}

RpcChannel::~RpcChannel() { close(ErrorCode::transport_failure, "channel destroyed", std::chrono::milliseconds(0)); }

void RpcChannel::start(CloseHandler on_close) {
    on_close_ = std::move(on_close);
    open_ = true;
    transport_->start([this](std::string_view line) { on_line(line); },
                      [this](const std::string& reason) {
                          const bool deliberate = closing_.load();
                          open_ = false;
                          fail_pending(deliberate ? close_code_ : ErrorCode::transport_failure, reason);
                          if (!deliberate && on_close_) on_close_(reason);
                      });
}

void RpcChannel::on_line(std::string_view line) {
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) return;
    RpcMessage msg;
    try {
        msg = decode_frame(line);
    } catch (const Error& e) {
        ++malformed_;
        spdlog::debug("rpc: dropping frame: {}", e.what());
        return;
    }
    switch (msg.kind) {
        case RpcMessage::Kind::response: {
            const auto* id = std::get_if<std::int64_t>(&*msg.id);
            if (!id) return;
            std::promise<RpcMessage> p;
            {
                std::lock_guard lock(mutex_);
                auto it = pending_.find(*id);
                if (it == pending_.end()) return;  // late reply to a timed-out call
                p = std::move(it->second);
                pending_.erase(it);
            }
            p.set_value(std::move(msg));
            break;
        }
        case RpcMessage::Kind::request: {
            // Server-initiated requests: answer pings, refuse the rest.
            RpcMessage reply = msg.method == "ping"
                                   ? RpcMessage::success(*msg.id, json::object())
                                   : RpcMessage::failure(*msg.id, {rpc_codes::method_not_found,
                                                                   "method not supported by bridge", {}});
            transport_->send(encode_frame(reply));
            break;
        }
        case RpcMessage::Kind::notification:
            break;
    }
}

json RpcChannel::call(const std::string& method, const json& params, std::chrono::milliseconds timeout) {
    std::int64_t id;
    std::future<RpcMessage> future;
    {
        std::lock_guard lock(mutex_);
        if (!open_) throw Error(close_code_, "connection to MCP server is closed");
        id = next_id_++;
        future = pending_[id].get_future();
    }
    const auto frame = encode_frame(RpcMessage::request(id, method, params));
    if (!transport_->send(frame)) {
        std::lock_guard lock(mutex_);
        pending_.erase(id);
        throw Error(closing_ ? close_code_ : ErrorCode::transport_failure, "failed to write to MCP server");
    }
    if (future.wait_for(timeout) != std::future_status::ready) {
        std::lock_guard lock(mutex_);
        if (pending_.erase(id) > 0) {
            throw Error(ErrorCode::request_timeout,
                        method + " timed out after " + std::to_string(timeout.count()) + " ms");
        }
        // The reply raced the timeout; fall through and take it.
    }
    RpcMessage reply = future.get();
    if (reply.error) throw RpcFault(*reply.error);
    return std::move(reply.result);
}

void RpcChannel::notify(const std::string& method, const json& params) {
    transport_->send(encode_frame(RpcMessage::notification(method, params)));
}

void RpcChannel::fail_pending(ErrorCode code, const std::string& reason) {
    std::map<std::int64_t, std::promise<RpcMessage>> drained;
    {
        std::lock_guard lock(mutex_);
        drained.swap(pending_);
    }
    for (auto& [id, p] : drained) {
        p.set_exception(std::make_exception_ptr(Error(code, reason)));
    }
}

void RpcChannel::close(ErrorCode code, const std::string& reason, std::chrono::milliseconds grace) {
    {
        std::lock_guard lock(mutex_);
        if (closing_.exchange(true)) return;
        close_code_ = code;
        open_ = false;
    }
    fail_pending(code, reason);
    transport_->shutdown(grace);
}

bool RpcChannel::alive() { return open_ && transport_->alive(); }

std::size_t RpcChannel::in_flight() const {
    std::lock_guard lock(mutex_);
    return pending_.size();
}

namespace {

std::chrono::milliseconds remaining(Clock::time_point deadline) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    return std::max(left, std::chrono::milliseconds(1));
}

/// Collects every page of a list call. Method-not-found yields an empty list.
std::vector<json> list_all(RpcChannel& channel, const std::string& method, const std::string& key,
                           Clock::time_point deadline) {
    std::vector<json> items;
    json params = json::object();
    for (int page = 0; page < 1000; ++page) {
        json result;
        try {
            result = channel.call(method, params, remaining(deadline));
        } catch (const RpcFault& f) {
            if (f.rpc_error().code == rpc_codes::method_not_found) return items;
            throw;
        }
        if (!result.is_object() || !result.contains(key) || !result.at(key).is_array()) {
            throw Error(ErrorCode::protocol_error, method + " reply has no '" + key + "' array");
        }
        for (auto& item : result.at(key)) items.push_back(item);
        const auto cursor = result.find("nextCursor");
        if (cursor == result.end() || !cursor->is_string() || cursor->get<std::string>().empty()) break;
        params["cursor"] = *cursor;
    }
    return items;
}

}  // namespace

Capabilities initialize_handshake(RpcChannel& channel, std::chrono::milliseconds timeout) {
    const auto deadline = Clock::now() + timeout;
    try {
        const json init = channel.call("initialize",
                                       {{"protocolVersion", kProtocolVersion},
                                        {"capabilities", json::object()},
                                        {"clientInfo", {{"name", "bridgekit"}, {"version", "1.0.0"}}}},
                                       remaining(deadline));
        if (!init.is_object()) throw Error(ErrorCode::protocol_error, "initialize reply is not an object");
        channel.notify("notifications/initialized");

        Capabilities caps;
        std::set<std::string> seen;
        for (const auto& t : list_all(channel, "tools/list", "tools", deadline)) {
            auto tool = tool_from_json(t);
            if (!seen.insert(tool.name).second) {
                throw Error(ErrorCode::protocol_error, "duplicate tool name: " + tool.name);
            }
            caps.tools.push_back(std::move(tool));
        }
        caps.resources = list_all(channel, "resources/list", "resources", deadline);
        caps.prompts = list_all(channel, "prompts/list", "prompts", deadline);
        return caps;
    } catch (const RpcFault& f) {
        throw Error(ErrorCode::protocol_error, std::string("handshake rejected: ") + f.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::request_timeout) {
            throw Error(ErrorCode::connect_timeout, "Failed to connect to MCP server");
        }
        throw;
    }
}

}  // namespace bridgekit

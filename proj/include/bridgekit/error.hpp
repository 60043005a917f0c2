#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bridgekit {

/// Failure categories shared by every layer of the bridge. The gateway maps
/// each one onto a single HTTP status.
enum class ErrorCode {
    not_found,
    bad_request,
    invalid_config,
    spawn_failed,
    connect_timeout,
    request_timeout,
    transport_failure,
    server_unavailable,
    server_stopped,
    tool_error,
    parse_error,
    protocol_error,
    resource_exhausted,
    sandbox_unavailable,
    sandbox_timeout,
    backend_error,
    encoding_error,
};

std::string_view to_string(ErrorCode code);

/// HTTP status used when an error of this kind escapes to a REST client.
int http_status(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace bridgekit

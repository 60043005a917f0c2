#pragma once

/// JSON-RPC 2.0 message model and the newline-delimited frame codec used on
/// the STDIO transport, plus the MCP capability descriptors discovered
/// during the handshake.

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace bridgekit {

using json = nlohmann::json;

using RpcId = std::variant<std::int64_t, std::string>;

struct RpcError {
    std::int64_t code = 0;
    std::string message;
    std::optional<json> data;

    bool operator==(const RpcError&) const = default;
};

/// Standard JSON-RPC error codes used by the mock fleet and the bridge.
namespace rpc_codes {
inline constexpr std::int64_t parse_error = -32700;
inline constexpr std::int64_t invalid_request = -32600;
inline constexpr std::int64_t method_not_found = -32601;
inline constexpr std::int64_t invalid_params = -32602;
inline constexpr std::int64_t internal_error = -32603;
}  // namespace rpc_codes

struct RpcMessage {
    enum class Kind { request, response, notification };

    Kind kind = Kind::request;
    std::optional<RpcId> id;
    std::string method;
    json params;                     // null means "omitted"
    json result;                     // responses without error
    std::optional<RpcError> error;

    static RpcMessage request(RpcId id, std::string method, json params = nullptr);
    static RpcMessage notification(std::string method, json params = nullptr);
    static RpcMessage success(RpcId id, json result);
    static RpcMessage failure(RpcId id, RpcError error);

    bool operator==(const RpcMessage&) const = default;
};

/// Throws Error(protocol_error) when the message breaks the kind invariants.
void validate(const RpcMessage& msg);

json to_json(const RpcMessage& msg);

/// Builds a message from an already-parsed JSON value.
/// Throws Error(protocol_error) for valid JSON that is not a JSON-RPC message.
RpcMessage from_json(const json& value);

/// One compact JSON line terminated by '\n'.
std::string encode_frame(const RpcMessage& msg);

/// Parses one line (trailing whitespace tolerated). Malformed JSON throws
/// Error(parse_error) with the offending line in the message; well-formed
/// JSON violating the message rules throws Error(protocol_error).
RpcMessage decode_frame(std::string_view line);

std::string id_to_string(const RpcId& id);

struct ToolDescriptor {
    std::string name;
    std::string description;
    json input_schema = json::object();

    bool operator==(const ToolDescriptor&) const = default;
};

struct Capabilities {
    std::vector<ToolDescriptor> tools;
    std::vector<json> resources;
    std::vector<json> prompts;

    const ToolDescriptor* find_tool(std::string_view name) const;

    bool operator==(const Capabilities&) const = default;
};

json to_json(const ToolDescriptor& tool);
ToolDescriptor tool_from_json(const json& value);

}  // namespace bridgekit

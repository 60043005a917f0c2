#include "bridgekit/json_rpc.hpp"

#include "bridgekit/error.hpp"

#include <algorithm>

namespace bridgekit {

RpcMessage RpcMessage::request(RpcId id, std::string method, json params) {
    RpcMessage m;
    m.kind = Kind::request;
    m.id = std::move(id);
    m.method = std::move(method);
    m.params = std::move(params);
    return m;
}

RpcMessage RpcMessage::notification(std::string method, json params) {
    RpcMessage m;
    m.kind = Kind::notification;
    m.method = std::move(method);
    m.params = std::move(params);
    return m;
}

RpcMessage RpcMessage::success(RpcId id, json result) {
    RpcMessage m;
    m.kind = Kind::response;
    m.id = std::move(id);
    m.result = std::move(result);
    return m;
}

RpcMessage RpcMessage::failure(RpcId id, RpcError error) {
    RpcMessage m;
    m.kind = Kind::response;
    m.id = std::move(id);
    m.error = std::move(error);
    return m;
}

void validate(const RpcMessage& msg) {
    switch (msg.kind) {
        case RpcMessage::Kind::request:
            if (!msg.id) throw Error(ErrorCode::protocol_error, "request without id");
            [[fallthrough]];
        case RpcMessage::Kind::notification:
            if (msg.kind == RpcMessage::Kind::notification && msg.id) {
                throw Error(ErrorCode::protocol_error, "notification carrying an id");
            }
            if (msg.method.empty()) throw Error(ErrorCode::protocol_error, "missing method");
            if (msg.error || !msg.result.is_null()) {
                throw Error(ErrorCode::protocol_error, "request carrying result or error");
            }
            if (!msg.params.is_null() && !msg.params.is_object() && !msg.params.is_array()) {
                throw Error(ErrorCode::protocol_error, "params must be an object or array");
            }
            break;
        case RpcMessage::Kind::response:
            if (!msg.id) throw Error(ErrorCode::protocol_error, "response without id");
            if (!msg.method.empty()) throw Error(ErrorCode::protocol_error, "response carrying a method");
            if (msg.error && !msg.result.is_null()) {
                throw Error(ErrorCode::protocol_error, "response carries both result and error");
            }
            break;
    }
}

namespace {

json id_json(const RpcId& id) {
    return std::visit([](const auto& v) { return json(v); }, id);
}

RpcId id_from(const json& v) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_unsigned()) return static_cast<std::int64_t>(v.get<std::uint64_t>());
    if (v.is_string()) return v.get<std::string>();
    throw Error(ErrorCode::protocol_error, "id must be an integer or string");
}

}  // namespace

json to_json(const RpcMessage& msg) {
    validate(msg);
    json j = {{"jsonrpc", "2.0"}};
    if (msg.id) j["id"] = id_json(*msg.id);
    if (msg.kind == RpcMessage::Kind::response) {
        if (msg.error) {
            json e = {{"code", msg.error->code}, {"message", msg.error->message}};
            if (msg.error->data) e["data"] = *msg.error->data;
            j["error"] = std::move(e);
        } else {
            j["result"] = msg.result;
        }
    } else {
        j["method"] = msg.method;
        if (!msg.params.is_null()) j["params"] = msg.params;
    }
    return j;
}

RpcMessage from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorCode::protocol_error, "JSON-RPC frame must be an object");
    const auto version = j.find("jsonrpc");
    if (version == j.end() || *version != "2.0") {
        throw Error(ErrorCode::protocol_error, "missing or unsupported jsonrpc version");
    }
    RpcMessage m;
    if (const auto id = j.find("id"); id != j.end()) m.id = id_from(*id);

    if (const auto method = j.find("method"); method != j.end()) {
        if (!method->is_string()) throw Error(ErrorCode::protocol_error, "method must be a string");
        m.method = method->get<std::string>();
        m.kind = m.id ? RpcMessage::Kind::request : RpcMessage::Kind::notification;
        if (j.contains("result") || j.contains("error")) {
            throw Error(ErrorCode::protocol_error, "request carrying result or error");
        }
        if (const auto p = j.find("params"); p != j.end()) m.params = *p;
    } else {
        m.kind = RpcMessage::Kind::response;
        const bool has_result = j.contains("result");
        const bool has_error = j.contains("error");
        if (has_result && has_error) {
            throw Error(ErrorCode::protocol_error, "response carries both result and error");
        }
        if (!has_result && !has_error) {
            throw Error(ErrorCode::protocol_error, "response carries neither result nor error");
        }
        if (has_result) {
            m.result = j.at("result");
        } else {
            const json& e = j.at("error");
            if (!e.is_object() || !e.contains("code") || !e.at("code").is_number_integer()) {
                throw Error(ErrorCode::protocol_error, "malformed error object");
            }
            RpcError err;
            err.code = e.at("code").get<std::int64_t>();
            err.message = e.value("message", "");
            if (const auto d = e.find("data"); d != e.end()) err.data = *d;
            m.error = std::move(err);
        }
    }
    validate(m);
    return m;
}

std::string encode_frame(const RpcMessage& msg) {
    try {
        std::string line = to_json(msg).dump();
        line.push_back('\n');
        return line;
    } catch (const json::type_error& e) {
        throw Error(ErrorCode::encoding_error, std::string("cannot serialize message: ") + e.what());
    }
}

RpcMessage decode_frame(std::string_view line) {
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r' || line.back() == ' ' ||
                             line.back() == '\t')) {
        line.remove_suffix(1);
    }
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded()) {
        throw Error(ErrorCode::parse_error, "malformed JSON-RPC frame: " + std::string(line));
    }
    return from_json(j);
}

std::string id_to_string(const RpcId& id) {
    return std::visit(
        [](const auto& v) -> std::string {
            if constexpr (std::is_same_v<std::decay_t<decltype(v)>, std::string>) {
                return v;
            } else {
                return std::to_string(v);
            }
        },
        id);
}

const ToolDescriptor* Capabilities::find_tool(std::string_view name) const {
    const auto it = std::find_if(tools.begin(), tools.end(),
                                 [&](const ToolDescriptor& t) { return t.name == name; });
    return it == tools.end() ? nullptr : &*it;
}

json to_json(const ToolDescriptor& tool) {
    return {{"name", tool.name}, {"description", tool.description}, {"inputSchema", tool.input_schema}};
}

ToolDescriptor tool_from_json(const json& value) {
    if (!value.is_object()) throw Error(ErrorCode::protocol_error, "tool descriptor must be an object");
    const auto name = value.find("name");
    if (name == value.end() || !name->is_string() || name->get<std::string>().empty()) {
        throw Error(ErrorCode::protocol_error, "tool descriptor without a name");
    }
    ToolDescriptor t;
    t.name = name->get<std::string>();
    if (const auto d = value.find("description"); d != value.end() && d->is_string()) {
        t.description = d->get<std::string>();
    }
    if (const auto s = value.find("inputSchema"); s != value.end()) t.input_schema = *s;
    return t;
}

}  // namespace bridgekit

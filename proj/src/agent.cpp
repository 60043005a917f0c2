#include "bridgekit/agent.hpp"

#include "bridgekit/util.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>

namespace bridgekit::agent {

namespace {

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

std::size_t code_points(std::string_view s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return !is_continuation(static_cast<unsigned char>(c)); }));
}

/// Byte offset just past the first `n` code points of `s`.
std::size_t prefix_bytes(std::string_view s, std::size_t n) {
    std::size_t i = 0;
    std::size_t seen = 0;
    while (i < s.size()) {
        if (!is_continuation(static_cast<unsigned char>(s[i]))) {
            if (seen == n) break;
            ++seen;
        }
        ++i;
    }
    return i;
}

std::string one_line(std::string_view s) {
    std::string out(s);
    std::replace_if(out.begin(), out.end(), [](char c) { return c == '\n' || c == '\r' || c == '\t'; }, ' ');
    return out;
}

std::string argument_hint(const json& schema) {
    const auto props = schema.find("properties");
    if (props == schema.end() || !props->is_object() || props->empty()) return {};
    std::string out = " (arguments: ";
    bool first = true;
    for (const auto& [key, _] : props->items()) {
        if (!first) out += ", ";
        out += key;
        first = false;
    }
    return out + ")";
}

const char* kCallFormat =
    "To use a tool, reply with one block per call in exactly this format:\n"
    "<tool_call>\n"
    "{\"name\": \"tool_name\", \"arguments\": {\"arg1\": \"...\", \"arg2\": \"...\"}}\n"
    "</tool_call>\n"
    "Use the server-qualified names listed above. If no tool is needed, answer directly.";

std::string system_text(const std::vector<AgentTool>& tools, const PromptSpec& spec) {
    std::ostringstream os;
    os << "You are an assistant connected to tools through an MCP bridge.\n\nAvailable Tools\n";
    const auto n = std::min(tools.size(), spec.max_tools);
    if (n == 0) os << "(none)\n";
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = tools[i];
        os << "- " << t.qualified() << ": "
           << truncate_description(one_line(t.tool.description), spec.max_description_chars)
           << argument_hint(t.tool.input_schema) << '\n';
    }
    os << '\n' << kCallFormat;
    return os.str();
}

}  // namespace

ScriptedLlm::ScriptedLlm(std::vector<std::string> responses) : responses_(responses.begin(), responses.end()) {}

std::string ScriptedLlm::complete(const ChatPrompt& prompt) {
    std::lock_guard lock(mutex_);
    seen_.push_back(prompt);
    if (responses_.empty()) throw Error(ErrorCode::backend_error, "scripted LLM has no responses left");
    auto next = std::move(responses_.front());
    responses_.pop_front();
    return next;
}

std::vector<ChatPrompt> ScriptedLlm::prompts() const {
    std::lock_guard lock(mutex_);
    return seen_;
}

std::size_t ScriptedLlm::remaining() const {
    std::lock_guard lock(mutex_);
    return responses_.size();
}

HttpLlm::HttpLlm(HttpLlmConfig config) : config_(std::move(config)) {}

std::string HttpLlm::complete(const ChatPrompt& prompt) {
    Url url;
    try {
        url = parse_url(config_.endpoint);
    } catch (const Error& e) {
        throw Error(ErrorCode::backend_error, std::string("bad LLM endpoint: ") + e.what());
    }
    httplib::Client client(url.origin());
    if (!client.is_valid()) {
        throw Error(ErrorCode::backend_error, "LLM endpoint scheme not supported by this build: " + url.scheme);
    }
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout).count();
    client.set_read_timeout(static_cast<time_t>(secs), 0);
    client.set_write_timeout(static_cast<time_t>(secs), 0);

    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw Error(ErrorCode::backend_error, "environment variable " + config_.api_key_env + " is not set");
        }
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const json body = {{"model", config_.model},
                       {"messages",
                        {{{"role", "system"}, {"content", prompt.system}},
                         {{"role", "user"}, {"content", prompt.user}}}}};
    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) throw Error(ErrorCode::backend_error, "LLM request failed: " + httplib::to_string(res.error()));
    if (res->status / 100 != 2) {
        throw Error(ErrorCode::backend_error, "LLM returned HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    const json reply = json::parse(res->body, nullptr, false);
    try {
        return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::backend_error, "LLM response has no choices[0].message.content");
    }
}

std::string truncate_description(std::string_view text, std::size_t max_chars) {
    if (code_points(text) <= max_chars) return std::string(text);
    if (max_chars <= 3) return std::string(text.substr(0, prefix_bytes(text, max_chars)));
    return std::string(text.substr(0, prefix_bytes(text, max_chars - 3))) + "...";
}

ChatPrompt build_prompt(std::string_view query, const std::vector<AgentTool>& tools, const PromptSpec& spec) {
    return {system_text(tools, spec), std::string(query)};
}

json to_json(const ToolOutcome& o) {
    return {{"server", o.server}, {"tool", o.tool}, {"arguments", o.arguments}, {"status", o.status},
            {"result", o.result}};
}

ChatPrompt build_result_prompt(std::string_view query, const std::vector<AgentTool>& tools,
                               const std::vector<ToolOutcome>& outcomes, const PromptSpec& spec) {
    std::ostringstream os;
    os << "Original request:\n" << query << "\n\nTool results:\n";
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& o = outcomes[i];
        os << i + 1 << ". " << (o.server.empty() ? o.tool : o.server + "::" + o.tool) << " [" << o.status
           << "]\n"
           << o.result.dump() << '\n';
    }
    os << "\nAnswer the original request using these results.";
    return {system_text(tools, spec), os.str()};
}

ScriptedOperator::ScriptedOperator(std::vector<bool> decisions) : decisions_(decisions.begin(), decisions.end()) {}

bool ScriptedOperator::approve(const ConfirmationRequest&) {
    ++asked_;
    if (decisions_.empty()) return false;
    const bool d = decisions_.front();
    decisions_.pop_front();
    return d;
}

TerminalOperator::TerminalOperator(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

bool TerminalOperator::approve(const ConfirmationRequest& r) {
    out_ << "\nTool " << r.server << "::" << r.tool << " requires confirmation (risk level " << r.risk_level
         << ").\nArguments: " << r.arguments.dump() << "\nExpires: " << r.expires_at << "\nExecute? [y/N] "
         << std::flush;
    std::string line;
    if (!std::getline(in_, line)) return false;
    line.erase(std::remove_if(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }),
               line.end());
    std::transform(line.begin(), line.end(), line.begin(), [](unsigned char c) { return std::tolower(c); });
    return line == "y" || line == "yes";
}

std::string url_encode(std::string_view text) {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += kHex[c >> 4];
            out += kHex[c & 0xF];
        }
    }
    return out;
}

BridgeClient::BridgeClient(const std::string& base_url, std::chrono::milliseconds timeout) : base_url_(base_url) {
    const Url url = parse_url(base_url);
    client_ = std::make_unique<httplib::Client>(url.origin());
    prefix_ = url.path == "/" ? "" : url.path;
    if (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    client_->set_keep_alive(true);
    client_->set_tcp_nodelay(true);
    const auto ms = timeout.count();
    client_->set_read_timeout(static_cast<time_t>(ms / 1000), static_cast<time_t>((ms % 1000) * 1000));
    client_->set_connection_timeout(5, 0);
}

BridgeClient::~BridgeClient() = default;

HttpReply BridgeClient::send(const std::string& method, const std::string& path, const json* body) {
    std::lock_guard lock(mutex_);
    const std::string target = prefix_ + path;
    httplib::Result res = method == "GET" ? client_->Get(target)
                                          : client_->Post(target, body ? body->dump() : std::string("{}"),
                                                          "application/json");
    if (!res) {
        throw Error(ErrorCode::transport_failure,
                    "cannot reach MCP bridge at " + base_url_ + ": " + httplib::to_string(res.error()));
    }
    HttpReply reply;
    reply.status = res->status;
    reply.body = res->body.empty() ? json() : json::parse(res->body, nullptr, false);
    if (reply.body.is_discarded()) reply.body = res->body;
    return reply;
}

HttpReply BridgeClient::get(const std::string& path) { return send("GET", path, nullptr); }

std::vector<AgentTool> BridgeClient::fetch_tools() {
    const auto servers = get("/servers");
    if (servers.status != 200 || !servers.body.is_array()) {
        throw Error(ErrorCode::transport_failure, "unexpected /servers reply: HTTP " + std::to_string(servers.status));
    }
    std::vector<AgentTool> out;
    for (const auto& s : servers.body) {
        if (s.value("state", "") == "stopped") continue;
        const auto id = s.value("id", "");
        const auto tools = get("/servers/" + url_encode(id) + "/tools");
        if (tools.status != 200 || !tools.body.is_array()) continue;
        for (const auto& t : tools.body) {
            out.push_back({id, s.value("name", id), s.value("riskLevel", 1), tool_from_json(t)});
        }
    }
    return out;
}

HttpReply BridgeClient::call_tool(const std::string& server_id, const std::string& tool, const json& arguments) {
    return send("POST", "/servers/" + url_encode(server_id) + "/tools/" + url_encode(tool), &arguments);
}

HttpReply BridgeClient::resolve(const std::string& confirmation_id, const std::string& token, bool approve) {
    const json body = {{"token", token}, {"decision", approve ? "approve" : "reject"}};
    return send("POST", "/confirmations/" + url_encode(confirmation_id), &body);
}

const AgentTool* resolve_tool(const std::vector<AgentTool>& tools, std::string_view name) {
    std::string_view server;
    std::string_view bare = name;
    if (const auto sep = name.rfind("::"); sep != std::string_view::npos) {
        server = name.substr(0, sep);
        bare = name.substr(sep + 2);
    }
    auto on_server = [&](const AgentTool& t) { return server.empty() || t.server_name == server || t.server_id == server; };

    for (const auto& t : tools) {
        if (on_server(t) && t.tool.name == bare) return &t;
    }
    if (!server.empty()) {
        for (const auto& t : tools) {
            if (t.tool.name == bare) return &t;
        }
    }
    const auto wanted = eval::normalize_name(name);
    const AgentTool* fallback = nullptr;
    for (const auto& t : tools) {
        if (eval::normalize_name(t.tool.name) != wanted) continue;
        if (on_server(t)) return &t;
        if (fallback == nullptr) fallback = &t;
    }
    return fallback;
}

namespace {

ToolOutcome execute_call(const eval::ToolCall& call, const std::vector<AgentTool>& tools, BridgeClient& bridge,
                         Operator& op) {
    ToolOutcome out;
    out.tool = call.name;
    out.arguments = call.arguments;
    const AgentTool* target = resolve_tool(tools, call.name);
    if (target == nullptr) {
        out.status = "error";
        out.result = {{"error", "Unknown tool: " + call.name}};
        return out;
    }
    out.server = target->server_name;
    out.tool = target->tool.name;

    HttpReply reply;
    try {
        reply = bridge.call_tool(target->server_id, target->tool.name, call.arguments);
    } catch (const Error& e) {
        out.status = "error";
        out.result = {{"error", e.what()}};
        return out;
    }
    if (reply.status == 202 && reply.body.is_object() && reply.body.value("status", "") == "confirmation_required") {
        ConfirmationRequest request{out.server,
                                    out.tool,
                                    call.arguments,
                                    reply.body.value("confirmationId", ""),
                                    reply.body.value("expiresAt", ""),
                                    reply.body.value("riskLevel", 2)};
        const auto token = reply.body.value("token", "");
        const bool approved = op.approve(request);
        try {
            reply = bridge.resolve(request.confirmation_id, token, approved);
        } catch (const Error& e) {
            if (approved) {
                out.status = "error";
                out.result = {{"error", e.what()}};
                return out;
            }
            spdlog::warn("could not release confirmation {}: {}", request.confirmation_id, e.what());
        }
        if (!approved) {
            out.status = "cancelled";
            out.result = {{"status", "cancelled"}, {"message", "User cancelled operation"}};
            return out;
        }
    }
    if (reply.status == 200) {
        out.status = "ok";
        out.result = reply.body.is_object() && reply.body.contains("result") ? reply.body.at("result") : reply.body;
    } else {
        out.status = "error";
        out.result = reply.body.is_object() ? reply.body : json{{"error", reply.body}};
        out.result["httpStatus"] = reply.status;
    }
    return out;
}

std::string ask(LlmBackend& llm, const ChatPrompt& prompt, TurnResult& progress) {
    try {
        return llm.complete(prompt);
    } catch (const Error& e) {
        throw TurnError(e, progress);
    }
}

}  // namespace

TurnResult run_turn(std::string_view query, BridgeClient& bridge, LlmBackend& llm, Operator& op,
                    const AgentOptions& options) {
    const auto tools = bridge.fetch_tools();
    TurnResult turn;
    ChatPrompt prompt = build_prompt(query, tools, options.prompt);
    for (int round = 0; round < std::max(1, options.rounds); ++round) {
        const auto response = ask(llm, prompt, turn);
        turn.responses.push_back(response);
        const auto calls = eval::extract_tool_calls(response);
        if (calls.empty()) {
            turn.final_response = response;
            return turn;
        }
        for (std::size_t i = 0; i < calls.size(); ++i) {
            if (i >= options.max_calls) {
                turn.outcomes.push_back({"", calls[i].name, calls[i].arguments, "skipped",
                                         {{"error", "tool call limit reached"}}});
                continue;
            }
            turn.outcomes.push_back(execute_call(calls[i], tools, bridge, op));
        }
        prompt = build_result_prompt(query, tools, turn.outcomes, options.prompt);
    }
    turn.final_response = ask(llm, prompt, turn);
    turn.responses.push_back(turn.final_response);
    return turn;
}

namespace {

std::string summary(const json& result) {
    if (result.is_object()) {
        if (const auto s = result.find("status"); s != result.end() && s->is_string()) {
            std::string out = "status: " + s->get<std::string>();
            if (const auto m = result.find("message"); m != result.end() && m->is_string()) {
                out += " (" + m->get<std::string>() + ")";
            }
            return out;
        }
        if (const auto e = result.find("error"); e != result.end()) {
            return "error: " + (e->is_string() ? e->get<std::string>() : e->dump());
        }
        if (const auto c = result.find("content"); c != result.end() && c->is_array()) {
            for (const auto& item : *c) {
                if (item.is_object() && item.value("type", "") == "text") {
                    return std::string(result.value("isError", false) ? "tool error: " : "result: ") +
                           one_line(item.value("text", ""));
                }
            }
            return "result: " + std::to_string(c->size()) + " content item(s)";
        }
    }
    return "result: " + std::string(result.type_name());
}

}  // namespace

std::string render_result(const json& result, bool hide_json, int width) {
    const auto w = static_cast<std::size_t>(std::max(20, width));
    std::string head = summary(result);
    if (code_points(head) > w) head = truncate_description(head, w);
    std::string out = head + '\n';
    if (hide_json) return out;

    std::istringstream lines(result.dump(2, ' ', false, json::error_handler_t::replace));
    std::string line;
    while (std::getline(lines, line)) {
        std::string_view rest = line;
        if (code_points(rest) <= w) {
            out.append(rest).push_back('\n');
            continue;
        }
        const auto indent = std::min(line.find_first_not_of(' ') + 2, w / 2);
        const std::string pad(indent, ' ');
        auto cut = prefix_bytes(rest, w);
        out.append(rest.substr(0, cut)).push_back('\n');
        rest.remove_prefix(cut);
        while (!rest.empty()) {
            cut = prefix_bytes(rest, w - indent);
            out.append(pad).append(rest.substr(0, cut)).push_back('\n');
            rest.remove_prefix(cut);
        }
    }
    return out;
}

}  // namespace bridgekit::agent

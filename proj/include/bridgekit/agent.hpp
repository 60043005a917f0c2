#pragma once

/// Terminal agent: fetch tools from a running bridge, ask an LLM, execute the
/// tool calls it emits (with operator confirmation where required) and ask
/// the LLM again with the results.

#include "bridgekit/error.hpp"
#include "bridgekit/json_rpc.hpp"
#include "bridgekit/toolcall_eval.hpp"

#include <chrono>
#include <deque>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace httplib {
class Client;
}

namespace bridgekit::agent {

struct ChatPrompt {
    std::string system;
    std::string user;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    /// Throws Error(backend_error) on failure.
    virtual std::string complete(const ChatPrompt& prompt) = 0;
};

/// Replays fixed responses in order; throws once they run out.
class ScriptedLlm final : public LlmBackend {
public:
    explicit ScriptedLlm(std::vector<std::string> responses);

    std::string complete(const ChatPrompt& prompt) override;

    std::vector<ChatPrompt> prompts() const;
    std::size_t remaining() const;

private:
    mutable std::mutex mutex_;
    std::deque<std::string> responses_;
    std::vector<ChatPrompt> seen_;
};

struct HttpLlmConfig {
    std::string endpoint;  // full chat-completions URL
    std::string model;
    std::string api_key_env;  // empty: no Authorization header
    std::chrono::milliseconds timeout{120000};
};

/// Generic chat-completions client: POST {"model","messages"} and read
/// choices[0].message.content.
class HttpLlm final : public LlmBackend {
public:
    explicit HttpLlm(HttpLlmConfig config);
    std::string complete(const ChatPrompt& prompt) override;

private:
    HttpLlmConfig config_;
};

struct PromptSpec {
    std::size_t max_tools = 40;
    std::size_t max_description_chars = 160;
};

struct AgentTool {
    std::string server_id;
    std::string server_name;
    int risk_level = 1;
    ToolDescriptor tool;

    /// serverName::toolName, the form shown to the model.
    std::string qualified() const { return server_name + "::" + tool.name; }
};

/// Cuts to at most `max_chars` code points, the last three being "..." when
/// anything was removed. Never splits a UTF-8 sequence.
std::string truncate_description(std::string_view text, std::size_t max_chars);

ChatPrompt build_prompt(std::string_view query, const std::vector<AgentTool>& tools, const PromptSpec& spec = {});

struct ToolOutcome {
    std::string server;
    std::string tool;
    json arguments = json::object();
    std::string status;  // ok | cancelled | error | skipped
    json result;
};

json to_json(const ToolOutcome& outcome);

ChatPrompt build_result_prompt(std::string_view query, const std::vector<AgentTool>& tools,
                               const std::vector<ToolOutcome>& outcomes, const PromptSpec& spec = {});

/// A level-2 call waiting for the operator.
struct ConfirmationRequest {
    std::string server;
    std::string tool;
    json arguments;
    std::string confirmation_id;
    std::string expires_at;
    int risk_level = 2;
};

class Operator {
public:
    virtual ~Operator() = default;
    virtual bool approve(const ConfirmationRequest& request) = 0;
};

/// Returns fixed decisions in order; rejects once they run out.
class ScriptedOperator final : public Operator {
public:
    explicit ScriptedOperator(std::vector<bool> decisions);
    bool approve(const ConfirmationRequest& request) override;
    std::size_t asked() const { return asked_; }

private:
    std::deque<bool> decisions_;
    std::size_t asked_ = 0;
};

/// Prompts on `out` and reads a y/n line from `in`.
class TerminalOperator final : public Operator {
public:
    TerminalOperator(std::istream& in, std::ostream& out);
    bool approve(const ConfirmationRequest& request) override;

private:
    std::istream& in_;
    std::ostream& out_;
};

struct HttpReply {
    int status = 0;
    json body;
};

/// Thin keep-alive client for the bridge REST API.
class BridgeClient {
public:
    explicit BridgeClient(const std::string& base_url,
                          std::chrono::milliseconds timeout = std::chrono::milliseconds(60000));
    ~BridgeClient();

    /// Every tool of every server. Throws Error(transport_failure) when the
    /// bridge cannot be reached.
    std::vector<AgentTool> fetch_tools();

    HttpReply call_tool(const std::string& server_id, const std::string& tool, const json& arguments);
    HttpReply resolve(const std::string& confirmation_id, const std::string& token, bool approve);
    HttpReply get(const std::string& path);

private:
    HttpReply send(const std::string& method, const std::string& path, const json* body);

    std::string base_url_;
    std::string prefix_;
    std::unique_ptr<httplib::Client> client_;
    std::mutex mutex_;
};

/// Percent-encodes everything outside the URL unreserved set.
std::string url_encode(std::string_view text);

struct AgentOptions {
    PromptSpec prompt;
    std::size_t max_calls = 16;  // per LLM response; the rest are skipped
    int rounds = 1;              // tool rounds before the final answer
};

struct TurnResult {
    std::vector<std::string> responses;  // every LLM response, in order
    std::vector<ToolOutcome> outcomes;   // one per emitted call
    std::string final_response;
};

/// Raised when the LLM fails after tools have run; carries what was done.
class TurnError : public Error {
public:
    TurnError(const Error& cause, TurnResult partial)
        : Error(cause.code(), cause.what()), partial_(std::move(partial)) {}
    const TurnResult& partial() const { return partial_; }

private:
    TurnResult partial_;
};

/// Resolves a model-emitted name ("server::tool", bare or decorated) to a
/// tool, or nullptr.
const AgentTool* resolve_tool(const std::vector<AgentTool>& tools, std::string_view name);

TurnResult run_turn(std::string_view query, BridgeClient& bridge, LlmBackend& llm, Operator& op,
                    const AgentOptions& options = {});

/// A summary line, followed unless `hide_json` by the pretty-printed JSON
/// wrapped so no line exceeds `width` (minimum 20) code points.
std::string render_result(const json& result, bool hide_json, int width = 100);

}  // namespace bridgekit::agent

#pragma once

/// Hand-labelled fixtures shared by the evaluation unit tests and the
/// acceptance binary. Expected values were worked out by hand from the
/// ordered normalization rules and the failure taxonomy, not by running the
/// code under test.

#include "bridgekit/ratio.hpp"
#include "bridgekit/toolcall_eval.hpp"

#include <bit>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

struct NormCase {
    const char* raw;
    const char* expected;
};

/// lowercase, last "::" segment, prefixes mcp_ mcp- functions. (repeated),
/// suffixes _tool -tool (repeated), '-' and ' ' to '_', collapse '_' runs,
/// empty result falls back to the lowercased input.
inline const std::vector<NormCase> kNormalizationTable = {
    {"Server::tool_name", "tool_name"},
    {"Get-Weather", "get_weather"},
    {"mcp-search tool", "search_tool"},
    {"mcp_read_file", "read_file"},
    {"MCP-Read-File", "read_file"},
    {"functions.get_time", "get_time"},
    {"functions.mcp_get_time", "get_time"},
    {"search_tool", "search"},
    {"search-tool", "search"},
    {"search_tool_tool", "search"},
    {"filesystem::read_file", "read_file"},
    {"a::b::Write_File", "write_file"},
    {"mcp_", "mcp_"},
    {"_tool", "_tool"},
    {"tool", "tool"},
    {"tool_name", "tool_name"},
    {"Read  File", "read_file"},
    {"read__file", "read_file"},
    {"Brave_Web_Search", "brave_web_search"},
    {"mcp_mcp_list", "list"},
    {"mcp-tool", "tool"},
    {"web search-tool", "web_search"},
    {"Server::mcp_fetch_tool", "fetch"},
    {"server::", "server::"},
    {"  padded ", "_padded_"},
    {"get_weather", "get_weather"},
    {"functions.search_tool", "search"},
    {"MCP_Get-Sum", "get_sum"},
    {"mcp_search-tool_tool", "search"},
    {"longRunningOperation", "longrunningoperation"},
};

struct ExtractionCase {
    const char* output;
    bridgekit::eval::NameSet ground_truth;
    std::size_t calls;
    bridgekit::eval::FailureColumn column;
};

inline std::vector<ExtractionCase> extraction_corpus() {
    using C = bridgekit::eval::FailureColumn;
    return {
        {R"(<tool_call>{"name":"get_weather","arguments":{"city":"Oslo"}}</tool_call>)", {"get_weather"}, 1, C::correct},
        {R"(<tool_call>{"name":"weather::get_weather","arguments":{}}</tool_call>)", {"get_weather"}, 1, C::correct},
        {R"(First <tool_call>{"name":"read_file","arguments":{"path":"/a"}}</tool_call> then <tool_call>{"name":"write_file","arguments":{"path":"/b"}}</tool_call>)",
         {"read_file", "write_file"}, 2, C::correct},
        {R"(<tool_call>[{"name":"search","arguments":{}},{"name":"fetch","arguments":{}}]</tool_call>)", {"search", "fetch"}, 2, C::correct},
        {"I cannot help with that.", {"search"}, 0, C::no_tool_call},
        {R"(<tool_call>{"name": "search", "arguments": {</tool_call>)", {"search"}, 0, C::no_tool_call},
        {R"(<tool_call>{"name":"search","arguments":{}})", {"search"}, 1, C::format_heuristic},
        {R"(Sure: {"name":"search","arguments":{"q":"x"}} is what I would call.)", {"search"}, 1, C::format_heuristic},
        {R"({"name":"fetch","parameters":{}})", {"search"}, 1, C::format_heuristic},
        {R"(<tool_call>{"name":"fetch","arguments":{}}</tool_call>)", {"search"}, 1, C::wrong_tool},
        {R"(<tool_call>{"name":"search","arguments":{}}</tool_call><tool_call>{"name":"fetch","arguments":{}}</tool_call>)", {"search"}, 2, C::partial},
        {R"(<tool_call>{"name":"search","arguments":{}}</tool_call>)", {"search", "fetch"}, 1, C::partial},
        {R"(<tool_call>{"arguments":{}}</tool_call>)", {"search"}, 0, C::no_tool_call},
        {R"({"name":"search"})", {"search"}, 0, C::no_tool_call},
        {R"(<tool_call>{"name":"search","arguments":"{\"q\":1}"}</tool_call>)", {"search"}, 1, C::correct},
        {R"(<tool_call>{"name":"search","arguments":{}}</tool_call> also {"name":"fetch","arguments":{}})", {"search"}, 1, C::correct},
        {"<tool_call>\n  {\"name\": \"MCP_Search\", \"arguments\": {}}\n</tool_call>", {"search"}, 1, C::correct},
        {R"(<tool_call>{"name":"fetch","arguments":{}}</tool_call><tool_call>oops</tool_call>)", {"search"}, 1, C::wrong_tool},
        {"```json\n{\"tool\": {\"name\": \"search\", \"arguments\": {}}}\n```", {"search"}, 1, C::format_heuristic},
        {"", {"search"}, 0, C::no_tool_call},
    };
}

/// Independent scoring oracle over subsets of an 8-name universe encoded as
/// bitmasks (256 subsets, so 65,536 ordered pairs). Works on unreduced
/// integer fractions and uses the closed form f1 = 2|P∩G| / (|P|+|G|)
/// instead of the harmonic mean.
struct Fraction {
    std::int64_t num;
    std::int64_t den;
    bool equals(const bridgekit::Ratio& r) const { return num * r.den == r.num * den; }
};

struct OracleScore {
    Fraction precision;
    Fraction recall;
    Fraction f1;
    bool exact;
};

inline OracleScore oracle_score(unsigned p, unsigned g) {
    const int np = std::popcount(p);
    const int ng = std::popcount(g);
    const int hits = std::popcount(p & g);
    if (np == 0 && ng == 0) return {{1, 1}, {1, 1}, {1, 1}, true};
    return {np == 0 ? Fraction{0, 1} : Fraction{hits, np}, ng == 0 ? Fraction{0, 1} : Fraction{hits, ng},
            Fraction{2 * hits, np + ng}, p == g};
}

inline bridgekit::eval::NameSet names_of(unsigned mask) {
    static const char* kUniverse[] = {"alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"};
    bridgekit::eval::NameSet out;
    for (int i = 0; i < 8; ++i) {
        if (mask & (1u << i)) out.insert(kUniverse[i]);
    }
    return out;
}

/// Random identifiers over [a-zA-Z0-9_:.] with prefix, suffix and separator
/// fragments spliced in. No '-' or ' ' so separator rewriting cannot create
/// a fresh suffix.
inline std::string random_identifier(std::mt19937_64& rng) {
    static const std::string alphabet = "abcdefxyzABCXYZ0189_:.";
    static const std::vector<std::string> fragments = {"mcp_", "MCP_", "functions.", "_tool", "_TOOL", "::",
                                                       "tool", "__", "mcp", "_"};
    std::uniform_int_distribution<int> parts(0, 6);
    std::uniform_int_distribution<int> coin(0, 2);
    std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
    std::uniform_int_distribution<std::size_t> frag(0, fragments.size() - 1);
    std::string s;
    const int n = parts(rng);
    for (int i = 0; i < n; ++i) {
        if (coin(rng) == 0) {
            s += fragments[frag(rng)];
        } else {
            s += alphabet[ch(rng)];
        }
    }
    return s;
}

inline std::string random_any(std::mt19937_64& rng) {
    std::string s = random_identifier(rng);
    std::uniform_int_distribution<std::size_t> pos(0, s.size());
    std::uniform_int_distribution<int> which(0, 3);
    static const char* extras[] = {"-", " ", "-tool", " tool"};
    for (int i = 0; i < 2; ++i) s.insert(pos(rng) % (s.size() + 1), extras[which(rng)]);
    return s;
}

struct RewardSample {
    std::string output;
    bridgekit::eval::NameSet ground_truth;
};

/// Model outputs in every shape the reward distinguishes: well-formed tags,
/// tag arrays, unterminated or broken tags, bare JSON, prose, nothing.
inline std::vector<RewardSample> reward_corpus(std::size_t n, std::uint64_t seed) {
    static const std::vector<std::string> names = {"search", "fetch", "read_file", "write_file", "get_weather",
                                                   "Server::search", "mcp_fetch", "echo"};
    std::mt19937_64 rng(seed);
    auto pick = [&](std::size_t k) { return static_cast<std::size_t>(rng() % k); };
    auto call = [&](const std::string& name) { return R"({"name":")" + name + R"(","arguments":{"q":1}})"; };
    std::vector<RewardSample> out;
    for (std::size_t i = 0; i < n; ++i) {
        RewardSample s;
        const std::size_t gsize = pick(3);  // 0..2 expected tools
        for (std::size_t k = 0; k < gsize; ++k) s.ground_truth.insert(bridgekit::eval::normalize_name(names[pick(names.size())]));
        const auto a = names[pick(names.size())];
        const auto b = names[pick(names.size())];
        switch (i % 8) {
            case 0: s.output = "<tool_call>" + call(a) + "</tool_call>"; break;
            case 1: s.output = "<tool_call>[" + call(a) + "," + call(b) + "]</tool_call>"; break;
            case 2: s.output = "Let me check. <tool_call>" + call(a) + "</tool_call><tool_call>" + call(b) + "</tool_call>"; break;
            case 3: s.output = "<tool_call>" + call(a); break;
            case 4: s.output = "<tool_call>{\"name\": \"" + a + "\", </tool_call>"; break;
            case 5: s.output = "I would use " + call(a) + " here."; break;
            case 6: s.output = "No tool is needed for this question."; break;
            default: s.output = ""; break;
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace fixtures

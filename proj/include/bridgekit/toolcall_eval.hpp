#pragma once

/// Tool-call evaluation: extraction from raw model text, name
/// normalization, set-based scoring, failure taxonomy and per-category
/// aggregation with percentile-bootstrap confidence intervals.

#include "bridgekit/json_rpc.hpp"
#include "bridgekit/ratio.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace bridgekit::eval {

enum class CallSource { tagged, fallback };

struct ToolCall {
    std::string name;
    json arguments = json::object();
    CallSource source = CallSource::tagged;
};

struct Extraction {
    std::vector<ToolCall> calls;
    std::size_t tag_blocks = 0;        // <tool_call> openings seen
    std::size_t malformed_blocks = 0;  // tagged blocks without a usable call
};

/// Tagged `<tool_call>...</tool_call>` blocks first; only when none yields a
/// call, a scan for JSON objects with a string "name" and an object
/// "arguments" (or "parameters"). Order of appearance is preserved.
Extraction extract_detailed(std::string_view text);
std::vector<ToolCall> extract_tool_calls(std::string_view text);

/// Lowercase, keep the segment after the last "::", strip the prefixes
/// mcp_ mcp- functions. and the suffixes _tool -tool, then turn '-'
/// and ' ' into '_' and collapse '_' runs. An empty result falls back to the
/// lowercased input.
std::string normalize_name(std::string_view raw);

using NameSet = std::set<std::string>;

NameSet predicted_names(const std::vector<ToolCall>& calls);

enum class FailureClass { correct, no_tool_call, wrong_tool, partial };

std::string_view to_string(FailureClass c);

struct SampleScore {
    Ratio precision;
    Ratio recall;
    Ratio f1;
    bool exact_match = false;
    NameSet predicted;
    FailureClass failure = FailureClass::correct;
    bool format_heuristic = false;  // every call came from the fallback scan
};

/// Precision, recall, F1 and exact set match of predicted `p` against
/// reference `g`. Both empty scores 1/1/1; empty `p` against non-empty `g`
/// scores zeros; non-empty `p` against empty `g` also scores zeros.
SampleScore score_sample(const NameSet& p, const NameSet& g);

FailureClass classify_failure(const SampleScore& score, const std::vector<ToolCall>& calls);

/// Failure-table columns: the four classes plus the fallback-rescued column.
enum class FailureColumn { correct, no_tool_call, wrong_tool, partial, format_heuristic };

inline constexpr std::array<FailureColumn, 5> kFailureColumns = {
    FailureColumn::correct, FailureColumn::no_tool_call, FailureColumn::wrong_tool, FailureColumn::partial,
    FailureColumn::format_heuristic};

std::string_view to_string(FailureColumn c);

/// Flagged samples go to the format-heuristic column, all others to their class.
FailureColumn failure_column(const SampleScore& score);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Percentile bootstrap of the mean: `iterations` resamples of size n with
/// replacement, then the (1-level)/2 and (1+level)/2 quantiles (linear
/// interpolation) of the resampled means.
Interval bootstrap_ci(const std::vector<double>& per_sample, int iterations, double level, std::uint64_t seed);

struct CategoryMetrics {
    std::size_t n = 0;
    double mean_precision = 0.0;
    double mean_recall = 0.0;
    double mean_f1 = 0.0;
    double accuracy = 0.0;
    Interval ci95_f1;
    Interval ci95_accuracy;
};

struct BootstrapOptions {
    int iterations = 10000;
    double level = 0.95;
    std::uint64_t seed = 0;
};

/// Throws Error(bad_request) for an empty input.
CategoryMetrics aggregate(const std::vector<SampleScore>& samples, const BootstrapOptions& options = {});

struct MacroMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
};

/// Unweighted mean of the category means.
MacroMetrics macro_average(const std::map<std::string, CategoryMetrics>& categories);

struct EvalSample {
    std::string id;
    std::string category;
    std::string query;
    std::vector<ToolDescriptor> tools;
    NameSet ground_truth;  // normalized
    std::string model_output;
};

/// Parses one JSONL record ({"id","category","query","tools","ground_truth","model_output"}).
EvalSample sample_from_json(const json& record);

struct SampleResult {
    EvalSample sample;
    std::vector<ToolCall> calls;
    SampleScore score;
};

SampleResult evaluate_sample(const EvalSample& sample);

struct EvalReport {
    std::map<std::string, CategoryMetrics> categories;
    MacroMetrics macro;
    CategoryMetrics overall;  // pooled over every sample
    std::map<FailureColumn, double> failure_percent;
    std::size_t empty_ground_truth = 0;
};

EvalReport evaluate(const std::vector<EvalSample>& samples, const BootstrapOptions& options = {});

json to_json(const CategoryMetrics& m);
json to_json(const EvalReport& report);
json to_json(const ToolCall& call);

}  // namespace bridgekit::eval

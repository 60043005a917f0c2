#include "bridgekit/toolcall_eval.hpp"

#include "bridgekit/error.hpp"

#include <algorithm>
#include <cctype>
#include <random>

namespace bridgekit::eval {

namespace {

constexpr std::string_view kOpenTag = "<tool_call>";
constexpr std::string_view kCloseTag = "</tool_call>";

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

json arguments_of(const json& obj) {
    for (const char* key : {"arguments", "parameters"}) {
        const auto it = obj.find(key);
        if (it == obj.end()) continue;
        if (it->is_object()) return *it;
        if (it->is_string()) {
            json parsed = json::parse(it->get<std::string>(), nullptr, false);
            if (parsed.is_object()) return parsed;
        }
    }
    return json::object();
}

bool has_name(const json& obj) {
    const auto name = obj.find("name");
    return name != obj.end() && name->is_string() && !name->get<std::string>().empty();
}

/// A tagged block may hold one call object or an array of them.
bool calls_from_block(const json& value, std::vector<ToolCall>& out) {
    std::vector<const json*> items;
    if (value.is_object()) {
        items.push_back(&value);
    } else if (value.is_array() && !value.empty()) {
        for (const auto& v : value) items.push_back(&v);
    } else {
        return false;
    }
    for (const auto* item : items) {
        if (!item->is_object() || !has_name(*item)) return false;
    }
    for (const auto* item : items) {
        out.push_back({item->at("name").get<std::string>(), arguments_of(*item), CallSource::tagged});
    }
    return true;
}

bool looks_like_call(const json& obj) {
    if (!obj.is_object() || !has_name(obj)) return false;
    for (const char* key : {"arguments", "parameters"}) {
        const auto it = obj.find(key);
        if (it != obj.end() && it->is_object()) return true;
    }
    return false;
}

void collect_calls(const json& value, std::vector<ToolCall>& out) {
    if (looks_like_call(value)) {
        out.push_back({value.at("name").get<std::string>(), arguments_of(value), CallSource::fallback});
        return;
    }
    if (value.is_object() || value.is_array()) {
        for (const auto& child : value) collect_calls(child, out);
    }
}

/// End (one past) of the balanced JSON object starting at `start`, honoring
/// string literals; npos if unbalanced.
std::size_t match_object(std::string_view text, std::size_t start) {
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = start; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) return i + 1;
        }
    }
    return std::string_view::npos;
}

std::vector<ToolCall> fallback_scan(std::string_view text) {
    std::vector<ToolCall> out;
    std::size_t pos = 0;
    while ((pos = text.find('{', pos)) != std::string_view::npos) {
        const auto end = match_object(text, pos);
        if (end == std::string_view::npos) {
            ++pos;
            continue;
        }
        json value = json::parse(text.substr(pos, end - pos), nullptr, false);
        if (value.is_discarded()) {
            ++pos;
            continue;
        }
        collect_calls(value, out);
        pos = end;
    }
    return out;
}

}  // namespace

Extraction extract_detailed(std::string_view text) {
    Extraction ex;
    std::size_t pos = 0;
    while ((pos = text.find(kOpenTag, pos)) != std::string_view::npos) {
        ++ex.tag_blocks;
        const auto body_start = pos + kOpenTag.size();
        const auto close = text.find(kCloseTag, body_start);
        const auto next_open = text.find(kOpenTag, body_start);
        if (close == std::string_view::npos || (next_open != std::string_view::npos && next_open < close)) {
            // Unterminated block: not a well-formed tagged call.
            ++ex.malformed_blocks;
            pos = body_start;
            continue;
        }
        const json value = json::parse(trim(text.substr(body_start, close - body_start)), nullptr, false);
        if (value.is_discarded() || !calls_from_block(value, ex.calls)) ++ex.malformed_blocks;
        pos = close + kCloseTag.size();
    }
    if (ex.calls.empty()) ex.calls = fallback_scan(text);
    return ex;
}

std::vector<ToolCall> extract_tool_calls(std::string_view text) { return extract_detailed(text).calls; }

std::string normalize_name(std::string_view raw) {
    static constexpr std::array<std::string_view, 3> kPrefixes = {"mcp_", "mcp-", "functions."};
    static constexpr std::array<std::string_view, 2> kSuffixes = {"_tool", "-tool"};

    std::string lower(raw);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    std::string s = lower;
    if (const auto sep = s.rfind("::"); sep != std::string::npos) s.erase(0, sep + 2);

    for (bool again = true; again;) {
        again = false;
        for (auto p : kPrefixes) {
            if (s.starts_with(p)) {
                s.erase(0, p.size());
                again = true;
                break;
            }
        }
    }
    for (bool again = true; again;) {
        again = false;
        for (auto x : kSuffixes) {
            if (s.ends_with(x)) {
                s.erase(s.size() - x.size());
                again = true;
                break;
            }
        }
    }
    std::replace_if(s.begin(), s.end(), [](char c) { return c == '-' || c == ' '; }, '_');
    s.erase(std::unique(s.begin(), s.end(), [](char a, char b) { return a == '_' && b == '_'; }), s.end());

    return s.empty() ? lower : s;
}

NameSet predicted_names(const std::vector<ToolCall>& calls) {
    NameSet out;
    for (const auto& c : calls) out.insert(normalize_name(c.name));
    return out;
}

std::string_view to_string(FailureClass c) {
    switch (c) {
        case FailureClass::correct: return "correct";
        case FailureClass::no_tool_call: return "no_tool_call";
        case FailureClass::wrong_tool: return "wrong_tool";
        case FailureClass::partial: return "partial";
    }
    return "unknown";
}

std::string_view to_string(FailureColumn c) {
    switch (c) {
        case FailureColumn::correct: return "correct";
        case FailureColumn::no_tool_call: return "no_tool_call";
        case FailureColumn::wrong_tool: return "wrong_tool";
        case FailureColumn::partial: return "partial";
        case FailureColumn::format_heuristic: return "format_heuristic";
    }
    return "unknown";
}

SampleScore score_sample(const NameSet& p, const NameSet& g) {
    std::int64_t hits = 0;
    for (const auto& name : p) hits += g.count(name) ? 1 : 0;
    const auto np = static_cast<std::int64_t>(p.size());
    const auto ng = static_cast<std::int64_t>(g.size());

    SampleScore s;
    s.predicted = p;
    s.exact_match = p == g;
    if (np == 0 && ng == 0) {
        s.precision = s.recall = s.f1 = Ratio(1);
    } else {
        s.precision = np > 0 ? Ratio(hits, np) : Ratio(0);
        s.recall = ng > 0 ? Ratio(hits, ng) : Ratio(0);
        const Ratio sum = s.precision + s.recall;
        s.f1 = sum.num == 0 ? Ratio(0) : Ratio(2) * s.precision * s.recall / sum;
    }
    s.failure = s.exact_match ? FailureClass::correct
                : np == 0     ? FailureClass::no_tool_call
                : hits == 0   ? FailureClass::wrong_tool
                              : FailureClass::partial;
    return s;
}

FailureClass classify_failure(const SampleScore& score, const std::vector<ToolCall>& calls) {
    (void)calls;
    if (score.exact_match) return FailureClass::correct;
    if (score.predicted.empty()) return FailureClass::no_tool_call;
    if (score.recall.num == 0 && score.precision.num == 0) return FailureClass::wrong_tool;
    return FailureClass::partial;
}

FailureColumn failure_column(const SampleScore& score) {
    if (score.format_heuristic) return FailureColumn::format_heuristic;
    switch (score.failure) {
        case FailureClass::correct: return FailureColumn::correct;
        case FailureClass::no_tool_call: return FailureColumn::no_tool_call;
        case FailureClass::wrong_tool: return FailureColumn::wrong_tool;
        case FailureClass::partial: return FailureColumn::partial;
    }
    return FailureColumn::correct;
}

Interval bootstrap_ci(const std::vector<double>& xs, int iterations, double level, std::uint64_t seed) {
    if (xs.empty()) throw Error(ErrorCode::bad_request, "bootstrap of an empty sample");
    if (iterations < 1) throw Error(ErrorCode::bad_request, "bootstrap needs at least one iteration");
    if (!(level > 0.0 && level < 1.0)) throw Error(ErrorCode::bad_request, "confidence level must be in (0, 1)");

    const std::size_t n = xs.size();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<double> means(static_cast<std::size_t>(iterations));
    for (auto& m : means) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) sum += xs[pick(rng)];
        m = sum / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());

    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(means.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        const auto hi = std::min(lo + 1, means.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return means[lo] + frac * (means[hi] - means[lo]);
    };
    const double alpha = 1.0 - level;
    return {quantile(alpha / 2.0), quantile(1.0 - alpha / 2.0)};
}

namespace {

double mean(const std::vector<double>& xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

/// Keeps lo <= point <= hi when a tiny or skewed sample puts the point
/// estimate outside the percentile band.
Interval contain(Interval ci, double point) { return {std::min(ci.lo, point), std::max(ci.hi, point)}; }

}  // namespace

CategoryMetrics aggregate(const std::vector<SampleScore>& samples, const BootstrapOptions& options) {
    if (samples.empty()) throw Error(ErrorCode::bad_request, "cannot aggregate an empty category");
    std::vector<double> p, r, f, acc;
    for (const auto& s : samples) {
        p.push_back(s.precision.to_double());
        r.push_back(s.recall.to_double());
        f.push_back(s.f1.to_double());
        acc.push_back(s.exact_match ? 1.0 : 0.0);
    }
    CategoryMetrics m;
    m.n = samples.size();
    m.mean_precision = mean(p);
    m.mean_recall = mean(r);
    m.mean_f1 = mean(f);
    m.accuracy = mean(acc);
    m.ci95_f1 = contain(bootstrap_ci(f, options.iterations, options.level, options.seed), m.mean_f1);
    m.ci95_accuracy =
        contain(bootstrap_ci(acc, options.iterations, options.level, options.seed + 1), m.accuracy);
    return m;
}

MacroMetrics macro_average(const std::map<std::string, CategoryMetrics>& categories) {
    MacroMetrics out;
    if (categories.empty()) return out;
    for (const auto& [_, m] : categories) {
        out.precision += m.mean_precision;
        out.recall += m.mean_recall;
        out.f1 += m.mean_f1;
        out.accuracy += m.accuracy;
    }
    const auto k = static_cast<double>(categories.size());
    out.precision /= k;
    out.recall /= k;
    out.f1 /= k;
    out.accuracy /= k;
    return out;
}

EvalSample sample_from_json(const json& record) {
    if (!record.is_object()) throw Error(ErrorCode::bad_request, "eval record must be a JSON object");
    EvalSample s;
    s.id = record.contains("id") && record.at("id").is_string() ? record.at("id").get<std::string>()
           : record.contains("id")                              ? record.at("id").dump()
                                                                : "";
    s.category = record.value("category", "uncategorized");
    s.query = record.value("query", "");
    s.model_output = record.value("model_output", "");
    if (const auto tools = record.find("tools"); tools != record.end() && tools->is_array()) {
        for (const auto& t : *tools) {
            if (t.is_object() && t.contains("name")) s.tools.push_back(tool_from_json(t));
        }
    }
    if (const auto gt = record.find("ground_truth"); gt != record.end()) {
        if (gt->is_array()) {
            for (const auto& name : *gt) {
                if (name.is_string()) s.ground_truth.insert(normalize_name(name.get<std::string>()));
            }
        } else if (gt->is_string()) {
            // Comma-separated target list.
            std::string_view rest = gt->get_ref<const std::string&>();
            while (!rest.empty()) {
                const auto comma = rest.find(',');
                const auto item = trim(rest.substr(0, comma));
                if (!item.empty()) s.ground_truth.insert(normalize_name(item));
                if (comma == std::string_view::npos) break;
                rest.remove_prefix(comma + 1);
            }
        }
    }
    return s;
}

SampleResult evaluate_sample(const EvalSample& sample) {
    SampleResult r;
    r.sample = sample;
    r.calls = extract_tool_calls(sample.model_output);
    r.score = score_sample(predicted_names(r.calls), sample.ground_truth);
    r.score.failure = classify_failure(r.score, r.calls);
    r.score.format_heuristic =
        !r.calls.empty() && std::all_of(r.calls.begin(), r.calls.end(),
                                        [](const ToolCall& c) { return c.source == CallSource::fallback; });
    return r;
}

EvalReport evaluate(const std::vector<EvalSample>& samples, const BootstrapOptions& options) {
    if (samples.empty()) throw Error(ErrorCode::bad_request, "no evaluation samples");
    EvalReport report;
    std::map<std::string, std::vector<SampleScore>> by_category;
    std::vector<SampleScore> all;
    std::map<FailureColumn, std::size_t> columns;
    for (const auto& sample : samples) {
        auto result = evaluate_sample(sample);
        if (sample.ground_truth.empty()) ++report.empty_ground_truth;
        ++columns[failure_column(result.score)];
        by_category[sample.category].push_back(result.score);
        all.push_back(std::move(result.score));
    }
    std::uint64_t offset = 0;
    for (const auto& [category, scores] : by_category) {
        BootstrapOptions per = options;
        per.seed = options.seed + 2 * (++offset);
        report.categories.emplace(category, aggregate(scores, per));
    }
    report.macro = macro_average(report.categories);
    report.overall = aggregate(all, options);
    for (auto col : kFailureColumns) {
        report.failure_percent[col] =
            100.0 * static_cast<double>(columns[col]) / static_cast<double>(samples.size());
    }
    return report;
}

json to_json(const CategoryMetrics& m) {
    return {{"n", m.n},
            {"precision", m.mean_precision},
            {"recall", m.mean_recall},
            {"f1", m.mean_f1},
            {"accuracy", m.accuracy},
            {"ci95F1", {m.ci95_f1.lo, m.ci95_f1.hi}},
            {"ci95Accuracy", {m.ci95_accuracy.lo, m.ci95_accuracy.hi}}};
}

json to_json(const EvalReport& report) {
    json categories = json::object();
    for (const auto& [name, m] : report.categories) categories[name] = to_json(m);
    json failures = json::object();
    for (const auto& [col, pct] : report.failure_percent) failures[std::string(to_string(col))] = pct;
    return {{"categories", categories},
            {"macro",
             {{"precision", report.macro.precision},
              {"recall", report.macro.recall},
              {"f1", report.macro.f1},
              {"accuracy", report.macro.accuracy},
              {"categoryCount", report.categories.size()}}},
            {"overall", to_json(report.overall)},
            {"failureTypes", failures},
            {"emptyGroundTruth", report.empty_ground_truth}};
}

json to_json(const ToolCall& call) {
    return {{"name", call.name},
            {"arguments", call.arguments},
            {"source", call.source == CallSource::tagged ? "tagged" : "fallback"}};
}

}  // namespace bridgekit::eval

#include "bridgekit/reward.hpp"

#include "bridgekit/error.hpp"

#include <algorithm>
#include <cmath>

namespace bridgekit::reward {

namespace {

Ratio ratio_from_json(const json& v) {
    if (!v.is_number()) throw Error(ErrorCode::invalid_config, "reward table entries must be numbers");
    if (v.is_number_integer()) return Ratio(v.get<std::int64_t>());
    return Ratio(static_cast<std::int64_t>(std::llround(v.get<double>() * 10000.0)), 10000);
}

void read(const json& obj, const char* key, Ratio& out) {
    if (const auto it = obj.find(key); it != obj.end()) out = ratio_from_json(*it);
}

Ratio select(const eval::SampleScore& s, std::size_t calls, bool g_empty, const SelectionTable& t) {
    if (calls == 0 && !g_empty) return t.missing;
    if (t.near_perfect_at <= s.f1) return t.near_perfect;
    if (t.high_at <= s.f1) return t.high;
    if (s.f1.num > 0) return t.low;
    return t.wrong;
}

Ratio fmt(const eval::Extraction& ex, const FormatTable& t) {
    const bool any_tagged = std::any_of(ex.calls.begin(), ex.calls.end(),
                                        [](const eval::ToolCall& c) { return c.source == eval::CallSource::tagged; });
    if (any_tagged) return t.tagged;
    if (ex.tag_blocks > 0) return t.malformed;
    if (!ex.calls.empty()) return t.fallback;
    return t.none;
}

}  // namespace

void validate(const RewardConfig& cfg) {
    if (!cfg.use_selection && !cfg.use_format) {
        throw Error(ErrorCode::invalid_config, "reward config must enable selection, format or both");
    }
}

RewardConfig reward_config_from_json(const json& j, RewardConfig base) {
    if (!j.is_object()) throw Error(ErrorCode::invalid_config, "reward config must be an object");
    base.use_selection = j.value("useSelection", base.use_selection);
    base.use_format = j.value("useFormat", base.use_format);
    if (const auto sel = j.find("selection"); sel != j.end() && sel->is_object()) {
        read(*sel, "nearPerfectAt", base.selection.near_perfect_at);
        read(*sel, "highAt", base.selection.high_at);
        read(*sel, "nearPerfect", base.selection.near_perfect);
        read(*sel, "high", base.selection.high);
        read(*sel, "low", base.selection.low);
        read(*sel, "wrong", base.selection.wrong);
        read(*sel, "missing", base.selection.missing);
    }
    if (const auto f = j.find("format"); f != j.end() && f->is_object()) {
        read(*f, "tagged", base.format.tagged);
        read(*f, "fallback", base.format.fallback);
        read(*f, "malformed", base.format.malformed);
        read(*f, "none", base.format.none);
    }
    validate(base);
    return base;
}

Ratio selection_reward(std::string_view output, const eval::NameSet& g, const SelectionTable& table) {
    const auto calls = eval::extract_tool_calls(output);
    const auto s = eval::score_sample(eval::predicted_names(calls), g);
    return select(s, calls.size(), g.empty(), table);
}

Ratio format_reward(std::string_view output, const FormatTable& table) {
    return fmt(eval::extract_detailed(output), table);
}

Breakdown score(std::string_view output, const eval::NameSet& g, const RewardConfig& cfg) {
    validate(cfg);
    const auto ex = eval::extract_detailed(output);
    const auto s = eval::score_sample(eval::predicted_names(ex.calls), g);
    Breakdown b;
    b.f1 = s.f1;
    b.calls = ex.calls.size();
    b.selection = cfg.use_selection ? select(s, ex.calls.size(), g.empty(), cfg.selection) : Ratio(0);
    b.format = cfg.use_format ? fmt(ex, cfg.format) : Ratio(0);
    b.total = b.selection + b.format;
    return b;
}

Ratio total_reward(std::string_view output, const eval::NameSet& g, const RewardConfig& cfg) {
    return score(output, g, cfg).total;
}

json to_json(const Breakdown& b) {
    return {{"selection", b.selection.to_double()},
            {"format", b.format.to_double()},
            {"total", b.total.to_double()},
            {"f1", b.f1.to_double()},
            {"calls", b.calls}};
}

}  // namespace bridgekit::reward

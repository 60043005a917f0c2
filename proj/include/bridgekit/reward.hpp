#pragma once

/// Scalar reward r = r_sel + r_fmt over raw model text, with switches for the
/// selection-only and format-only regimes.

#include "bridgekit/ratio.hpp"
#include "bridgekit/toolcall_eval.hpp"

#include <string_view>

namespace bridgekit::reward {

struct SelectionTable {
    Ratio near_perfect_at{99, 100};
    Ratio high_at{1, 2};
    Ratio near_perfect{2};
    Ratio high{1};
    Ratio low{1, 4};
    Ratio wrong{-1, 2};
    Ratio missing{-1};
};

struct FormatTable {
    Ratio tagged{1, 2};
    Ratio fallback{1, 10};
    Ratio malformed{-1, 4};
    Ratio none{0};
};

struct RewardConfig {
    bool use_selection = true;
    bool use_format = true;
    SelectionTable selection;
    FormatTable format;

    static RewardConfig full() { return {}; }
    static RewardConfig selection_only() { return {true, false, {}, {}}; }
    static RewardConfig format_only() { return {false, true, {}, {}}; }
};

/// Throws Error(invalid_config) when both components are disabled.
void validate(const RewardConfig& cfg);

/// Overrides from {"selection":{...},"format":{...}}; numbers are read to
/// four decimal places.
RewardConfig reward_config_from_json(const json& j, RewardConfig base = {});

Ratio selection_reward(std::string_view output, const eval::NameSet& g, const SelectionTable& table = {});
Ratio format_reward(std::string_view output, const FormatTable& table = {});
Ratio total_reward(std::string_view output, const eval::NameSet& g, const RewardConfig& cfg = {});

struct Breakdown {
    Ratio selection;
    Ratio format;
    Ratio total;
    Ratio f1;
    std::size_t calls = 0;
};

Breakdown score(std::string_view output, const eval::NameSet& g, const RewardConfig& cfg = {});

json to_json(const Breakdown& b);

}  // namespace bridgekit::reward

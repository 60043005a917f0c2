#include "bridgekit/error.hpp"
#include "bridgekit/reward.hpp"
#include "support/eval_fixtures.hpp"

#include <doctest.h>

using namespace bridgekit;
using namespace bridgekit::reward;

namespace {

const std::string kGood = R"(<tool_call>{"name":"search","arguments":{"q":"x"}}</tool_call>)";

}  // namespace

TEST_CASE("selection table") {
    CHECK(selection_reward(kGood, {"search"}) == Ratio(2));
    CHECK(selection_reward(kGood, {"search", "fetch"}) == Ratio(1));  // f1 = 2/3
    CHECK(selection_reward(kGood, {"search", "a", "b", "c", "d"}) == Ratio(1, 4));  // f1 = 1/3
    CHECK(selection_reward(kGood, {"fetch"}) == Ratio(-1, 2));
    CHECK(selection_reward("no call here", {"search"}) == Ratio(-1));
    CHECK(selection_reward("no call here", {}) == Ratio(2));
    CHECK(selection_reward(kGood, {}) == Ratio(-1, 2));
}

TEST_CASE("format table") {
    CHECK(format_reward(kGood) == Ratio(1, 2));
    CHECK(format_reward("<tool_call>{broken") == Ratio(-1, 4));
    CHECK(format_reward("<tool_call>{broken}</tool_call>") == Ratio(-1, 4));
    CHECK(format_reward(R"(use {"name":"search","arguments":{}})") == Ratio(1, 10));
    CHECK(format_reward("plain prose") == Ratio(0));
    CHECK(format_reward("") == Ratio(0));
}

TEST_CASE("totals under each regime") {
    CHECK(total_reward(kGood, {"search"}) == Ratio(5, 2));
    CHECK(total_reward(kGood, {"search"}, RewardConfig::selection_only()) == Ratio(2));
    CHECK(total_reward(R"(<tool_call>{"name":"fetch","arguments":{}}</tool_call>)", {"search"},
                       RewardConfig::format_only()) == Ratio(1, 2));
    RewardConfig off{false, false, {}, {}};
    CHECK_THROWS_AS(total_reward(kGood, {"search"}, off), Error);
    const auto b = score(kGood, {"search"});
    CHECK(b.calls == 1);
    CHECK(b.f1 == Ratio(1));
    CHECK(to_json(b)["total"] == 2.5);
}

TEST_CASE("property: full reward is the sum of the two ablations on a 100-output corpus") {
    const auto corpus = fixtures::reward_corpus(100, 77);
    REQUIRE(corpus.size() == 100);
    for (const auto& s : corpus) {
        CAPTURE(s.output);
        const auto full = total_reward(s.output, s.ground_truth, RewardConfig::full());
        const auto sel = total_reward(s.output, s.ground_truth, RewardConfig::selection_only());
        const auto fmt = total_reward(s.output, s.ground_truth, RewardConfig::format_only());
        CHECK(full == sel + fmt);
        CHECK(sel == selection_reward(s.output, s.ground_truth));
        CHECK(fmt == format_reward(s.output));
    }
}

TEST_CASE("property: selection-only ignores tag well-formedness") {
    const auto corpus = fixtures::reward_corpus(100, 5);
    for (const auto& s : corpus) {
        const auto calls = eval::extract_tool_calls(s.output);
        if (calls.size() != 1 || calls[0].source != eval::CallSource::tagged) continue;
        const std::string body = R"({"name":")" + calls[0].name + R"(","arguments":{"q":1}})";
        const std::string wellformed = "<tool_call>" + body + "</tool_call>";
        const std::string unterminated = "<tool_call>" + body;
        CHECK(total_reward(wellformed, s.ground_truth, RewardConfig::selection_only()) ==
              total_reward(unterminated, s.ground_truth, RewardConfig::selection_only()));
        CHECK(format_reward(wellformed) != format_reward(unterminated));
    }
}

TEST_CASE("property: format-only ignores tool identity") {
    static const std::vector<std::string> names = {"search", "fetch", "read_file", "nonexistent_tool", "x"};
    for (const auto& a : names) {
        for (const auto& b : names) {
            const auto out_a = "<tool_call>{\"name\":\"" + a + "\",\"arguments\":{}}</tool_call>";
            const auto out_b = "<tool_call>{\"name\":\"" + b + "\",\"arguments\":{}}</tool_call>";
            CHECK(total_reward(out_a, {"search"}, RewardConfig::format_only()) ==
                  total_reward(out_b, {"search"}, RewardConfig::format_only()));
        }
    }
}

TEST_CASE("property: rewards stay within [-1.25, 2.5] and selection is monotone in f1") {
    for (const auto& s : fixtures::reward_corpus(400, 123)) {
        const auto t = total_reward(s.output, s.ground_truth);
        CHECK(Ratio(-5, 4) <= t);
        CHECK(t <= Ratio(5, 2));
    }
    // With calls present, sweep f1 over every achievable value for |P|,|G| <= 8.
    const SelectionTable table;
    std::vector<std::pair<Ratio, Ratio>> points;
    for (unsigned p = 1; p < 256; p += 3) {
        for (unsigned g = 1; g < 256; g += 5) {
            const auto ps = fixtures::names_of(p);
            std::string out;
            for (const auto& n : ps) out += "<tool_call>{\"name\":\"" + n + "\",\"arguments\":{}}</tool_call>";
            const auto gs = fixtures::names_of(g);
            points.emplace_back(eval::score_sample(ps, gs).f1, selection_reward(out, gs, table));
        }
    }
    std::size_t violations = 0;
    for (const auto& [f1a, ra] : points) {
        for (const auto& [f1b, rb] : points) {
            if (f1a < f1b && rb < ra) ++violations;
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("tables are overridable from json") {
    const auto cfg = reward_config_from_json(
        {{"useFormat", false}, {"selection", {{"nearPerfect", 3}, {"wrong", -0.75}}}, {"format", {{"tagged", 0.3}}}});
    CHECK_FALSE(cfg.use_format);
    CHECK(cfg.selection.near_perfect == Ratio(3));
    CHECK(cfg.selection.wrong == Ratio(-3, 4));
    CHECK(cfg.format.tagged == Ratio(3, 10));
    CHECK(total_reward(kGood, {"search"}, cfg) == Ratio(3));
    CHECK_THROWS_AS(reward_config_from_json({{"useSelection", false}, {"useFormat", false}}), Error);
    CHECK_THROWS_AS(reward_config_from_json({{"selection", {{"high", "big"}}}}), Error);
}

#include "llmstep/errors.hpp"
#include "llmstep/generation.hpp"
#include "llmstep/proofenv.hpp"
#include "llmstep/text.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace llmstep;
using namespace llmstep::testing;

namespace {

std::vector<std::string> tactics_of(const std::vector<Candidate> &candidates) {
    std::vector<std::string> out;
    for (const auto &c : candidates) {
        out.push_back(c.tactic);
    }
    return out;
}

} // namespace

TEST(ScoreNormalize, MergesWhitespaceDuplicatesKeepingMax) {
    const auto out = score_normalize({{"intro", -1.0}, {"intro ", -0.5}, {"intro  h", -0.7}, {"intro h", -0.2}});
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].tactic, "intro h");
    EXPECT_DOUBLE_EQ(out[0].score, -0.2);
    EXPECT_EQ(normalize_whitespace(out[1].tactic), "intro");
    EXPECT_DOUBLE_EQ(out[1].score, -0.5);
}

TEST(ScoreNormalize, TiesBreakOnTacticText) {
    const auto out = score_normalize({{"simp", -1.0}, {"linarith", -1.0}, {"ring", -1.0}});
    EXPECT_EQ(tactics_of(out), (std::vector<std::string>{"linarith", "ring", "simp"}));
}

TEST(ScoreNormalize, EmptyInput) { EXPECT_TRUE(score_normalize({}).empty()); }

TEST(ScoreNormalize, Property) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> score(-10.0, 0.0);
    std::uniform_int_distribution<int> pick(0, 5);
    const std::vector<std::string> base{"simp", "simp ", " simp", "ring", "intro  h", "intro h"};
    for (int round = 0; round < 200; ++round) {
        std::vector<Candidate> in;
        for (int i = pick(rng) * 3; i > 0; --i) {
            in.push_back({base[static_cast<std::size_t>(pick(rng))], score(rng)});
        }
        const auto out = score_normalize(in);
        std::set<std::string> keys;
        for (const auto &c : out) {
            ASSERT_TRUE(keys.insert(normalize_whitespace(c.tactic)).second);
            double best = -1e300;
            for (const auto &x : in) {
                if (normalize_whitespace(x.tactic) == normalize_whitespace(c.tactic)) {
                    best = std::max(best, x.score);
                }
            }
            ASSERT_EQ(c.score, best);
        }
        std::set<std::string> in_keys;
        for (const auto &x : in) {
            in_keys.insert(normalize_whitespace(x.tactic));
        }
        ASSERT_EQ(keys, in_keys);
        ASSERT_TRUE(std::is_sorted(out.begin(), out.end(),
                                   [](const Candidate &a, const Candidate &b) { return a.score > b.score; }));
        ASSERT_EQ(score_normalize(out), out);
    }
}

TEST(MockGenerator, SubsetSuggestionsInOrder) {
    MockGenerator gen(subset_rules());
    const auto out = gen.generate(TacticState(kSubsetState), "", 5);
    EXPECT_EQ(tactics_of(out), kSubsetSuggestions);
    EXPECT_TRUE(std::is_sorted(out.begin(), out.end(),
                               [](const Candidate &a, const Candidate &b) { return a.score > b.score; }));
}

TEST(MockGenerator, NIsACap) {
    const auto table = subset_rules();
    EXPECT_EQ(tactics_of(generate_mock(table, TacticState(kSubsetState), "", 1)),
              std::vector<std::string>{"exact subset_trans"});
    EXPECT_EQ(generate_mock(table, TacticState(kSubsetState), "", 100).size(), 5u);
}

TEST(MockGenerator, PrefixFilterMatchesOracle) {
    const auto table = subset_rules();
    for (const std::string prefix : {"exact", "exact ", "in", "intros", "t", "z"}) {
        std::vector<std::string> oracle;
        for (const auto &t : kSubsetSuggestions) {
            if (t.rfind(prefix, 0) == 0) {
                oracle.push_back(t);
            }
        }
        EXPECT_EQ(tactics_of(generate_mock(table, TacticState(kSubsetState), prefix, 5)), oracle) << prefix;
    }
    EXPECT_EQ(tactics_of(generate_mock(table, TacticState(kSubsetState), "exact", 5)),
              (std::vector<std::string>{"exact subset_trans", "exact Set.Subset.trans"}));
}

TEST(MockGenerator, UnmatchedStateYieldsNothing) {
    EXPECT_TRUE(generate_mock(subset_rules(), TacticState("⊢ False"), "", 5).empty());
}

TEST(MockGenerator, StateMatchIsWhitespaceInsensitive) {
    EXPECT_EQ(generate_mock(subset_rules(), TacticState("  ⊢ R ⊆ S →  S ⊆ T → R ⊆ T \n"), "", 5).size(), 5u);
}

TEST(MockRuleTable, GlobAndFirstMatchWins) {
    const auto table = MockRuleTable::parse(R"([
        {"state":"⊢ a = a","prefix":"","outputs":[{"tactic":"rfl","score":-0.1}]},
        {"state":"⊢ *","prefix":"","outputs":[{"tactic":"simp","score":-1.0},{"tactic":"aesop","score":-2.0}]},
        {"state":"⊢ ?","prefix":"","outputs":[{"tactic":"never","score":0}]}
    ])");
    EXPECT_EQ(tactics_of(generate_mock(table, TacticState("⊢ a = a"), "", 5)), std::vector<std::string>{"rfl"});
    EXPECT_EQ(tactics_of(generate_mock(table, TacticState("⊢ b"), "", 5)),
              (std::vector<std::string>{"simp", "aesop"}));
    EXPECT_TRUE(generate_mock(table, TacticState("h : p"), "", 5).empty());
}

TEST(MockRuleTable, RulePrefixMustPrefixRequest) {
    const auto table = MockRuleTable::parse(R"([
        {"state":"⊢ p","prefix":"intr","outputs":[{"tactic":"intro h x","score":-0.2},{"tactic":"intros","score":-0.4}]}
    ])");
    EXPECT_TRUE(generate_mock(table, TacticState("⊢ p"), "", 5).empty());
    EXPECT_EQ(generate_mock(table, TacticState("⊢ p"), "intr", 5).size(), 2u);
    EXPECT_EQ(tactics_of(generate_mock(table, TacticState("⊢ p"), "intro ", 5)),
              std::vector<std::string>{"intro h x"});
}

TEST(MockRuleTable, RejectsMalformedTables) {
    EXPECT_THROW(MockRuleTable::parse("{}"), DecodeError);
    EXPECT_THROW(MockRuleTable::parse(R"([{"state":"⊢ p","prefix":"ex","outputs":[{"tactic":"simp","score":0}]}])"),
                 InvalidArgument);
    EXPECT_THROW(MockRuleTable::parse(R"([{"state":"⊢ p","prefix":"","outputs":[{"tactic":"","score":0}]}])"),
                 InvalidArgument);
    EXPECT_THROW(MockRuleTable::parse("[not json"), DecodeError);
    EXPECT_THROW(MockRuleTable::parse(R"([{"state":"⊢ p","outputs":[{"tactic":"simp"}]}])"), DecodeError);
}

TEST(MockRuleTable, JsonRoundTrip) {
    const auto table = subset_rules();
    const auto again = MockRuleTable::parse(table.to_json());
    EXPECT_EQ(again.to_json(), table.to_json());
    EXPECT_EQ(again.rules().size(), table.rules().size());
}

TEST(MockGenerator, GeneratorContractProperty) {
    // Prefix law, cardinality and order over random prefixes and n.
    const auto table = MockRuleTable::load(data_path("bench_rules.json"));
    MockGenerator gen(table);
    std::mt19937_64 rng(21);
    const std::vector<std::string> states{kSubsetState, "case t1\n⊢ p", "h1 : R ⊆ S\nh2 : S ⊆ T\n⊢ R ⊆ T", "⊢ q"};
    const std::vector<std::string> prefixes{"", "e", "exact", "exact ", "i", "intro", "s", "t", "norm", "x"};
    std::uniform_int_distribution<int> n_dist(1, 40);
    for (int i = 0; i < 400; ++i) {
        const auto &state = states[rng() % states.size()];
        const auto &prefix = prefixes[rng() % prefixes.size()];
        const int n = n_dist(rng);
        const auto out = gen.generate(TacticState(state), prefix, n);
        ASSERT_LE(out.size(), static_cast<std::size_t>(n));
        for (const auto &c : out) {
            ASSERT_TRUE(c.tactic.starts_with(prefix)) << c.tactic << " / " << prefix;
        }
        ASSERT_TRUE(std::is_sorted(out.begin(), out.end(),
                                   [](const Candidate &a, const Candidate &b) { return a.score > b.score; }));
    }
}

TEST(EdgeEnumeratingGenerator, EmitsEveryEdge) {
    const auto table = subset_table();
    EdgeEnumeratingGenerator gen(table);
    const auto out = gen.generate(TacticState(kSubsetState), "", 100);
    std::set<std::string> emitted;
    for (const auto &c : out) {
        emitted.insert(c.tactic);
        EXPECT_DOUBLE_EQ(c.score, EdgeEnumeratingGenerator::edge_score(TacticState(kSubsetState).key(), c.tactic));
    }
    std::set<std::string> edges;
    for (const auto &[tactic, outcome] : *table->edges_from(TacticState(kSubsetState))) {
        edges.insert(tactic);
    }
    EXPECT_EQ(emitted, edges);
    EXPECT_EQ(edges.count("exact rfl"), 1u);
}

TEST(EdgeEnumeratingGenerator, QuantizedScoresAndLimits) {
    const auto table = subset_table();
    EdgeEnumeratingGenerator gen(table);
    for (const auto &c : gen.generate(TacticState(kSubsetState), "", 100)) {
        const double steps = c.score / -0.25;
        EXPECT_DOUBLE_EQ(steps, std::round(steps));
        EXPECT_GE(steps, 1.0);
        EXPECT_LE(steps, 8.0);
    }
    EXPECT_EQ(gen.generate(TacticState(kSubsetState), "", 2).size(), 2u);
    EXPECT_TRUE(gen.generate(TacticState("⊢ unknown"), "", 5).empty());
    for (const auto &c : gen.generate(TacticState(kSubsetState), "exact", 100)) {
        EXPECT_TRUE(c.tactic.starts_with("exact"));
    }
}

TEST(RemoteBackendConfig, Validation) {
    RemoteBackendConfig config;
    EXPECT_THROW(config.validate(), InvalidArgument);
    config.endpoint_url = "http://127.0.0.1:1/v1";
    EXPECT_NO_THROW(config.validate());
    config.beam_width_or_samples = 0;
    EXPECT_THROW(config.validate(), InvalidArgument);
    config.beam_width_or_samples = 4;
    config.request_timeout_s = 0;
    EXPECT_THROW(config.validate(), InvalidArgument);
    config.request_timeout_s = 1;
    config.endpoint_url = "https://example.invalid/";
    EXPECT_THROW(RemoteGenerator{config}, InvalidArgument);
}

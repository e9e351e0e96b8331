#include "llmstep/corpus.hpp"
#include "llmstep/errors.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <map>

using namespace llmstep;

namespace {

const CorpusParams kStandard{7, 50, 4, 3, 4};

/// Independent shortest-proof length by memoized recursion over the table.
std::optional<std::size_t> shortest_proof_length(const SimProverTable &table, const std::string &key,
                                                 std::map<std::string, std::optional<std::size_t>> &memo) {
    if (auto it = memo.find(key); it != memo.end()) {
        return it->second;
    }
    std::optional<std::size_t> best;
    const auto &transitions = table.transitions();
    if (auto it = transitions.find(key); it != transitions.end()) {
        for (const auto &[tactic, outcome] : it->second) {
            std::optional<std::size_t> len;
            if (outcome.is_completed()) {
                len = 1;
            } else if (outcome.is_progress()) {
                if (auto sub = shortest_proof_length(table, outcome.next_state()->key(), memo)) {
                    len = *sub + 1;
                }
            }
            if (len && (!best || *len < *best)) {
                best = len;
            }
        }
    }
    memo[key] = best;
    return best;
}

/// Longest path in progress edges; fails the test on a cycle.
std::size_t longest_path(const SimProverTable &table, const std::string &key, std::map<std::string, int> &colour,
                         std::map<std::string, std::size_t> &memo) {
    if (colour[key] == 2) {
        return memo[key];
    }
    EXPECT_NE(colour[key], 1) << "cycle through " << key;
    if (colour[key] == 1) {
        return 0;
    }
    colour[key] = 1;
    std::size_t best = 0;
    if (auto it = table.transitions().find(key); it != table.transitions().end()) {
        for (const auto &[tactic, outcome] : it->second) {
            if (outcome.is_progress()) {
                best = std::max(best, 1 + longest_path(table, outcome.next_state()->key(), colour, memo));
            }
        }
    }
    colour[key] = 2;
    memo[key] = best;
    return best;
}

} // namespace

TEST(Corpus, StandardShape) {
    const auto corpus = generate_corpus(kStandard);
    EXPECT_EQ(corpus.id, "synthetic-s7-n50-d4-b3-x4");
    EXPECT_EQ(corpus.theorems.size(), 50u);
    EXPECT_EQ(corpus.theorems.front().id, "thm000");
    EXPECT_EQ(corpus.theorems.back().id, "thm049");
}

TEST(Corpus, SmallestCorpus) {
    const auto corpus = generate_corpus({1, 1, 1, 1, 0});
    ASSERT_EQ(corpus.theorems.size(), 1u);
    const auto &thm = corpus.theorems.front();
    ASSERT_EQ(thm.known_proof.size(), 1u);
    EXPECT_EQ(thm.distractor_count, 0u);
    SimulatedProver prover(std::make_shared<const SimProverTable>(corpus.table));
    EXPECT_TRUE(replay_proof(prover, thm.root, thm.known_proof));
}

TEST(Corpus, RejectsDegenerateParams) {
    EXPECT_THROW(generate_corpus({1, 0, 1, 1, 0}), InvalidArgument);
    EXPECT_THROW(generate_corpus({1, 1, 0, 1, 0}), InvalidArgument);
    EXPECT_THROW(generate_corpus({1, 1, 1, 0, 0}), InvalidArgument);
}

TEST(Corpus, EveryTheoremSolvableWithinMaxDepth) {
    const auto corpus = generate_corpus(kStandard);
    std::map<std::string, std::optional<std::size_t>> memo;
    for (const auto &thm : corpus.theorems) {
        const auto proof = brute_force_prove(corpus.table, thm.root, kStandard.max_depth);
        ASSERT_TRUE(proof.has_value()) << thm.id;
        EXPECT_LE(proof->size(), thm.known_proof.size()) << thm.id;
        EXPECT_LE(thm.known_proof.size(), kStandard.max_depth);
        EXPECT_EQ(shortest_proof_length(corpus.table, thm.root.key(), memo), proof->size()) << thm.id;
    }
}

TEST(Corpus, KnownProofsReplay) {
    const auto corpus = generate_corpus(kStandard);
    SimulatedProver prover(std::make_shared<const SimProverTable>(corpus.table));
    for (const auto &thm : corpus.theorems) {
        EXPECT_TRUE(replay_proof(prover, thm.root, thm.known_proof)) << thm.id;
    }
}

TEST(Corpus, ByteDeterministic) {
    EXPECT_EQ(generate_corpus(kStandard).to_json(), generate_corpus(kStandard).to_json());
    EXPECT_NE(generate_corpus(kStandard).to_json(), generate_corpus({8, 50, 4, 3, 4}).to_json());
}

TEST(Corpus, StructuralInvariantsAcrossSeeds) {
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        const CorpusParams params{seed, 8, 1 + seed % 5, 1 + seed % 3, seed % 4};
        const auto corpus = generate_corpus(params);
        const auto &table = corpus.table;
        ASSERT_NO_THROW(table.validate());

        std::size_t error_edges = 0;
        for (const auto &[state, edges] : table.transitions()) {
            std::size_t progress = 0;
            std::size_t errors = 0;
            for (const auto &[tactic, outcome] : edges) {
                progress += outcome.is_progress() ? 1 : 0;
                errors += outcome.is_error() ? 1 : 0;
            }
            EXPECT_LE(progress, params.branching) << state;
            EXPECT_EQ(errors, params.distractors_per_state) << state;
            error_edges += errors;
        }
        std::size_t declared = 0;
        std::map<std::string, int> colour;
        std::map<std::string, std::size_t> memo;
        for (const auto &thm : corpus.theorems) {
            declared += thm.distractor_count;
            EXPECT_LT(longest_path(table, thm.root.key(), colour, memo), params.max_depth) << thm.id;
            EXPECT_TRUE(brute_force_prove(table, thm.root, params.max_depth).has_value()) << thm.id;
        }
        EXPECT_EQ(declared, error_edges);
    }
}

TEST(Corpus, FileRoundTrip) {
    const auto corpus = generate_corpus({3, 6, 3, 2, 1});
    EXPECT_EQ(Corpus::parse(corpus.to_json()), corpus);
    const auto path = std::filesystem::temp_directory_path() / "llmstep_corpus_roundtrip.json";
    corpus.save(path);
    EXPECT_EQ(Corpus::load(path), corpus);
    std::filesystem::remove(path);
}

TEST(Corpus, RejectsForeignFiles) {
    EXPECT_THROW(Corpus::parse("[]"), Error);
    EXPECT_THROW(Corpus::parse(R"({"schema_version":99,"corpus_id":"x","table":{},"theorems":[]})"), Error);
    EXPECT_THROW(Corpus::load(llmstep::testing::data_path("subset_rules.json")), Error);
}

#pragma once

#include "llmstep/proofenv.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace llmstep {

struct CorpusTheorem {
    std::string id;
    TacticState root;
    /// Ground-truth proof, private to the generator; search never sees it.
    std::vector<std::string> known_proof;
    std::size_t distractor_count = 0;

    friend bool operator==(const CorpusTheorem &, const CorpusTheorem &) = default;
};

struct CorpusParams {
    std::uint64_t seed = 0;
    std::size_t count = 1;
    std::size_t max_depth = 1;
    std::size_t branching = 1;
    std::size_t distractors_per_state = 0;
};

/// A set of theorems over one shared transition table.
struct Corpus {
    std::string id;
    SimProverTable table;
    std::vector<CorpusTheorem> theorems;

    [[nodiscard]] std::string to_json() const;
    static Corpus parse(std::string_view json_text);
    static Corpus load(const std::filesystem::path &path);
    void save(const std::filesystem::path &path) const;

    friend bool operator==(const Corpus &, const Corpus &) = default;
};

/// Seeded synthetic proof-DAG corpus.
///
/// Each theorem gets a spine of progress edges ending in a completing edge
/// (its known proof, length <= max_depth). Every non-terminal state carries
/// `distractors_per_state` error edges and at most `branching` progress edges;
/// side branches may dead-end, merge into deeper spine states, or complete
/// early. Edges always increase depth, so the graph is acyclic.
[[nodiscard]] Corpus generate_corpus(const CorpusParams &params);

} // namespace llmstep

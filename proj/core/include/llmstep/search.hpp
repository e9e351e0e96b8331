#pragma once

#include "llmstep/generation.hpp"
#include "llmstep/proofenv.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace llmstep {

/// Search budget: attempts x expansion size x iterations, under a wall-clock
/// timeout that applies to each attempt separately.
struct SearchBudget {
    int attempts = 1;
    int expansion_size = 32;
    int max_iterations = 100;
    double timeout_s = 600.0;
    /// Nodes at this depth are not expanded. nullopt disables the cap.
    std::optional<std::size_t> max_depth = 50;

    void validate() const;

    /// attempts * expansion_size * max_iterations
    [[nodiscard]] std::uint64_t max_generated_tactics() const noexcept;
    /// Short label such as "2×32".
    [[nodiscard]] std::string label() const;

    friend bool operator==(const SearchBudget &, const SearchBudget &) = default;
};

struct SearchNode {
    TacticState state;
    std::vector<std::string> path;
    double priority = 0.0;
    std::size_t depth = 0;
};

enum class SearchOutcome { proved, exhausted, timeout };

[[nodiscard]] std::string_view to_string(SearchOutcome outcome) noexcept;

struct SearchStats {
    /// Frontier pops, including nodes skipped by the depth cap.
    std::size_t iterations = 0;
    /// Generator invocations; bounded by max_iterations per attempt.
    std::size_t nodes_expanded = 0;
    std::uint64_t tactics_generated = 0;
    double wall_time_s = 0.0;
    int attempt_index = 0;
};

struct SearchResult {
    SearchOutcome outcome = SearchOutcome::exhausted;
    std::vector<std::string> proof;
    SearchStats stats;
};

/// Called for every node handed to the generator, in expansion order.
using ExpansionObserver = std::function<void(const SearchNode &)>;

/// One best-first attempt.
///
/// Pops the highest cumulative-score node (FIFO among equal priorities when
/// `tie_salt` is 0, a salted permutation of insertion order otherwise), asks
/// the generator for `expansion_size` candidates with an empty prefix, and
/// classifies them. Environment and backend failures propagate as exceptions.
[[nodiscard]] SearchResult best_first_search(ProofEnvironment &env, Generator &generator, const TacticState &root,
                                             const SearchBudget &budget, std::uint64_t tie_salt = 0,
                                             const ExpansionObserver &observer = {});

/// Runs `budget.attempts` sequential attempts; attempt k uses tie salt k, so
/// attempt 0 is identical to a single-attempt run. The first proof wins and
/// stats are summed over the attempts that ran.
[[nodiscard]] SearchResult run_attempts(ProofEnvironment &env, Generator &generator, const TacticState &root,
                                        const SearchBudget &budget);

} // namespace llmstep

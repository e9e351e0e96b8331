#pragma once

#include "llmstep/generation.hpp"
#include "llmstep/proofenv.hpp"
#include "llmstep/protocol.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace llmstep {

struct CheckResult {
    SuggestionStatus status;
    /// Present iff status is valid.
    std::optional<TacticState> next_state;
};

/// completed -> complete, progress -> valid (+ next state), error -> invalid.
[[nodiscard]] SuggestionStatus status_of(const ProverOutcome &outcome) noexcept;

/// Environment failures propagate; they are never reported as invalid.
[[nodiscard]] CheckResult check_one(ProofEnvironment &env, const TacticState &state, std::string_view tactic);

struct CheckedSuggestion {
    Suggestion suggestion;
    std::optional<TacticState> next_state;
};

/// Classified suggestions for one state, ordered complete, valid, invalid,
/// then by score descending, then by tactic text. No two entries share a
/// normalized tactic.
struct CheckedBatch {
    TacticState state;
    std::vector<CheckedSuggestion> entries;

    [[nodiscard]] std::vector<Suggestion> suggestions() const;
    [[nodiscard]] std::vector<Candidate> candidates() const;
};

/// Strict weak order used for CheckedBatch and for server responses.
[[nodiscard]] bool display_order(const Suggestion &a, const Suggestion &b) noexcept;

[[nodiscard]] CheckedBatch check_batch(ProofEnvironment &env, const TacticState &state,
                                       std::vector<Candidate> candidates);

} // namespace llmstep

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace llmstep {

/// Marker strings of the proofstep prompt format.
inline constexpr std::string_view kGoalMarker = "[GOAL]";
inline constexpr std::string_view kProofstepMarker = "[PROOFSTEP]";
inline constexpr std::string_view kEndOfText = "<|endoftext|>";

inline constexpr int kDefaultSuggestionCount = 5;

/// Pretty-printed proof state: goals plus hypotheses.
///
/// Text is trimmed on construction and must be valid UTF-8. A goal count of
/// zero marks a finished proof and can only be produced through `solved()`.
class TacticState {
  public:
    explicit TacticState(std::string_view text, std::optional<std::size_t> goal_count = std::nullopt);

    static TacticState solved(std::string_view text = {});

    [[nodiscard]] const std::string &text() const noexcept { return text_; }
    [[nodiscard]] std::optional<std::size_t> goal_count() const noexcept { return goal_count_; }
    [[nodiscard]] bool empty() const noexcept { return text_.empty(); }

    /// Whitespace-normalized text; the identity of a state.
    [[nodiscard]] std::string key() const;

    friend bool operator==(const TacticState &, const TacticState &) = default;

  private:
    TacticState() = default;

    std::string text_;
    std::optional<std::size_t> goal_count_;
};

enum class SuggestionStatus { complete, valid, invalid, unchecked };

[[nodiscard]] std::string_view to_string(SuggestionStatus status) noexcept;
[[nodiscard]] SuggestionStatus status_from_string(std::string_view name);

/// Display rank: complete < valid < invalid < unchecked.
[[nodiscard]] int status_rank(SuggestionStatus status) noexcept;

struct Suggestion {
    Suggestion(std::string tactic, double score, SuggestionStatus status = SuggestionStatus::unchecked);

    std::string tactic;
    double score;
    SuggestionStatus status;

    friend bool operator==(const Suggestion &, const Suggestion &) = default;
};

struct SuggestRequest {
    SuggestRequest(TacticState state, std::string prefix, int n = kDefaultSuggestionCount);

    TacticState tactic_state;
    std::string prefix;
    int n;

    friend bool operator==(const SuggestRequest &, const SuggestRequest &) = default;
};

struct SuggestResponse {
    std::vector<Suggestion> suggestions;
    std::string model_id;
    std::int64_t latency_ms = 0;

    friend bool operator==(const SuggestResponse &, const SuggestResponse &) = default;
};

/// Builds the generator prompt `[GOAL]<state>[PROOFSTEP]<prefix>`.
/// Throws InvalidArgument when the state text is empty.
[[nodiscard]] std::string encode_prompt(const TacticState &state, std::string_view prefix);

/// Assembles a full tactic from a model continuation.
///
/// The continuation is cut at the first end-of-text sentinel or newline and
/// its trailing whitespace dropped; the prefix is kept verbatim so the result
/// always starts with it. Returns nullopt when nothing but whitespace remains.
[[nodiscard]] std::optional<std::string> parse_completion(std::string_view prefix, std::string_view completion);

// Canonical UTF-8 JSON wire form. Decoding ignores unknown fields and throws
// DecodeError naming the first offending field.
[[nodiscard]] std::string serialize(const SuggestRequest &request);
[[nodiscard]] std::string serialize(const SuggestResponse &response);
[[nodiscard]] SuggestRequest deserialize_request(std::string_view bytes, int default_n = kDefaultSuggestionCount);
[[nodiscard]] SuggestResponse deserialize_response(std::string_view bytes);

} // namespace llmstep

#include "llmstep/protocol.hpp"

#include "llmstep/errors.hpp"
#include "llmstep/text.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace llmstep {

using nlohmann::json;

TacticState::TacticState(std::string_view text, std::optional<std::size_t> goal_count)
    : text_(trim(text)), goal_count_(goal_count) {
    if (!is_valid_utf8(text_)) {
        throw InvalidArgument("tactic state is not valid UTF-8");
    }
    if (goal_count_ && *goal_count_ == 0) {
        throw InvalidArgument("goal_count 0 is reserved for prover-completed states");
    }
}

TacticState TacticState::solved(std::string_view text) {
    TacticState state;
    state.text_ = std::string(trim(text));
    state.goal_count_ = 0;
    return state;
}

std::string TacticState::key() const { return normalize_whitespace(text_); }

std::string_view to_string(SuggestionStatus status) noexcept {
    switch (status) {
    case SuggestionStatus::complete:
        return "complete";
    case SuggestionStatus::valid:
        return "valid";
    case SuggestionStatus::invalid:
        return "invalid";
    case SuggestionStatus::unchecked:
        return "unchecked";
    }
    return "unchecked";
}

SuggestionStatus status_from_string(std::string_view name) {
    if (name == "complete") return SuggestionStatus::complete;
    if (name == "valid") return SuggestionStatus::valid;
    if (name == "invalid") return SuggestionStatus::invalid;
    if (name == "unchecked") return SuggestionStatus::unchecked;
    throw InvalidArgument("unknown suggestion status '" + std::string(name) + "'");
}

int status_rank(SuggestionStatus status) noexcept { return static_cast<int>(status); }

Suggestion::Suggestion(std::string tactic_text, double score_value, SuggestionStatus status_value)
    : tactic(std::move(tactic_text)), score(score_value), status(status_value) {
    if (trim(tactic).empty()) {
        throw InvalidArgument("suggestion tactic is empty");
    }
    if (!std::isfinite(score)) {
        throw InvalidArgument("suggestion score must be finite");
    }
}

SuggestRequest::SuggestRequest(TacticState state, std::string prefix_text, int count)
    : tactic_state(std::move(state)), prefix(std::move(prefix_text)), n(count) {
    if (tactic_state.empty()) {
        throw InvalidArgument("tactic_state is empty");
    }
    if (n < 1) {
        throw InvalidArgument("n must be >= 1");
    }
    if (!is_valid_utf8(prefix)) {
        throw InvalidArgument("prefix is not valid UTF-8");
    }
}

std::string encode_prompt(const TacticState &state, std::string_view prefix) {
    if (state.empty()) {
        throw InvalidArgument("cannot encode a prompt for an empty tactic state");
    }
    std::string prompt;
    prompt.reserve(kGoalMarker.size() + state.text().size() + kProofstepMarker.size() + prefix.size());
    prompt.append(kGoalMarker).append(state.text()).append(kProofstepMarker).append(prefix);
    return prompt;
}

std::optional<std::string> parse_completion(std::string_view prefix, std::string_view completion) {
    if (auto cut = completion.find(kEndOfText); cut != std::string_view::npos) {
        completion = completion.substr(0, cut);
    }
    if (auto cut = completion.find('\n'); cut != std::string_view::npos) {
        completion = completion.substr(0, cut);
    }
    completion = trim_right(completion);
    std::string tactic;
    tactic.reserve(prefix.size() + completion.size());
    tactic.append(prefix).append(completion);
    if (trim(tactic).empty()) {
        return std::nullopt;
    }
    return tactic;
}

// ---------------------------------------------------------------------------
// JSON wire form

namespace {

json parse_object(std::string_view bytes) {
    json doc;
    try {
        doc = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error &e) {
        throw DecodeError("$", e.what());
    }
    if (!doc.is_object()) {
        throw DecodeError("$", "expected a JSON object");
    }
    return doc;
}

const json &require(const json &obj, const char *field) {
    auto it = obj.find(field);
    if (it == obj.end()) {
        throw DecodeError(field, "missing required field");
    }
    return *it;
}

std::string require_string(const json &obj, const char *field) {
    const json &v = require(obj, field);
    if (!v.is_string()) {
        throw DecodeError(field, "expected a string");
    }
    return v.get<std::string>();
}

std::int64_t require_integer(const json &v, const char *field) {
    if (!v.is_number_integer()) {
        throw DecodeError(field, "expected an integer");
    }
    return v.get<std::int64_t>();
}

std::string dump(const json &doc) {
    // Sorted keys (nlohmann::json uses std::map) give one canonical byte form.
    return doc.dump(-1, ' ', false, json::error_handler_t::strict);
}

} // namespace

std::string serialize(const SuggestRequest &request) {
    json doc{{"tactic_state", request.tactic_state.text()}, {"prefix", request.prefix}, {"n", request.n}};
    if (auto goals = request.tactic_state.goal_count()) {
        doc["goal_count"] = *goals;
    }
    return dump(doc);
}

std::string serialize(const SuggestResponse &response) {
    json suggestions = json::array();
    for (const auto &s : response.suggestions) {
        suggestions.push_back({{"tactic", s.tactic}, {"score", s.score}, {"status", to_string(s.status)}});
    }
    return dump({{"suggestions", std::move(suggestions)},
                 {"model_id", response.model_id},
                 {"latency_ms", response.latency_ms}});
}

SuggestRequest deserialize_request(std::string_view bytes, int default_n) {
    const json doc = parse_object(bytes);

    const std::string text = require_string(doc, "tactic_state");
    if (!is_valid_utf8(text)) {
        throw DecodeError("tactic_state", "not valid UTF-8");
    }
    const std::string prefix = require_string(doc, "prefix");

    std::int64_t n = default_n;
    if (auto it = doc.find("n"); it != doc.end() && !it->is_null()) {
        n = require_integer(*it, "n");
    }
    if (n < 1 || n > 100000) {
        throw DecodeError("n", "must be a positive integer");
    }

    std::optional<std::size_t> goals;
    if (auto it = doc.find("goal_count"); it != doc.end() && !it->is_null()) {
        const auto g = require_integer(*it, "goal_count");
        if (g < 1) {
            throw DecodeError("goal_count", "must be >= 1 for a request state");
        }
        goals = static_cast<std::size_t>(g);
    }

    TacticState state(text, goals);
    if (state.empty()) {
        throw DecodeError("tactic_state", "must be non-empty");
    }
    return SuggestRequest(std::move(state), prefix, static_cast<int>(n));
}

SuggestResponse deserialize_response(std::string_view bytes) {
    const json doc = parse_object(bytes);
    SuggestResponse response;
    response.model_id = require_string(doc, "model_id");
    response.latency_ms = require_integer(require(doc, "latency_ms"), "latency_ms");
    if (response.latency_ms < 0) {
        throw DecodeError("latency_ms", "must be non-negative");
    }
    const json &list = require(doc, "suggestions");
    if (!list.is_array()) {
        throw DecodeError("suggestions", "expected an array");
    }
    for (const json &item : list) {
        if (!item.is_object()) {
            throw DecodeError("suggestions", "expected an array of objects");
        }
        std::string tactic = require_string(item, "tactic");
        const json &score = require(item, "score");
        if (!score.is_number()) {
            throw DecodeError("score", "expected a number");
        }
        SuggestionStatus status = SuggestionStatus::unchecked;
        try {
            status = status_from_string(require_string(item, "status"));
        } catch (const InvalidArgument &e) {
            throw DecodeError("status", e.what());
        }
        try {
            response.suggestions.emplace_back(std::move(tactic), score.get<double>(), status);
        } catch (const InvalidArgument &e) {
            throw DecodeError("tactic", e.what());
        }
    }
    return response;
}

} // namespace llmstep

#include "llmstep/checking.hpp"

#include "llmstep/errors.hpp"
#include "llmstep/text.hpp"

#include <algorithm>
#include <future>
#include <thread>

namespace llmstep {

namespace {

constexpr std::size_t kParallelThreshold = 16;

} // namespace

SuggestionStatus status_of(const ProverOutcome &outcome) noexcept {
    switch (outcome.kind()) {
    case ProverOutcome::Kind::completed:
        return SuggestionStatus::complete;
    case ProverOutcome::Kind::progress:
        return SuggestionStatus::valid;
    case ProverOutcome::Kind::error:
        return SuggestionStatus::invalid;
    }
    return SuggestionStatus::invalid;
}

CheckResult check_one(ProofEnvironment &env, const TacticState &state, std::string_view tactic) {
    if (trim(tactic).empty()) {
        throw InvalidArgument("cannot check an empty tactic");
    }
    ProverOutcome outcome = env.apply(state, tactic);
    CheckResult result{status_of(outcome), std::nullopt};
    if (outcome.is_progress()) {
        result.next_state = *outcome.next_state();
    }
    return result;
}

bool display_order(const Suggestion &a, const Suggestion &b) noexcept {
    if (status_rank(a.status) != status_rank(b.status)) {
        return status_rank(a.status) < status_rank(b.status);
    }
    if (a.score != b.score) {
        return a.score > b.score;
    }
    return a.tactic < b.tactic;
}

std::vector<Suggestion> CheckedBatch::suggestions() const {
    std::vector<Suggestion> out;
    out.reserve(entries.size());
    for (const auto &e : entries) {
        out.push_back(e.suggestion);
    }
    return out;
}

std::vector<Candidate> CheckedBatch::candidates() const {
    std::vector<Candidate> out;
    out.reserve(entries.size());
    for (const auto &e : entries) {
        out.push_back({e.suggestion.tactic, e.suggestion.score});
    }
    return out;
}

CheckedBatch check_batch(ProofEnvironment &env, const TacticState &state, std::vector<Candidate> candidates) {
    std::vector<Candidate> unique;
    for (auto &c : score_normalize(std::move(candidates))) {
        if (!trim(c.tactic).empty()) {
            unique.push_back(std::move(c));
        }
    }

    std::vector<CheckResult> results(unique.size(), CheckResult{SuggestionStatus::unchecked, std::nullopt});
    auto classify = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            results[i] = check_one(env, state, unique[i].tactic);
        }
    };

    const std::size_t workers =
        std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
    if (env.concurrent_safe() && unique.size() >= kParallelThreshold && workers > 1) {
        const std::size_t chunk = (unique.size() + workers - 1) / workers;
        std::vector<std::future<void>> jobs;
        for (std::size_t begin = 0; begin < unique.size(); begin += chunk) {
            jobs.push_back(std::async(std::launch::async, classify, begin, std::min(begin + chunk, unique.size())));
        }
        // Waiting in submission order surfaces the earliest failing chunk.
        std::exception_ptr first;
        for (auto &job : jobs) {
            try {
                job.get();
            } catch (...) {
                if (!first) {
                    first = std::current_exception();
                }
            }
        }
        if (first) {
            std::rethrow_exception(first);
        }
    } else {
        classify(0, unique.size());
    }

    CheckedBatch batch{state, {}};
    batch.entries.reserve(unique.size());
    for (std::size_t i = 0; i < unique.size(); ++i) {
        batch.entries.push_back(
            {Suggestion(std::move(unique[i].tactic), unique[i].score, results[i].status), std::move(results[i].next_state)});
    }
    std::stable_sort(batch.entries.begin(), batch.entries.end(),
                     [](const CheckedSuggestion &a, const CheckedSuggestion &b) {
                         return display_order(a.suggestion, b.suggestion);
                     });
    return batch;
}

} // namespace llmstep

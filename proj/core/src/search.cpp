#include "llmstep/search.hpp"

#include "llmstep/checking.hpp"
#include "llmstep/errors.hpp"

#include <chrono>
#include <cmath>
#include <queue>
#include <unordered_map>

namespace llmstep {

using Clock = std::chrono::steady_clock;

void SearchBudget::validate() const {
    if (attempts < 1) {
        throw InvalidArgument("search budget: attempts must be >= 1");
    }
    if (expansion_size < 1) {
        throw InvalidArgument("search budget: expansion_size must be >= 1");
    }
    if (max_iterations < 1) {
        throw InvalidArgument("search budget: max_iterations must be >= 1");
    }
    if (!(timeout_s > 0.0) || !std::isfinite(timeout_s)) {
        throw InvalidArgument("search budget: timeout_s must be a positive number");
    }
    if (max_depth && *max_depth < 1) {
        throw InvalidArgument("search budget: max_depth must be >= 1 when set");
    }
}

std::uint64_t SearchBudget::max_generated_tactics() const noexcept {
    return static_cast<std::uint64_t>(attempts) * static_cast<std::uint64_t>(expansion_size) *
           static_cast<std::uint64_t>(max_iterations);
}

std::string SearchBudget::label() const { return std::to_string(attempts) + "×" + std::to_string(expansion_size); }

std::string_view to_string(SearchOutcome outcome) noexcept {
    switch (outcome) {
    case SearchOutcome::proved:
        return "proved";
    case SearchOutcome::exhausted:
        return "exhausted";
    case SearchOutcome::timeout:
        return "timeout";
    }
    return "exhausted";
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

struct FrontierEntry {
    double priority;
    std::uint64_t tie_key;
    std::size_t node;
};

struct FrontierOrder {
    bool operator()(const FrontierEntry &a, const FrontierEntry &b) const noexcept {
        // std::priority_queue pops the "largest"; we want max priority, then min tie key.
        if (a.priority != b.priority) {
            return a.priority < b.priority;
        }
        return a.tie_key > b.tie_key;
    }
};

} // namespace

SearchResult best_first_search(ProofEnvironment &env, Generator &generator, const TacticState &root,
                               const SearchBudget &budget, std::uint64_t tie_salt,
                               const ExpansionObserver &observer) {
    budget.validate();
    if (root.empty() || (root.goal_count() && *root.goal_count() == 0)) {
        throw InvalidArgument("search root must be an open goal");
    }

    const auto start = Clock::now();
    const auto deadline =
        start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(budget.timeout_s));
    const std::uint64_t salt_mix = splitmix64(tie_salt);
    std::uint64_t inserted = 0;
    auto next_tie_key = [&] {
        const std::uint64_t order = inserted++;
        return tie_salt == 0 ? order : splitmix64(order ^ salt_mix);
    };

    SearchResult result;
    auto finish = [&](SearchOutcome outcome) {
        result.outcome = outcome;
        result.stats.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
        return result;
    };

    std::vector<SearchNode> nodes;
    std::priority_queue<FrontierEntry, std::vector<FrontierEntry>, FrontierOrder> frontier;
    std::unordered_map<std::string, double> best_priority;

    nodes.push_back(SearchNode{root, {}, 0.0, 0});
    best_priority.emplace(root.key(), 0.0);
    frontier.push({0.0, next_tie_key(), 0});

    while (true) {
        if (Clock::now() >= deadline) {
            return finish(SearchOutcome::timeout);
        }
        if (frontier.empty() || result.stats.nodes_expanded >= static_cast<std::size_t>(budget.max_iterations)) {
            return finish(SearchOutcome::exhausted);
        }

        const FrontierEntry top = frontier.top();
        frontier.pop();
        // Superseded by a better-priority path to the same state.
        if (best_priority.at(nodes[top.node].state.key()) > top.priority) {
            continue;
        }
        ++result.stats.iterations;
        const SearchNode node = nodes[top.node];
        if (budget.max_depth && node.depth >= *budget.max_depth) {
            continue;
        }

        if (observer) {
            observer(node);
        }
        auto candidates = generator.generate(node.state, "", budget.expansion_size);
        if (candidates.size() > static_cast<std::size_t>(budget.expansion_size)) {
            candidates.resize(static_cast<std::size_t>(budget.expansion_size));
        }
        ++result.stats.nodes_expanded;
        result.stats.tactics_generated += candidates.size();
        if (Clock::now() >= deadline) {
            return finish(SearchOutcome::timeout);
        }

        CheckedBatch batch = check_batch(env, node.state, std::move(candidates));
        for (auto &entry : batch.entries) {
            const Suggestion &s = entry.suggestion;
            if (s.status == SuggestionStatus::complete) {
                result.proof = node.path;
                result.proof.push_back(s.tactic);
                return finish(SearchOutcome::proved);
            }
            if (s.status != SuggestionStatus::valid) {
                continue;
            }
            const double priority = node.priority + s.score;
            const std::string key = entry.next_state->key();
            auto [it, fresh] = best_priority.try_emplace(key, priority);
            if (!fresh) {
                if (it->second >= priority) {
                    continue;
                }
                it->second = priority;
            }
            SearchNode child{*entry.next_state, node.path, priority, node.depth + 1};
            child.path.push_back(s.tactic);
            nodes.push_back(std::move(child));
            frontier.push({priority, next_tie_key(), nodes.size() - 1});
        }
    }
}

SearchResult run_attempts(ProofEnvironment &env, Generator &generator, const TacticState &root,
                          const SearchBudget &budget) {
    budget.validate();
    SearchResult total;
    bool any_timeout = false;
    for (int attempt = 0; attempt < budget.attempts; ++attempt) {
        SearchResult r = best_first_search(env, generator, root, budget, static_cast<std::uint64_t>(attempt));
        total.stats.iterations += r.stats.iterations;
        total.stats.nodes_expanded += r.stats.nodes_expanded;
        total.stats.tactics_generated += r.stats.tactics_generated;
        total.stats.wall_time_s += r.stats.wall_time_s;
        total.stats.attempt_index = attempt;
        any_timeout = any_timeout || r.outcome == SearchOutcome::timeout;
        if (r.outcome == SearchOutcome::proved) {
            total.outcome = SearchOutcome::proved;
            total.proof = std::move(r.proof);
            return total;
        }
    }
    total.outcome = any_timeout ? SearchOutcome::timeout : SearchOutcome::exhausted;
    return total;
}

} // namespace llmstep

#include "llmstep/proofenv.hpp"

#include "llmstep/errors.hpp"
#include "llmstep/text.hpp"

#include <deque>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

namespace llmstep {

using nlohmann::json;

ProverOutcome ProverOutcome::progress(TacticState next_state, std::size_t goal_count) {
    if (goal_count < 1) {
        throw InvalidArgument("a progress outcome needs at least one goal");
    }
    if (next_state.empty()) {
        throw InvalidArgument("a progress outcome needs a next state");
    }
    TacticState counted(next_state.text(), goal_count);
    return ProverOutcome(Kind::progress, std::move(counted), goal_count, {});
}

ProverOutcome ProverOutcome::completed() { return ProverOutcome(Kind::completed, std::nullopt, 0, {}); }

ProverOutcome ProverOutcome::error(std::string message) {
    if (trim(message).empty()) {
        throw InvalidArgument("an error outcome needs a message");
    }
    return ProverOutcome(Kind::error, std::nullopt, 0, std::move(message));
}

std::string_view to_string(ProverOutcome::Kind kind) noexcept {
    switch (kind) {
    case ProverOutcome::Kind::progress:
        return "progress";
    case ProverOutcome::Kind::completed:
        return "completed";
    case ProverOutcome::Kind::error:
        return "error";
    }
    return "error";
}

// ---------------------------------------------------------------------------
// SimProverTable

void SimProverTable::add_state(const TacticState &state) {
    if (state.empty()) {
        throw InvalidArgument("simulated prover states must be non-empty");
    }
    states_.try_emplace(state.key(), TacticState(state.text()));
}

void SimProverTable::add_transition(const TacticState &from, std::string_view tactic, ProverOutcome outcome) {
    const std::string state_key = from.key();
    if (!states_.contains(state_key)) {
        throw InvalidArgument("transition from unknown state: " + from.text());
    }
    std::string tactic_key = normalize_whitespace(tactic);
    if (tactic_key.empty()) {
        throw InvalidArgument("transition tactic is empty");
    }
    auto &edges = transitions_[state_key];
    if (!edges.try_emplace(std::move(tactic_key), std::move(outcome)).second) {
        throw InvalidArgument("duplicate transition for tactic '" + std::string(tactic) + "'");
    }
}

void SimProverTable::set_root(const TacticState &root) {
    if (!contains(root)) {
        throw InvalidArgument("root state is not in the table: " + root.text());
    }
    root_ = TacticState(root.text());
}

void SimProverTable::validate() const {
    for (const auto &[state, edges] : transitions_) {
        for (const auto &[tactic, outcome] : edges) {
            if (outcome.is_progress() && !contains(*outcome.next_state())) {
                throw InvalidArgument("progress edge (" + state + ", " + tactic +
                                      ") leads to an unknown state: " + outcome.next_state()->text());
            }
        }
    }
}

bool SimProverTable::contains(const TacticState &state) const { return states_.contains(state.key()); }

const TacticState *SimProverTable::find_state(std::string_view key) const {
    auto it = states_.find(normalize_whitespace(key));
    return it == states_.end() ? nullptr : &it->second;
}

const ProverOutcome *SimProverTable::find(const TacticState &state, std::string_view tactic) const {
    const auto *edges = edges_from(state);
    if (edges == nullptr) {
        return nullptr;
    }
    auto it = edges->find(normalize_whitespace(tactic));
    return it == edges->end() ? nullptr : &it->second;
}

const SimProverTable::EdgeMap *SimProverTable::edges_from(const TacticState &state) const {
    static const EdgeMap kNoEdges;
    const std::string key = state.key();
    if (auto it = transitions_.find(key); it != transitions_.end()) {
        return &it->second;
    }
    return states_.contains(key) ? &kNoEdges : nullptr;
}

std::size_t SimProverTable::edge_count() const noexcept {
    std::size_t count = 0;
    for (const auto &[state, edges] : transitions_) {
        count += edges.size();
    }
    return count;
}

std::string SimProverTable::to_json() const {
    json states = json::array();
    for (const auto &[key, state] : states_) {
        states.push_back(state.text());
    }
    json transitions = json::array();
    for (const auto &[state_key, edges] : transitions_) {
        const std::string &state_text = states_.at(state_key).text();
        for (const auto &[tactic, outcome] : edges) {
            json t{{"state", state_text}, {"tactic", tactic}, {"kind", to_string(outcome.kind())}};
            if (outcome.is_progress()) {
                t["next_state"] = outcome.next_state()->text();
                t["goal_count"] = outcome.goal_count();
            } else if (outcome.is_error()) {
                t["message"] = outcome.message();
            }
            transitions.push_back(std::move(t));
        }
    }
    json doc{{"states", std::move(states)}, {"transitions", std::move(transitions)}};
    if (root_) {
        doc["root"] = root_->text();
    }
    return doc.dump(1) + "\n";
}

namespace {

std::string string_field(const json &obj, const char *field, const std::string &where) {
    auto it = obj.find(field);
    if (it == obj.end() || !it->is_string()) {
        throw DecodeError(where + "." + field, "expected a string");
    }
    return it->get<std::string>();
}

} // namespace

SimProverTable SimProverTable::parse(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text.begin(), json_text.end());
    } catch (const json::parse_error &e) {
        throw DecodeError("$", e.what());
    }
    if (!doc.is_object()) {
        throw DecodeError("$", "expected an object");
    }
    SimProverTable table;
    if (!doc.contains("states") || !doc["states"].is_array()) {
        throw DecodeError("states", "expected an array");
    }
    for (const json &s : doc["states"]) {
        if (!s.is_string()) {
            throw DecodeError("states", "expected strings");
        }
        table.add_state(TacticState(s.get<std::string>()));
    }
    if (!doc.contains("transitions") || !doc["transitions"].is_array()) {
        throw DecodeError("transitions", "expected an array");
    }
    const json &transitions = doc["transitions"];
    for (std::size_t i = 0; i < transitions.size(); ++i) {
        const json &t = transitions[i];
        const std::string where = "transitions[" + std::to_string(i) + "]";
        if (!t.is_object()) {
            throw DecodeError(where, "expected an object");
        }
        const std::string kind = string_field(t, "kind", where);
        std::optional<ProverOutcome> outcome;
        try {
            if (kind == "progress") {
                auto g = t.find("goal_count");
                const std::size_t goals = (g != t.end() && g->is_number_unsigned()) ? g->get<std::size_t>() : 1;
                outcome = ProverOutcome::progress(TacticState(string_field(t, "next_state", where)), goals);
            } else if (kind == "completed") {
                outcome = ProverOutcome::completed();
            } else if (kind == "error") {
                outcome = ProverOutcome::error(string_field(t, "message", where));
            } else {
                throw DecodeError(where + ".kind", "unknown outcome kind '" + kind + "'");
            }
            table.add_transition(TacticState(string_field(t, "state", where)), string_field(t, "tactic", where),
                                 std::move(*outcome));
        } catch (const InvalidArgument &e) {
            throw DecodeError(where, e.what());
        }
    }
    if (auto it = doc.find("root"); it != doc.end()) {
        if (!it->is_string()) {
            throw DecodeError("root", "expected a string");
        }
        try {
            table.set_root(TacticState(it->get<std::string>()));
        } catch (const InvalidArgument &e) {
            throw DecodeError("root", e.what());
        }
    }
    try {
        table.validate();
    } catch (const InvalidArgument &e) {
        throw DecodeError("transitions", e.what());
    }
    return table;
}

SimProverTable SimProverTable::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot open prover table " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void SimProverTable::save(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InvalidArgument("cannot write prover table " + path.string());
    }
    out << to_json();
}

// ---------------------------------------------------------------------------
// SimulatedProver

SimulatedProver::SimulatedProver(std::shared_ptr<const SimProverTable> table) : table_(std::move(table)) {
    if (!table_) {
        throw InvalidArgument("simulated prover needs a table");
    }
}

ProverOutcome SimulatedProver::apply(const TacticState &state, std::string_view tactic) {
    const auto *edges = table_->edges_from(state);
    if (edges == nullptr) {
        throw EnvironmentIntegrityError("state unknown to the simulated prover: " + state.text());
    }
    auto it = edges->find(normalize_whitespace(tactic));
    if (it == edges->end()) {
        return ProverOutcome::error(std::string(kUnknownTacticMessage));
    }
    return it->second;
}

TacticState SimulatedProver::open(std::string_view theorem_id, const TacticState &recorded_root) {
    const TacticState *state = table_->find_state(recorded_root.text());
    if (state == nullptr) {
        throw EnvironmentIntegrityError("root of theorem '" + std::string(theorem_id) + "' is not in the table");
    }
    return *state;
}

ProverOutcome apply_tactic(ProofEnvironment &env, const TacticState &state, std::string_view tactic) {
    return env.apply(state, tactic);
}

std::optional<std::vector<std::string>> brute_force_prove(const SimProverTable &table, const TacticState &root,
                                                          std::size_t depth_limit) {
    if (depth_limit < 1 || !table.contains(root)) {
        return std::nullopt;
    }
    struct Parent {
        std::string state;
        std::string tactic;
    };
    std::unordered_map<std::string, Parent> parents;
    std::unordered_map<std::string, std::size_t> depth;

    auto path_to = [&](std::string key) {
        std::vector<std::string> path;
        while (true) {
            auto it = parents.find(key);
            if (it == parents.end()) {
                break;
            }
            path.push_back(it->second.tactic);
            key = it->second.state;
        }
        return std::vector<std::string>(path.rbegin(), path.rend());
    };

    std::deque<std::string> queue{root.key()};
    depth[root.key()] = 0;
    while (!queue.empty()) {
        const std::string key = queue.front();
        queue.pop_front();
        const std::size_t d = depth.at(key);
        const auto &edges_by_state = table.transitions();
        auto it = edges_by_state.find(key);
        if (it == edges_by_state.end()) {
            continue;
        }
        for (const auto &[tactic, outcome] : it->second) {
            if (outcome.is_completed()) {
                auto proof = path_to(key);
                proof.push_back(tactic);
                return proof;
            }
        }
        if (d + 1 >= depth_limit) {
            continue;
        }
        for (const auto &[tactic, outcome] : it->second) {
            if (!outcome.is_progress()) {
                continue;
            }
            std::string next = outcome.next_state()->key();
            if (depth.contains(next)) {
                continue;
            }
            depth[next] = d + 1;
            parents[next] = Parent{key, tactic};
            queue.push_back(std::move(next));
        }
    }
    return std::nullopt;
}

bool replay_proof(ProofEnvironment &env, const TacticState &root, const std::vector<std::string> &proof) {
    if (proof.empty()) {
        return false;
    }
    TacticState state = root;
    for (std::size_t i = 0; i < proof.size(); ++i) {
        ProverOutcome outcome = env.apply(state, proof[i]);
        const bool last = i + 1 == proof.size();
        if (last) {
            return outcome.is_completed();
        }
        if (!outcome.is_progress()) {
            return false;
        }
        state = *outcome.next_state();
    }
    return false;
}

} // namespace llmstep

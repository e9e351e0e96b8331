#include "llmstep/generation.hpp"

#include "llmstep/errors.hpp"
#include "llmstep/proofenv.hpp"
#include "llmstep/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>

#include <fnmatch.h>

#include <nlohmann/json.hpp>

namespace llmstep {

using nlohmann::json;

std::vector<Candidate> score_normalize(std::vector<Candidate> candidates) {
    std::map<std::string, Candidate> best;
    for (auto &c : candidates) {
        auto key = normalize_whitespace(c.tactic);
        auto [it, inserted] = best.try_emplace(std::move(key), c);
        if (!inserted) {
            Candidate &kept = it->second;
            if (c.score > kept.score || (c.score == kept.score && c.tactic < kept.tactic)) {
                kept = std::move(c);
            }
        }
    }
    std::vector<Candidate> out;
    out.reserve(best.size());
    for (auto &[key, c] : best) {
        out.push_back(std::move(c));
    }
    std::stable_sort(out.begin(), out.end(), [](const Candidate &a, const Candidate &b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.tactic < b.tactic;
    });
    return out;
}

// ---------------------------------------------------------------------------
// MockRuleTable

namespace {

bool is_glob(std::string_view pattern) { return pattern.find_first_of("*?[") != std::string_view::npos; }

std::vector<Candidate> take_prefixed(const std::vector<Candidate> &source, std::string_view prefix, int n) {
    std::vector<Candidate> filtered;
    for (const auto &c : source) {
        if (starts_with(c.tactic, prefix)) {
            filtered.push_back(c);
        }
    }
    filtered = score_normalize(std::move(filtered));
    if (filtered.size() > static_cast<std::size_t>(std::max(n, 0))) {
        filtered.resize(static_cast<std::size_t>(std::max(n, 0)));
    }
    return filtered;
}

} // namespace

bool MockRule::matches(const TacticState &state, std::string_view prefix) const {
    if (!starts_with(prefix, prefix_pattern)) {
        return false;
    }
    if (is_glob(state_pattern)) {
        return fnmatch(state_pattern.c_str(), state.text().c_str(), 0) == 0;
    }
    return normalize_whitespace(state_pattern) == state.key();
}

MockRuleTable::MockRuleTable(std::vector<MockRule> rules) : rules_(std::move(rules)) {
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        for (const auto &out : rules_[i].outputs) {
            if (trim(out.tactic).empty()) {
                throw InvalidArgument("mock rule " + std::to_string(i) + " has an empty tactic");
            }
            if (!starts_with(out.tactic, rules_[i].prefix_pattern)) {
                throw InvalidArgument("mock rule " + std::to_string(i) + ": output '" + out.tactic +
                                      "' does not start with the rule prefix '" + rules_[i].prefix_pattern + "'");
            }
            if (!std::isfinite(out.score)) {
                throw InvalidArgument("mock rule " + std::to_string(i) + " has a non-finite score");
            }
        }
    }
}

MockRuleTable MockRuleTable::parse(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text.begin(), json_text.end());
    } catch (const json::parse_error &e) {
        throw DecodeError("$", e.what());
    }
    if (!doc.is_array()) {
        throw DecodeError("$", "mock rule table must be a JSON array");
    }
    std::vector<MockRule> rules;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json &r = doc[i];
        const std::string where = "[" + std::to_string(i) + "]";
        if (!r.is_object() || !r.contains("state") || !r["state"].is_string()) {
            throw DecodeError(where + ".state", "expected a string");
        }
        MockRule rule;
        rule.state_pattern = r["state"].get<std::string>();
        if (auto it = r.find("prefix"); it != r.end()) {
            if (!it->is_string()) {
                throw DecodeError(where + ".prefix", "expected a string");
            }
            rule.prefix_pattern = it->get<std::string>();
        }
        if (!r.contains("outputs") || !r["outputs"].is_array()) {
            throw DecodeError(where + ".outputs", "expected an array");
        }
        for (const json &o : r["outputs"]) {
            if (!o.is_object() || !o.contains("tactic") || !o["tactic"].is_string()) {
                throw DecodeError(where + ".outputs.tactic", "expected a string");
            }
            if (!o.contains("score") || !o["score"].is_number()) {
                throw DecodeError(where + ".outputs.score", "expected a number");
            }
            rule.outputs.push_back({o["tactic"].get<std::string>(), o["score"].get<double>()});
        }
        rules.push_back(std::move(rule));
    }
    return MockRuleTable(std::move(rules));
}

MockRuleTable MockRuleTable::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot open mock rule table " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

std::string MockRuleTable::to_json() const {
    json doc = json::array();
    for (const auto &rule : rules_) {
        json outputs = json::array();
        for (const auto &o : rule.outputs) {
            outputs.push_back({{"tactic", o.tactic}, {"score", o.score}});
        }
        doc.push_back({{"state", rule.state_pattern}, {"prefix", rule.prefix_pattern}, {"outputs", outputs}});
    }
    return doc.dump(2) + "\n";
}

const MockRule *MockRuleTable::first_match(const TacticState &state, std::string_view prefix) const {
    for (const auto &rule : rules_) {
        if (rule.matches(state, prefix)) {
            return &rule;
        }
    }
    return nullptr;
}

std::vector<Candidate> generate_mock(const MockRuleTable &table, const TacticState &state, std::string_view prefix,
                                     int n) {
    const MockRule *rule = table.first_match(state, prefix);
    if (rule == nullptr) {
        return {};
    }
    return take_prefixed(rule->outputs, prefix, n);
}

MockGenerator::MockGenerator(MockRuleTable table, std::string model_id)
    : table_(std::move(table)), model_id_(std::move(model_id)) {}

std::vector<Candidate> MockGenerator::generate(const TacticState &state, std::string_view prefix, int n) {
    return generate_mock(table_, state, prefix, n);
}

// ---------------------------------------------------------------------------
// EdgeEnumeratingGenerator

EdgeEnumeratingGenerator::EdgeEnumeratingGenerator(std::shared_ptr<const SimProverTable> table, std::string model_id)
    : table_(std::move(table)), model_id_(std::move(model_id)) {
    if (!table_) {
        throw InvalidArgument("edge-enumerating generator needs a table");
    }
}

double EdgeEnumeratingGenerator::edge_score(std::string_view state_key, std::string_view tactic) {
    // FNV-1a over "state \x1f tactic", quantized to eight levels in [-2, -0.25].
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::string_view s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 0x100000001b3ULL;
        }
    };
    mix(state_key);
    mix("\x1f");
    mix(tactic);
    return -0.25 * static_cast<double>(1 + (h >> 32) % 8);
}

std::vector<Candidate> EdgeEnumeratingGenerator::generate(const TacticState &state, std::string_view prefix, int n) {
    const auto *edges = table_->edges_from(state);
    if (edges == nullptr) {
        return {};
    }
    const std::string key = state.key();
    std::vector<Candidate> all;
    all.reserve(edges->size());
    for (const auto &[tactic, outcome] : *edges) {
        all.push_back({tactic, edge_score(key, tactic)});
    }
    return take_prefixed(all, prefix, n);
}

} // namespace llmstep

#include "llmstep/corpus.hpp"

#include "llmstep/errors.hpp"

#include <array>
#include <deque>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace llmstep {

using nlohmann::json;

namespace {

// std::uniform_int_distribution is implementation-defined; corpora must be
// byte-identical across standard libraries, so draws use plain reduction.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::size_t below(std::size_t n) { return n == 0 ? 0 : static_cast<std::size_t>(engine_() % n); }
    bool one_in(std::size_t n) { return below(n) == 0; }

  private:
    std::mt19937_64 engine_;
};

constexpr std::array kProgressTemplates{
    "intro h{}", "apply lemma_{}", "rw [eq_{}]", "cases hyp_{}", "constructor <;> try exact ax_{}",
    "induction x using rec_{}", "simp only [def_{}]", "refine step_{} ?_", "have key_{} := aux_{}",
};

constexpr std::array kClosingTemplates{
    "exact close_{}", "simp [fin_{}]", "linarith [bound_{}]", "norm_num [lem_{}]", "exact trivial_{}.elim",
};

constexpr std::array kDistractorTemplates{
    "exact bogus_{}", "rw [wrong_{}]", "apply unrelated_{}", "simp [nope_{}]", "linarith [junk_{}]",
    "exact absurd_{}",
};

constexpr std::array kErrorMessages{
    "unknown identifier", "type mismatch", "rewrite failed, did not find instance of the pattern",
    "linarith failed to find a contradiction", "simp made no progress", "function expected",
};

std::string fill(std::string_view pattern, const std::string &arg) {
    std::string out;
    std::size_t start = 0;
    while (true) {
        auto pos = pattern.find("{}", start);
        if (pos == std::string_view::npos) {
            out.append(pattern.substr(start));
            return out;
        }
        out.append(pattern.substr(start, pos - start)).append(arg);
        start = pos + 2;
    }
}

struct Node {
    std::string text;
    std::size_t depth;
    std::vector<std::pair<std::string, ProverOutcome>> edges;
    std::set<std::string> used;
};

class TheoremBuilder {
  public:
    TheoremBuilder(Rng &rng, const CorpusParams &params, std::size_t index)
        : rng_(rng), params_(params), index_(index) {}

    CorpusTheorem build(SimProverTable &table) {
        std::vector<std::string> known_proof;
        std::size_t distractor_count = 0;

        const std::size_t spine_len = 1 + rng_.below(params_.max_depth);
        for (std::size_t j = 0; j < spine_len; ++j) {
            spine_.push_back(new_node(j));
        }
        for (std::size_t j = 0; j < spine_len; ++j) {
            const std::size_t id = spine_[j];
            if (j + 1 < spine_len) {
                known_proof.push_back(add_progress(id, spine_[j + 1]));
            } else {
                known_proof.push_back(add_closing(id));
            }
        }

        // Side structure: spine nodes first, then side nodes in creation order.
        std::deque<std::size_t> pending(spine_.begin(), spine_.end());
        while (!pending.empty()) {
            const std::size_t id = pending.front();
            pending.pop_front();
            const bool on_spine = id < spine_len;
            const std::size_t depth = nodes_[id].depth;

            if (!on_spine && depth + 1 <= params_.max_depth && rng_.one_in(5)) {
                add_closing(id);
            }
            const std::size_t existing = on_spine && depth + 1 < spine_len ? 1 : 0;
            const std::size_t extra = rng_.below(params_.branching);
            for (std::size_t e = 0; e < extra && existing + e < params_.branching; ++e) {
                std::optional<std::size_t> merge;
                if (rng_.one_in(4)) {
                    // Only strictly deeper spine nodes keep the graph acyclic.
                    std::vector<std::size_t> deeper;
                    for (std::size_t m = depth + (on_spine ? 2 : 1); m < spine_len; ++m) {
                        deeper.push_back(spine_[m]);
                    }
                    if (!deeper.empty()) {
                        merge = deeper[rng_.below(deeper.size())];
                    }
                }
                if (merge) {
                    add_progress(id, *merge);
                } else if (depth + 1 < params_.max_depth) {
                    const std::size_t child = new_node(depth + 1);
                    add_progress(id, child);
                    pending.push_back(child);
                }
            }
            for (std::size_t k = 0; k < params_.distractors_per_state; ++k) {
                add_distractor(id);
                ++distractor_count;
            }
        }

        for (const auto &node : nodes_) {
            table.add_state(TacticState(node.text));
        }
        for (const auto &node : nodes_) {
            for (const auto &[tactic, outcome] : node.edges) {
                table.add_transition(TacticState(node.text), tactic, outcome);
            }
        }
        return CorpusTheorem{"thm" + pad(index_, 3), TacticState(nodes_[spine_.front()].text), std::move(known_proof),
                             distractor_count};
    }

  private:
    static std::string pad(std::size_t v, std::size_t width) {
        std::string s = std::to_string(v);
        return s.size() >= width ? s : std::string(width - s.size(), '0') + s;
    }

    std::string tag(std::size_t node, std::size_t serial) const {
        return std::to_string(index_) + "_" + std::to_string(node) + "_" + std::to_string(serial);
    }

    std::size_t new_node(std::size_t depth) {
        const std::size_t id = nodes_.size();
        std::ostringstream text;
        text << "case t" << index_ << ".n" << id << "\n";
        text << "x y : ℕ\n";
        for (std::size_t h = 0; h < depth; ++h) {
            text << "h" << h << " : P" << index_ << "_" << h << " x y\n";
        }
        text << "⊢ G" << index_ << "_" << id << " x y";
        nodes_.push_back(Node{text.str(), depth, {}, {}});
        return id;
    }

    template <std::size_t N>
    std::string fresh_tactic(std::size_t node, const std::array<const char *, N> &templates) {
        auto &used = nodes_[node].used;
        while (true) {
            std::string t = fill(templates[rng_.below(N)], tag(node, serial_++));
            if (used.insert(t).second) {
                return t;
            }
        }
    }

    std::string add_progress(std::size_t from, std::size_t to) {
        std::string tactic = fresh_tactic(from, kProgressTemplates);
        const std::size_t goals = 1 + rng_.below(2);
        nodes_[from].edges.emplace_back(tactic, ProverOutcome::progress(TacticState(nodes_[to].text), goals));
        return tactic;
    }

    std::string add_closing(std::size_t from) {
        std::string tactic = fresh_tactic(from, kClosingTemplates);
        nodes_[from].edges.emplace_back(tactic, ProverOutcome::completed());
        return tactic;
    }

    void add_distractor(std::size_t from) {
        std::string tactic = fresh_tactic(from, kDistractorTemplates);
        std::string message = kErrorMessages[rng_.below(kErrorMessages.size())];
        nodes_[from].edges.emplace_back(std::move(tactic), ProverOutcome::error(std::move(message)));
    }

    Rng &rng_;
    const CorpusParams &params_;
    std::size_t index_;
    std::size_t serial_ = 0;
    std::vector<Node> nodes_;
    std::vector<std::size_t> spine_;
};

} // namespace

Corpus generate_corpus(const CorpusParams &params) {
    if (params.max_depth < 1) {
        throw InvalidArgument("generate_corpus: max_depth must be >= 1");
    }
    if (params.count < 1) {
        throw InvalidArgument("generate_corpus: count must be >= 1");
    }
    if (params.branching < 1) {
        throw InvalidArgument("generate_corpus: branching must be >= 1");
    }
    Corpus corpus;
    corpus.id = "synthetic-s" + std::to_string(params.seed) + "-n" + std::to_string(params.count) + "-d" +
                std::to_string(params.max_depth) + "-b" + std::to_string(params.branching) + "-x" +
                std::to_string(params.distractors_per_state);
    Rng rng(params.seed);
    for (std::size_t i = 0; i < params.count; ++i) {
        TheoremBuilder builder(rng, params, i);
        corpus.theorems.push_back(builder.build(corpus.table));
    }
    corpus.table.set_root(corpus.theorems.front().root);
    corpus.table.validate();
    return corpus;
}

// ---------------------------------------------------------------------------
// Corpus file: {schema_version, corpus_id, table, theorems:[{id, root, known_proof, distractor_count}]}

std::string Corpus::to_json() const {
    json theorems_json = json::array();
    for (const auto &t : theorems) {
        theorems_json.push_back({{"id", t.id},
                                 {"root", t.root.text()},
                                 {"known_proof", t.known_proof},
                                 {"distractor_count", t.distractor_count}});
    }
    json doc{{"schema_version", 1},
             {"corpus_id", id},
             {"table", json::parse(table.to_json())},
             {"theorems", std::move(theorems_json)}};
    return doc.dump(1) + "\n";
}

Corpus Corpus::parse(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text.begin(), json_text.end());
    } catch (const json::parse_error &e) {
        throw DecodeError("$", e.what());
    }
    if (!doc.is_object()) {
        throw DecodeError("$", "expected an object");
    }
    if (doc.value("schema_version", 0) != 1) {
        throw DecodeError("schema_version", "unsupported corpus schema");
    }
    Corpus corpus;
    if (!doc.contains("corpus_id") || !doc["corpus_id"].is_string()) {
        throw DecodeError("corpus_id", "expected a string");
    }
    corpus.id = doc["corpus_id"].get<std::string>();
    if (!doc.contains("table")) {
        throw DecodeError("table", "missing required field");
    }
    corpus.table = SimProverTable::parse(doc["table"].dump());
    if (!doc.contains("theorems") || !doc["theorems"].is_array()) {
        throw DecodeError("theorems", "expected an array");
    }
    const json &list = doc["theorems"];
    for (std::size_t i = 0; i < list.size(); ++i) {
        const json &t = list[i];
        const std::string where = "theorems[" + std::to_string(i) + "]";
        try {
            CorpusTheorem thm{t.at("id").get<std::string>(), TacticState(t.at("root").get<std::string>()),
                              t.value("known_proof", std::vector<std::string>{}),
                              t.value("distractor_count", std::size_t{0})};
            if (!corpus.table.contains(thm.root)) {
                throw DecodeError(where + ".root", "state is not in the table");
            }
            corpus.theorems.push_back(std::move(thm));
        } catch (const json::exception &e) {
            throw DecodeError(where, e.what());
        }
    }
    return corpus;
}

Corpus Corpus::load(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot open corpus " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void Corpus::save(const std::filesystem::path &path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InvalidArgument("cannot write corpus " + path.string());
    }
    out << to_json();
}

} // namespace llmstep

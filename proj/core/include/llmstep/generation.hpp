#pragma once

#include "llmstep/protocol.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace llmstep {

class SimProverTable;

/// A scored tactic produced by a generator.
struct Candidate {
    std::string tactic;
    double score = 0.0;

    friend bool operator==(const Candidate &, const Candidate &) = default;
};

/// Merges whitespace-equivalent duplicates (keeping the max score) and sorts
/// by score descending with the tactic text as a total tie-break.
[[nodiscard]] std::vector<Candidate> score_normalize(std::vector<Candidate> candidates);

/// Produces scored tactic candidates for a (state, prefix) pair.
///
/// Implementations return at most `n` candidates, each starting with `prefix`,
/// sorted by score descending. They must be callable from several threads.
class Generator {
  public:
    virtual ~Generator() = default;

    [[nodiscard]] virtual std::vector<Candidate> generate(const TacticState &state, std::string_view prefix,
                                                          int n) = 0;

    [[nodiscard]] virtual std::string model_id() const = 0;
    [[nodiscard]] virtual std::string backend_kind() const = 0;

    /// Cheap readiness probe used by health reporting.
    [[nodiscard]] virtual bool ready() { return true; }
};

// ---------------------------------------------------------------------------
// Deterministic rule-table backend

struct MockRule {
    /// Exact state text, or a glob when it contains `*`, `?` or `[`.
    std::string state_pattern;
    /// The rule applies when the request prefix starts with this string.
    std::string prefix_pattern;
    std::vector<Candidate> outputs;

    [[nodiscard]] bool matches(const TacticState &state, std::string_view prefix) const;
};

class MockRuleTable {
  public:
    MockRuleTable() = default;
    explicit MockRuleTable(std::vector<MockRule> rules);

    /// Loads a JSON array of {state, prefix, outputs:[{tactic, score}]}.
    static MockRuleTable load(const std::filesystem::path &path);
    static MockRuleTable parse(std::string_view json_text);
    [[nodiscard]] std::string to_json() const;

    [[nodiscard]] const std::vector<MockRule> &rules() const noexcept { return rules_; }
    [[nodiscard]] const MockRule *first_match(const TacticState &state, std::string_view prefix) const;

  private:
    std::vector<MockRule> rules_;
};

/// Outputs of the first matching rule, filtered by prefix and truncated to n.
[[nodiscard]] std::vector<Candidate> generate_mock(const MockRuleTable &table, const TacticState &state,
                                                   std::string_view prefix, int n);

class MockGenerator final : public Generator {
  public:
    explicit MockGenerator(MockRuleTable table, std::string model_id = "mock");

    std::vector<Candidate> generate(const TacticState &state, std::string_view prefix, int n) override;
    std::string model_id() const override { return model_id_; }
    std::string backend_kind() const override { return "mock"; }

  private:
    MockRuleTable table_;
    std::string model_id_;
};

/// Emits every outgoing edge of a simulated prover table (progress, completing
/// and error edges alike) with a deterministic pseudo-score derived from the
/// edge text. Scores are quantized so equal-priority ties occur in search.
class EdgeEnumeratingGenerator final : public Generator {
  public:
    explicit EdgeEnumeratingGenerator(std::shared_ptr<const SimProverTable> table,
                                      std::string model_id = "edge-enumerator");

    std::vector<Candidate> generate(const TacticState &state, std::string_view prefix, int n) override;
    std::string model_id() const override { return model_id_; }
    std::string backend_kind() const override { return "edges"; }

    [[nodiscard]] static double edge_score(std::string_view state_key, std::string_view tactic);

  private:
    std::shared_ptr<const SimProverTable> table_;
    std::string model_id_;
};

// ---------------------------------------------------------------------------
// Remote completion-API backend

enum class DecodeMode { beam, sample };

struct RemoteBackendConfig {
    std::string endpoint_url;
    std::string model_id = "remote";
    DecodeMode decode_mode = DecodeMode::beam;
    int beam_width_or_samples = 32;
    double temperature = 0.0;
    int max_new_tokens = 64;
    double request_timeout_s = 30.0;
    int retries = 2;
    double initial_backoff_s = 0.1;
    /// Upper bound on concurrent upstream requests.
    int max_in_flight = 4;

    void validate() const;
};

class RemoteGenerator final : public Generator {
  public:
    explicit RemoteGenerator(RemoteBackendConfig config);
    ~RemoteGenerator() override;

    RemoteGenerator(const RemoteGenerator &) = delete;
    RemoteGenerator &operator=(const RemoteGenerator &) = delete;

    std::vector<Candidate> generate(const TacticState &state, std::string_view prefix, int n) override;
    std::string model_id() const override { return config_.model_id; }
    std::string backend_kind() const override { return "remote"; }
    bool ready() override;

    [[nodiscard]] const RemoteBackendConfig &config() const noexcept { return config_; }

  private:
    struct Impl;

    RemoteBackendConfig config_;
    std::unique_ptr<Impl> impl_;
};

/// Free-function form of the remote call; constructs a one-shot client.
[[nodiscard]] std::vector<Candidate> generate_remote(const RemoteBackendConfig &config, const TacticState &state,
                                                     std::string_view prefix, int n);

} // namespace llmstep

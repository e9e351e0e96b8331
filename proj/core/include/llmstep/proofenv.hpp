#pragma once

#include "llmstep/protocol.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace llmstep {

/// Result of applying one tactic to one state.
///
/// Exactly one of: progress (next state with at least one goal), completed
/// (no goals left), error (non-empty message, no next state).
class ProverOutcome {
  public:
    enum class Kind { progress, completed, error };

    static ProverOutcome progress(TacticState next_state, std::size_t goal_count);
    static ProverOutcome completed();
    static ProverOutcome error(std::string message);

    [[nodiscard]] Kind kind() const noexcept { return kind_; }
    [[nodiscard]] bool is_progress() const noexcept { return kind_ == Kind::progress; }
    [[nodiscard]] bool is_completed() const noexcept { return kind_ == Kind::completed; }
    [[nodiscard]] bool is_error() const noexcept { return kind_ == Kind::error; }

    [[nodiscard]] const std::optional<TacticState> &next_state() const noexcept { return next_state_; }
    [[nodiscard]] std::size_t goal_count() const noexcept { return goal_count_; }
    [[nodiscard]] const std::string &message() const noexcept { return message_; }

    friend bool operator==(const ProverOutcome &, const ProverOutcome &) = default;

  private:
    ProverOutcome(Kind kind, std::optional<TacticState> next, std::size_t goals, std::string message)
        : kind_(kind), next_state_(std::move(next)), goal_count_(goals), message_(std::move(message)) {}

    Kind kind_;
    std::optional<TacticState> next_state_;
    std::size_t goal_count_;
    std::string message_;
};

[[nodiscard]] std::string_view to_string(ProverOutcome::Kind kind) noexcept;

/// Something that can apply tactics to proof states.
class ProofEnvironment {
  public:
    virtual ~ProofEnvironment() = default;

    /// Throws EnvironmentIntegrityError for a state the environment does not
    /// know and EnvironmentUnavailable when the backing prover is gone.
    [[nodiscard]] virtual ProverOutcome apply(const TacticState &state, std::string_view tactic) = 0;

    /// Resolves the root state of a theorem. Table-backed environments just
    /// validate `recorded_root`; process-backed ones ask the prover.
    [[nodiscard]] virtual TacticState open(std::string_view theorem_id, const TacticState &recorded_root) = 0;

    /// True when `apply` may be called from several threads at once.
    [[nodiscard]] virtual bool concurrent_safe() const noexcept { return false; }
};

/// Deterministic transition table standing in for a proof assistant.
/// States and tactics are keyed by whitespace-normalized text.
class SimProverTable {
  public:
    using EdgeMap = std::map<std::string, ProverOutcome>;

    void add_state(const TacticState &state);
    /// Throws InvalidArgument on an unknown source state or a duplicate edge.
    void add_transition(const TacticState &from, std::string_view tactic, ProverOutcome outcome);
    void set_root(const TacticState &root);

    /// Checks that every state referenced by a progress edge exists.
    void validate() const;

    [[nodiscard]] bool contains(const TacticState &state) const;
    [[nodiscard]] const TacticState *find_state(std::string_view key) const;
    [[nodiscard]] const ProverOutcome *find(const TacticState &state, std::string_view tactic) const;
    /// Outgoing edges keyed by normalized tactic; nullptr for unknown states.
    [[nodiscard]] const EdgeMap *edges_from(const TacticState &state) const;

    [[nodiscard]] const std::optional<TacticState> &root() const noexcept { return root_; }
    [[nodiscard]] const std::map<std::string, TacticState> &states() const noexcept { return states_; }
    [[nodiscard]] const std::map<std::string, EdgeMap> &transitions() const noexcept { return transitions_; }
    [[nodiscard]] std::size_t edge_count() const noexcept;

    /// {states:[...], root:"...", transitions:[{state, tactic, kind, next_state?, goal_count?, message?}]}
    [[nodiscard]] std::string to_json() const;
    static SimProverTable parse(std::string_view json_text);
    static SimProverTable load(const std::filesystem::path &path);
    void save(const std::filesystem::path &path) const;

    friend bool operator==(const SimProverTable &, const SimProverTable &) = default;

  private:
    std::map<std::string, TacticState> states_;
    std::map<std::string, EdgeMap> transitions_;
    std::optional<TacticState> root_;
};

inline constexpr std::string_view kUnknownTacticMessage = "unknown tactic";

/// Proof environment backed by a shared, immutable SimProverTable.
class SimulatedProver final : public ProofEnvironment {
  public:
    explicit SimulatedProver(std::shared_ptr<const SimProverTable> table);

    ProverOutcome apply(const TacticState &state, std::string_view tactic) override;
    TacticState open(std::string_view theorem_id, const TacticState &recorded_root) override;
    bool concurrent_safe() const noexcept override { return true; }

    [[nodiscard]] const SimProverTable &table() const noexcept { return *table_; }

  private:
    std::shared_ptr<const SimProverTable> table_;
};

[[nodiscard]] ProverOutcome apply_tactic(ProofEnvironment &env, const TacticState &state, std::string_view tactic);

/// Shortest proof within `depth_limit` steps by breadth-first enumeration of
/// every table edge, or nullopt.
[[nodiscard]] std::optional<std::vector<std::string>> brute_force_prove(const SimProverTable &table,
                                                                        const TacticState &root,
                                                                        std::size_t depth_limit);

/// Replays a proof; true iff every step but the last makes progress and the
/// last one completes.
[[nodiscard]] bool replay_proof(ProofEnvironment &env, const TacticState &root,
                                const std::vector<std::string> &proof);

} // namespace llmstep

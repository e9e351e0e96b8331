#pragma once

#include "llmstep/proofenv.hpp"

#include <chrono>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace llmstep {

/// Drives an external proof assistant over a JSON-lines stdio protocol.
///
/// Requests:  {"op":"init","theorem":ID} and {"op":"apply","state_id":TOK,"tactic":T}
/// Responses: {"kind":"progress"|"completed"|"error", "state_id"?, "next_state"?,
///             "goal_count"?, "message"?}
///
/// One request is in flight at a time; a handle is not thread-safe.
class ExternalAdapter {
  public:
    struct Reply {
        ProverOutcome outcome;
        /// Token for `outcome.next_state()` (or the root, for init).
        std::optional<std::string> state_id;
    };

    static constexpr std::chrono::milliseconds kDefaultTacticTimeout{10'000};

    explicit ExternalAdapter(std::vector<std::string> argv,
                             std::chrono::milliseconds tactic_timeout = kDefaultTacticTimeout);
    ~ExternalAdapter();

    ExternalAdapter(const ExternalAdapter &) = delete;
    ExternalAdapter &operator=(const ExternalAdapter &) = delete;

    /// Handshake for a theorem; the reply carries the root state token.
    Reply init(std::string_view theorem);
    Reply apply(std::string_view state_id, std::string_view tactic);

    [[nodiscard]] bool alive() const noexcept;

  private:
    Reply round_trip(const std::string &line);
    std::optional<std::string> read_line(std::chrono::steady_clock::time_point deadline);
    void terminate() noexcept;

    std::vector<std::string> argv_;
    std::chrono::milliseconds tactic_timeout_;
    int pid_ = -1;
    int fd_ = -1;
    bool dead_ = false;
    std::string buffer_;
    // Replies still owed for requests that timed out; skipped on later reads.
    int stale_replies_ = 0;
};

/// Applies a tactic to an adapter-issued state token.
[[nodiscard]] ProverOutcome external_adapter_apply(ExternalAdapter &adapter, std::string_view state_id,
                                                   std::string_view tactic);

/// ProofEnvironment over an ExternalAdapter. Maps state text to adapter tokens.
class AdapterEnvironment final : public ProofEnvironment {
  public:
    explicit AdapterEnvironment(std::vector<std::string> argv,
                                std::chrono::milliseconds tactic_timeout = ExternalAdapter::kDefaultTacticTimeout);

    ProverOutcome apply(const TacticState &state, std::string_view tactic) override;
    TacticState open(std::string_view theorem_id, const TacticState &recorded_root) override;

  private:
    std::mutex mutex_;
    ExternalAdapter adapter_;
    std::map<std::string, std::string> tokens_;
};

/// Answers adapter-protocol requests from a SimProverTable. Tokens are issued
/// per distinct state and stay valid for the lifetime of the object.
class AdapterProtocolServer {
  public:
    AdapterProtocolServer(const SimProverTable &table, std::map<std::string, TacticState> roots);

    /// One request line in, one response line out (no trailing newline).
    [[nodiscard]] std::string handle(std::string_view request_line);

  private:
    std::string token_for(const TacticState &state);

    const SimProverTable &table_;
    std::map<std::string, TacticState> roots_;
    std::map<std::string, std::string> token_by_key_;
    std::map<std::string, TacticState> state_by_token_;
};

/// Serves a SimProverTable over the adapter protocol until EOF on `in`.
/// Theorem ids resolve through `roots`; with no roots every id opens the
/// table root.
void serve_adapter_protocol(const SimProverTable &table, const std::map<std::string, TacticState> &roots,
                            std::istream &in, std::ostream &out);

} // namespace llmstep

#pragma once

#include "llmstep/corpus.hpp"
#include "llmstep/generation.hpp"
#include "llmstep/proofenv.hpp"
#include "llmstep/search.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace llmstep {

inline constexpr int kReportSchemaVersion = 1;

/// "27.9% (68/244)". The percentage is rounded half-up to one decimal.
[[nodiscard]] std::string format_pass_rate(std::size_t solved, std::size_t total);
/// round(1000 * solved / total) / 10, half-up, in exact integer arithmetic.
[[nodiscard]] std::string format_percent(std::size_t solved, std::size_t total);

enum class TheoremOutcome { proved, exhausted, timeout, infra_failure };

[[nodiscard]] std::string_view to_string(TheoremOutcome outcome) noexcept;
[[nodiscard]] TheoremOutcome theorem_outcome_from_string(std::string_view name);

struct TheoremRecord {
    std::string id;
    TheoremOutcome outcome = TheoremOutcome::exhausted;
    std::size_t proof_length = 0;
    double wall_time_s = 0.0;
    std::uint64_t tactics_generated = 0;
    int attempt_index = 0;
    std::vector<std::string> proof;
    std::string error;
};

struct EvalReport {
    std::string corpus_id;
    std::string model_id;
    SearchBudget budget;
    std::vector<TheoremRecord> per_theorem;
    std::size_t solved = 0;
    std::size_t total = 0;
    std::size_t infra_failures = 0;

    /// solved / total, unrounded.
    [[nodiscard]] double pass_rate() const noexcept;

    [[nodiscard]] std::string to_json(bool include_timing = true) const;
    static EvalReport parse(std::string_view json_text);
};

struct LatencyReport {
    std::string backend_id;
    int n = 1;
    int repeats = 1;
    std::vector<double> per_example_s;
    std::size_t missing_samples = 0;
    double mean_s = 0.0;
    double p50_s = 0.0;
    double p90_s = 0.0;

    [[nodiscard]] std::string to_json() const;
    static LatencyReport parse(std::string_view json_text);
};

/// Fills mean/p50/p90 from per_example_s (nearest-rank percentiles).
void summarize(LatencyReport &report);

/// Opens per-worker proof environments and generators. Environments that are
/// not concurrent-safe get one instance per worker.
struct EvalBackends {
    std::function<std::shared_ptr<ProofEnvironment>()> make_environment;
    std::function<std::shared_ptr<Generator>()> make_generator;
};

struct EvalOptions {
    SearchBudget budget;
    int workers = 1;
};

/// Runs the attempts for every theorem. Per-theorem records keep corpus order
/// regardless of worker scheduling. Infrastructure failures count in total
/// but never as solved.
[[nodiscard]] EvalReport run_eval(const Corpus &corpus, const EvalBackends &backends, const EvalOptions &options);

struct LatencyExample {
    std::string tactic_state;
    std::string prefix;
};

[[nodiscard]] std::vector<LatencyExample> load_latency_examples(const std::filesystem::path &path);

struct BenchOptions {
    int n = 1;
    int repeats = 3;
    int warmup_rounds = 1;
    double request_timeout_s = 10.0;
};

/// Times sequential /suggest round trips. Each example contributes the median
/// of its repeats. Throws BackendUnavailable if the server cannot be reached.
[[nodiscard]] LatencyReport run_latency_bench(const std::string &endpoint, const std::vector<LatencyExample> &examples,
                                              const BenchOptions &options);

struct RenderedReports {
    std::string table;
    std::string csv;
};

/// Renders eval and latency report files. Column order is fixed and the
/// output is a pure function of the inputs.
[[nodiscard]] RenderedReports render_reports(const std::vector<std::filesystem::path> &paths);
[[nodiscard]] RenderedReports render_report_texts(const std::vector<std::string> &json_texts);

[[nodiscard]] std::string read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, std::string_view contents);

} // namespace llmstep

#include "llmstep/harness.hpp"

#include "llmstep/errors.hpp"
#include "llmstep/protocol.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace llmstep {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string format_percent(std::size_t solved, std::size_t total) {
    if (total == 0) {
        throw InvalidArgument("pass rate needs a non-empty total");
    }
    if (solved > total) {
        throw InvalidArgument("solved exceeds total");
    }
    if (total > (std::uint64_t{1} << 50)) {
        throw InvalidArgument("pass rate total is too large");
    }
    // Tenths of a percent, rounded half-up: floor((1000 s / t) + 1/2).
    const std::uint64_t numerator = std::uint64_t{2000} * solved + total;
    const std::uint64_t tenths = numerator / (std::uint64_t{2} * total);
    return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

std::string format_pass_rate(std::size_t solved, std::size_t total) {
    return format_percent(solved, total) + "% (" + std::to_string(solved) + "/" + std::to_string(total) + ")";
}

std::string_view to_string(TheoremOutcome outcome) noexcept {
    switch (outcome) {
    case TheoremOutcome::proved:
        return "proved";
    case TheoremOutcome::exhausted:
        return "exhausted";
    case TheoremOutcome::timeout:
        return "timeout";
    case TheoremOutcome::infra_failure:
        return "infra_failure";
    }
    return "infra_failure";
}

TheoremOutcome theorem_outcome_from_string(std::string_view name) {
    if (name == "proved") return TheoremOutcome::proved;
    if (name == "exhausted") return TheoremOutcome::exhausted;
    if (name == "timeout") return TheoremOutcome::timeout;
    if (name == "infra_failure") return TheoremOutcome::infra_failure;
    throw DecodeError("outcome", "unknown theorem outcome '" + std::string(name) + "'");
}

double EvalReport::pass_rate() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(solved) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Report JSON

namespace {

json parse_report(std::string_view text, std::string_view expected_kind) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error &e) {
        throw DecodeError("$", e.what());
    }
    if (!doc.is_object()) {
        throw DecodeError("$", "expected an object");
    }
    const auto version = doc.find("schema_version");
    if (version == doc.end() || !version->is_number_integer()) {
        throw SchemaMismatch("report has no schema_version");
    }
    if (version->get<int>() != kReportSchemaVersion) {
        throw SchemaMismatch("report schema_version " + std::to_string(version->get<int>()) + " is not supported (expected " +
                             std::to_string(kReportSchemaVersion) + ")");
    }
    if (doc.value("kind", std::string{}) != expected_kind) {
        throw DecodeError("kind", "expected a " + std::string(expected_kind) + " report");
    }
    return doc;
}

template <typename T>
T field(const json &doc, const char *name) {
    try {
        return doc.at(name).get<T>();
    } catch (const json::exception &e) {
        throw DecodeError(name, e.what());
    }
}

json budget_json(const SearchBudget &b) {
    json j{{"attempts", b.attempts},
           {"expansion_size", b.expansion_size},
           {"max_iterations", b.max_iterations},
           {"timeout_s", b.timeout_s}};
    j["max_depth"] = b.max_depth ? json(*b.max_depth) : json(nullptr);
    return j;
}

SearchBudget budget_from_json(const json &j) {
    SearchBudget b;
    b.attempts = field<int>(j, "attempts");
    b.expansion_size = field<int>(j, "expansion_size");
    b.max_iterations = field<int>(j, "max_iterations");
    b.timeout_s = field<double>(j, "timeout_s");
    if (auto it = j.find("max_depth"); it != j.end() && !it->is_null()) {
        b.max_depth = it->get<std::size_t>();
    } else {
        b.max_depth.reset();
    }
    return b;
}

} // namespace

std::string EvalReport::to_json(bool include_timing) const {
    json rows = json::array();
    for (const auto &r : per_theorem) {
        json row{{"id", r.id},
                 {"outcome", to_string(r.outcome)},
                 {"proof_length", r.proof_length},
                 {"tactics_generated", r.tactics_generated},
                 {"attempt_index", r.attempt_index},
                 {"proof", r.proof}};
        row["wall_time_s"] = include_timing ? r.wall_time_s : 0.0;
        if (!r.error.empty()) {
            row["error"] = r.error;
        }
        rows.push_back(std::move(row));
    }
    json doc{{"schema_version", kReportSchemaVersion},
             {"kind", "eval"},
             {"corpus_id", corpus_id},
             {"model_id", model_id},
             {"budget", budget_json(budget)},
             {"per_theorem", std::move(rows)},
             {"solved", solved},
             {"total", total},
             {"infra_failures", infra_failures},
             {"pass_rate", pass_rate()}};
    return doc.dump(2) + "\n";
}

EvalReport EvalReport::parse(std::string_view json_text) {
    const json doc = parse_report(json_text, "eval");
    EvalReport report;
    report.corpus_id = field<std::string>(doc, "corpus_id");
    report.model_id = field<std::string>(doc, "model_id");
    report.budget = budget_from_json(field<json>(doc, "budget"));
    report.solved = field<std::size_t>(doc, "solved");
    report.total = field<std::size_t>(doc, "total");
    report.infra_failures = doc.value("infra_failures", std::size_t{0});
    const json rows = field<json>(doc, "per_theorem");
    if (!rows.is_array() || rows.empty()) {
        throw DecodeError("per_theorem", "an eval report needs at least one theorem");
    }
    for (const json &row : rows) {
        TheoremRecord r;
        r.id = field<std::string>(row, "id");
        r.outcome = theorem_outcome_from_string(field<std::string>(row, "outcome"));
        r.proof_length = field<std::size_t>(row, "proof_length");
        r.wall_time_s = row.value("wall_time_s", 0.0);
        r.tactics_generated = field<std::uint64_t>(row, "tactics_generated");
        r.attempt_index = row.value("attempt_index", 0);
        r.proof = row.value("proof", std::vector<std::string>{});
        r.error = row.value("error", std::string{});
        report.per_theorem.push_back(std::move(r));
    }
    if (report.total == 0 || report.solved > report.total) {
        throw DecodeError("solved", "inconsistent solved/total counts");
    }
    return report;
}

std::string LatencyReport::to_json() const {
    json doc{{"schema_version", kReportSchemaVersion},
             {"kind", "latency"},
             {"backend_id", backend_id},
             {"n", n},
             {"repeats", repeats},
             {"per_example_s", per_example_s},
             {"missing_samples", missing_samples},
             {"mean_s", mean_s},
             {"p50_s", p50_s},
             {"p90_s", p90_s}};
    return doc.dump(2) + "\n";
}

LatencyReport LatencyReport::parse(std::string_view json_text) {
    const json doc = parse_report(json_text, "latency");
    LatencyReport r;
    r.backend_id = field<std::string>(doc, "backend_id");
    r.n = field<int>(doc, "n");
    r.repeats = doc.value("repeats", 1);
    r.per_example_s = field<std::vector<double>>(doc, "per_example_s");
    r.missing_samples = doc.value("missing_samples", std::size_t{0});
    r.mean_s = field<double>(doc, "mean_s");
    r.p50_s = field<double>(doc, "p50_s");
    r.p90_s = field<double>(doc, "p90_s");
    return r;
}

void summarize(LatencyReport &report) {
    if (report.per_example_s.empty()) {
        report.mean_s = report.p50_s = report.p90_s = 0.0;
        return;
    }
    std::vector<double> sorted = report.per_example_s;
    std::sort(sorted.begin(), sorted.end());
    auto nearest_rank = [&](double p) {
        const auto rank = static_cast<std::size_t>(std::ceil(p * static_cast<double>(sorted.size())));
        return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
    };
    report.mean_s = std::accumulate(sorted.begin(), sorted.end(), 0.0) / static_cast<double>(sorted.size());
    // Summation order can push the mean a hair outside [min, max] for equal samples.
    report.mean_s = std::clamp(report.mean_s, sorted.front(), sorted.back());
    report.p50_s = nearest_rank(0.5);
    report.p90_s = nearest_rank(0.9);
}

// ---------------------------------------------------------------------------
// Evaluation

EvalReport run_eval(const Corpus &corpus, const EvalBackends &backends, const EvalOptions &options) {
    options.budget.validate();
    if (options.workers < 1) {
        throw InvalidArgument("eval: workers must be >= 1");
    }
    if (corpus.theorems.empty()) {
        throw InvalidArgument("eval: corpus has no theorems");
    }
    if (!backends.make_environment || !backends.make_generator) {
        throw InvalidArgument("eval: backends are not configured");
    }

    std::vector<TheoremRecord> records(corpus.theorems.size());
    std::atomic<std::size_t> next{0};
    std::string model_id;
    std::mutex model_mutex;
    std::exception_ptr fatal;
    std::mutex fatal_mutex;

    auto worker = [&] {
        try {
            std::shared_ptr<ProofEnvironment> env = backends.make_environment();
            std::shared_ptr<Generator> generator = backends.make_generator();
            {
                std::lock_guard lock(model_mutex);
                if (model_id.empty()) {
                    model_id = generator->model_id();
                }
            }
            for (std::size_t i = next++; i < corpus.theorems.size(); i = next++) {
                const CorpusTheorem &thm = corpus.theorems[i];
                TheoremRecord &rec = records[i];
                rec.id = thm.id;
                const auto start = Clock::now();
                try {
                    const TacticState root = env->open(thm.id, thm.root);
                    SearchResult r = run_attempts(*env, *generator, root, options.budget);
                    rec.tactics_generated = r.stats.tactics_generated;
                    rec.attempt_index = r.stats.attempt_index;
                    switch (r.outcome) {
                    case SearchOutcome::proved:
                        if (replay_proof(*env, root, r.proof)) {
                            rec.outcome = TheoremOutcome::proved;
                            rec.proof_length = r.proof.size();
                            rec.proof = std::move(r.proof);
                        } else {
                            rec.outcome = TheoremOutcome::infra_failure;
                            rec.error = "search returned a proof that does not replay";
                        }
                        break;
                    case SearchOutcome::exhausted:
                        rec.outcome = TheoremOutcome::exhausted;
                        break;
                    case SearchOutcome::timeout:
                        rec.outcome = TheoremOutcome::timeout;
                        break;
                    }
                } catch (const EnvironmentUnavailable &e) {
                    rec.outcome = TheoremOutcome::infra_failure;
                    rec.error = e.what();
                    env = backends.make_environment();
                } catch (const EnvironmentIntegrityError &e) {
                    rec.outcome = TheoremOutcome::infra_failure;
                    rec.error = e.what();
                } catch (const BackendUnavailable &e) {
                    rec.outcome = TheoremOutcome::infra_failure;
                    rec.error = e.what();
                } catch (const BackendProtocolError &e) {
                    rec.outcome = TheoremOutcome::infra_failure;
                    rec.error = e.what();
                } catch (const DeadlineExceeded &e) {
                    rec.outcome = TheoremOutcome::infra_failure;
                    rec.error = e.what();
                }
                rec.wall_time_s = std::chrono::duration<double>(Clock::now() - start).count();
            }
        } catch (...) {
            std::lock_guard lock(fatal_mutex);
            if (!fatal) {
                fatal = std::current_exception();
            }
            next = corpus.theorems.size();
        }
    };

    const auto worker_count = std::min<std::size_t>(static_cast<std::size_t>(options.workers), corpus.theorems.size());
    if (worker_count == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < worker_count; ++w) {
            threads.emplace_back(worker);
        }
        for (auto &t : threads) {
            t.join();
        }
    }
    if (fatal) {
        std::rethrow_exception(fatal);
    }

    EvalReport report;
    report.corpus_id = corpus.id;
    report.model_id = model_id;
    report.budget = options.budget;
    report.total = records.size();
    for (const auto &r : records) {
        report.solved += r.outcome == TheoremOutcome::proved ? 1 : 0;
        report.infra_failures += r.outcome == TheoremOutcome::infra_failure ? 1 : 0;
    }
    report.per_theorem = std::move(records);
    return report;
}

// ---------------------------------------------------------------------------
// Latency benchmark

std::vector<LatencyExample> load_latency_examples(const std::filesystem::path &path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::parse_error &e) {
        throw DecodeError("$", e.what());
    }
    if (!doc.is_array()) {
        throw DecodeError("$", "latency examples must be a JSON array");
    }
    std::vector<LatencyExample> examples;
    for (const json &e : doc) {
        examples.push_back({field<std::string>(e, "tactic_state"), e.value("prefix", std::string{})});
    }
    if (examples.empty()) {
        throw DecodeError("$", "latency examples file is empty");
    }
    return examples;
}

LatencyReport run_latency_bench(const std::string &endpoint, const std::vector<LatencyExample> &examples,
                                const BenchOptions &options) {
    if (examples.empty()) {
        throw InvalidArgument("latency bench needs at least one example");
    }
    if (options.n < 1 || options.repeats < 1 || options.warmup_rounds < 0) {
        throw InvalidArgument("latency bench: n and repeats must be >= 1");
    }
    httplib::Client client(endpoint);
    const auto timeout = std::chrono::microseconds(static_cast<std::int64_t>(options.request_timeout_s * 1e6));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    std::vector<std::string> bodies;
    for (const auto &e : examples) {
        bodies.push_back(serialize(SuggestRequest(TacticState(e.tactic_state), e.prefix, options.n)));
    }

    LatencyReport report;
    report.n = options.n;
    report.repeats = options.repeats;

    // Returns elapsed seconds or nullopt on a failed or non-200 round trip.
    auto time_one = [&](const std::string &body, bool &unreachable) -> std::optional<double> {
        const auto start = Clock::now();
        auto res = client.Post("/suggest", body, "application/json");
        const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
        if (!res) {
            unreachable = res.error() == httplib::Error::Connection;
            return std::nullopt;
        }
        if (res->status != 200) {
            return std::nullopt;
        }
        if (report.backend_id.empty()) {
            report.backend_id = deserialize_response(res->body).model_id;
        }
        return elapsed;
    };

    bool unreachable = false;
    for (int w = 0; w < options.warmup_rounds; ++w) {
        for (const auto &body : bodies) {
            (void)time_one(body, unreachable);
            if (unreachable) {
                throw BackendUnavailable("suggestion server at " + endpoint + " is unreachable");
            }
        }
    }

    for (const auto &body : bodies) {
        std::vector<double> samples;
        for (int r = 0; r < options.repeats; ++r) {
            if (auto t = time_one(body, unreachable)) {
                samples.push_back(*t);
            } else {
                if (unreachable) {
                    throw BackendUnavailable("suggestion server at " + endpoint + " is unreachable");
                }
                ++report.missing_samples;
            }
        }
        if (samples.empty()) {
            continue;
        }
        std::sort(samples.begin(), samples.end());
        const std::size_t mid = samples.size() / 2;
        const double median = samples.size() % 2 == 1 ? samples[mid] : 0.5 * (samples[mid - 1] + samples[mid]);
        report.per_example_s.push_back(median);
    }
    if (report.backend_id.empty()) {
        report.backend_id = "unknown";
    }
    summarize(report);
    return report;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::size_t display_width(std::string_view s) {
    return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
        return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
    }));
}

std::string render_table(const std::vector<std::string> &header, const std::vector<std::vector<std::string>> &rows) {
    std::vector<std::size_t> widths(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        widths[c] = display_width(header[c]);
        for (const auto &row : rows) {
            widths[c] = std::max(widths[c], display_width(row[c]));
        }
    }
    std::string out;
    auto emit = [&](const std::vector<std::string> &row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out += row[c];
            if (c + 1 < row.size()) {
                out.append(widths[c] - display_width(row[c]) + 2, ' ');
            }
        }
        out += '\n';
    };
    emit(header);
    std::vector<std::string> rule;
    for (auto w : widths) {
        rule.emplace_back(w, '-');
    }
    emit(rule);
    for (const auto &row : rows) {
        emit(row);
    }
    return out;
}

std::string seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4fs", s);
    return buf;
}

std::string plain(double s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", s);
    return buf;
}

std::string csv_escape(const std::string &s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + "\"";
}

} // namespace

RenderedReports render_report_texts(const std::vector<std::string> &json_texts) {
    std::vector<std::vector<std::string>> eval_rows;
    std::vector<std::vector<std::string>> latency_rows;
    std::string csv = "kind,model,search,split,solved,total,pass_rate_pct,n,examples,mean_s,p50_s,p90_s,missing\n";

    for (const auto &text : json_texts) {
        json probe;
        try {
            probe = json::parse(text);
        } catch (const json::parse_error &e) {
            throw DecodeError("$", e.what());
        }
        const std::string kind = probe.is_object() ? probe.value("kind", std::string{}) : std::string{};
        if (kind == "eval") {
            const EvalReport r = EvalReport::parse(text);
            const std::string pct = format_percent(r.solved, r.total);
            eval_rows.push_back({r.model_id, r.budget.label(), r.corpus_id, format_pass_rate(r.solved, r.total),
                                 std::to_string(r.infra_failures)});
            csv += "eval," + csv_escape(r.model_id) + "," + r.budget.label() + "," + csv_escape(r.corpus_id) + "," +
                   std::to_string(r.solved) + "," + std::to_string(r.total) + "," + pct + ",,,,,,\n";
        } else if (kind == "latency") {
            const LatencyReport r = LatencyReport::parse(text);
            latency_rows.push_back({r.backend_id, std::to_string(r.n), std::to_string(r.per_example_s.size()),
                                    seconds(r.mean_s), seconds(r.p50_s), seconds(r.p90_s),
                                    std::to_string(r.missing_samples)});
            csv += "latency," + csv_escape(r.backend_id) + ",,,,,," + std::to_string(r.n) + "," +
                   std::to_string(r.per_example_s.size()) + "," + plain(r.mean_s) + "," + plain(r.p50_s) + "," +
                   plain(r.p90_s) + "," + std::to_string(r.missing_samples) + "\n";
        } else {
            // Dispatch on the version first so old files get the clearer error.
            parse_report(text, kind.empty() ? "eval" : kind);
            throw DecodeError("kind", "unknown report kind '" + kind + "'");
        }
    }

    RenderedReports out;
    if (!eval_rows.empty()) {
        out.table += render_table({"Model", "Search", "Split", "Pass rate", "Infra failures"}, eval_rows);
    }
    if (!latency_rows.empty()) {
        if (!out.table.empty()) {
            out.table += '\n';
        }
        out.table += render_table({"Backend", "N", "Examples", "Mean", "p50", "p90", "Missing"}, latency_rows);
    }
    out.csv = std::move(csv);
    return out;
}

RenderedReports render_reports(const std::vector<std::filesystem::path> &paths) {
    std::vector<std::string> texts;
    texts.reserve(paths.size());
    for (const auto &p : paths) {
        texts.push_back(read_file(p));
    }
    return render_report_texts(texts);
}

std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw InvalidArgument("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path &path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw InvalidArgument("cannot write " + path.string());
    }
    out << contents;
}

} // namespace llmstep

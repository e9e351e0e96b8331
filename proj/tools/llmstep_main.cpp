// llmstep: tactic suggestion server, proof-search evaluation and latency
// benchmarking from one binary.

#include "llmstep/checking.hpp"
#include "llmstep/corpus.hpp"
#include "llmstep/errors.hpp"
#include "llmstep/external_adapter.hpp"
#include "llmstep/generation.hpp"
#include "llmstep/harness.hpp"
#include "llmstep/search.hpp"
#include "llmstep/server.hpp"

#include <csignal>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

namespace {

using namespace llmstep;

SuggestServer *g_server = nullptr;

void handle_signal(int) {
    if (g_server != nullptr) {
        g_server->stop();
    }
}

std::vector<std::string> split_command(const std::string &command) {
    std::istringstream in(command);
    std::vector<std::string> argv;
    std::string word;
    while (in >> word) {
        argv.push_back(word);
    }
    return argv;
}

RemoteBackendConfig remote_config(const std::string &url, const std::string &decode, int width, double temperature,
                                  int max_tokens, int retries, double timeout_s) {
    RemoteBackendConfig cfg;
    cfg.endpoint_url = url;
    cfg.decode_mode = decode == "sample" ? DecodeMode::sample : DecodeMode::beam;
    cfg.beam_width_or_samples = width;
    cfg.temperature = temperature;
    cfg.max_new_tokens = max_tokens;
    cfg.retries = retries;
    cfg.request_timeout_s = timeout_s;
    return cfg;
}

// --- serve -------------------------------------------------------------------

struct ServeArgs {
    std::string bind = "127.0.0.1:5000";
    std::string backend;
    std::string model_id;
    int n = kDefaultSuggestionCount;
    std::string check;
    double timeout_s = 30.0;
    std::size_t max_body_bytes = 1 << 20;
    int workers = 8;
    std::string decode = "beam";
    int beam_width = 32;
    double temperature = 0.0;
    int max_tokens = 64;
    int retries = 2;
};

int run_serve(const ServeArgs &args) {
    ServerConfig cfg;
    parse_bind_address(args.bind, cfg);
    if (args.backend.rfind("mock:", 0) == 0) {
        cfg.backend = MockBackendSpec{args.backend.substr(5)};
    } else if (args.backend.rfind("remote:", 0) == 0) {
        cfg.backend = remote_config(args.backend.substr(7), args.decode, args.beam_width, args.temperature,
                                    args.max_tokens, args.retries, args.timeout_s);
    } else {
        throw InvalidArgument("--backend must be mock:<path> or remote:<url>");
    }
    if (!args.check.empty()) {
        if (args.check.rfind("sim:", 0) != 0) {
            throw InvalidArgument("--check must be sim:<table-path>");
        }
        cfg.check_table_path = args.check.substr(4);
    }
    cfg.model_id = args.model_id;
    cfg.default_n = args.n;
    cfg.request_timeout_s = args.timeout_s;
    cfg.max_body_bytes = args.max_body_bytes;
    cfg.worker_threads = args.workers;

    SuggestServer server(cfg, make_service(cfg));
    g_server = &server;
    std::signal(SIGINT, handle_signal);
    std::signal(SIGTERM, handle_signal);
    std::cerr << "llmstep: serving on " << cfg.host << ":" << cfg.port << "\n";
    server.run();
    g_server = nullptr;
    return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
    std::string corpus;
    std::uint64_t seed = 7;
    std::size_t gen_count = 50;
    std::size_t gen_depth = 4;
    std::size_t gen_branching = 3;
    std::size_t gen_distractors = 4;
    std::string backend = "edges";
    std::string adapter;
    int attempts = 1;
    int expansion = 32;
    int max_iters = 100;
    double timeout_s = 600.0;
    std::size_t max_depth = 50;
    int workers = 1;
    std::string out;
};

int run_eval_command(const EvalArgs &args) {
    Corpus corpus = args.corpus.empty()
                        ? generate_corpus({args.seed, args.gen_count, args.gen_depth, args.gen_branching,
                                           args.gen_distractors})
                        : Corpus::load(args.corpus);
    auto table = std::make_shared<const SimProverTable>(corpus.table);

    EvalBackends backends;
    if (args.adapter.empty()) {
        auto shared = std::make_shared<SimulatedProver>(table);
        backends.make_environment = [shared] { return shared; };
    } else {
        const auto argv = split_command(args.adapter);
        backends.make_environment = [argv] { return std::make_shared<AdapterEnvironment>(argv); };
    }
    if (args.backend == "edges") {
        auto gen = std::make_shared<EdgeEnumeratingGenerator>(table);
        backends.make_generator = [gen] { return gen; };
    } else if (args.backend.rfind("mock:", 0) == 0) {
        auto gen = std::make_shared<MockGenerator>(MockRuleTable::load(args.backend.substr(5)));
        backends.make_generator = [gen] { return gen; };
    } else if (args.backend.rfind("remote:", 0) == 0) {
        auto gen = std::make_shared<RemoteGenerator>(
            remote_config(args.backend.substr(7), "beam", args.expansion, 0.0, 64, 2, 60.0));
        backends.make_generator = [gen] { return gen; };
    } else {
        throw InvalidArgument("--backend must be edges, mock:<path> or remote:<url>");
    }

    EvalOptions options;
    options.budget.attempts = args.attempts;
    options.budget.expansion_size = args.expansion;
    options.budget.max_iterations = args.max_iters;
    options.budget.timeout_s = args.timeout_s;
    options.budget.max_depth = args.max_depth == 0 ? std::nullopt : std::optional<std::size_t>(args.max_depth);
    options.workers = args.workers;

    const EvalReport report = run_eval(corpus, backends, options);
    const std::string json = report.to_json();
    if (!args.out.empty()) {
        write_file(args.out, json);
    }
    std::cout << render_report_texts({json}).table;
    return 0;
}

// --- bench -------------------------------------------------------------------

struct BenchArgs {
    std::string endpoint = "http://127.0.0.1:5000";
    std::string examples;
    std::vector<int> n{1};
    int repeats = 3;
    int warmup = 1;
    double timeout_s = 10.0;
    std::string out;
};

std::string output_path_for(const std::string &out, int n, bool several) {
    if (!several) {
        return out;
    }
    std::filesystem::path p(out);
    return (p.parent_path() / (p.stem().string() + "-n" + std::to_string(n) + p.extension().string())).string();
}

int run_bench(const BenchArgs &args) {
    const auto examples = load_latency_examples(args.examples);
    std::vector<std::string> reports;
    for (int n : args.n) {
        BenchOptions opts{n, args.repeats, args.warmup, args.timeout_s};
        const LatencyReport report = run_latency_bench(args.endpoint, examples, opts);
        reports.push_back(report.to_json());
        if (!args.out.empty()) {
            write_file(output_path_for(args.out, n, args.n.size() > 1), reports.back());
        }
    }
    std::cout << render_report_texts(reports).table;
    return 0;
}

// --- render ------------------------------------------------------------------

int run_render(const std::vector<std::string> &paths, const std::string &csv_out) {
    std::vector<std::filesystem::path> files(paths.begin(), paths.end());
    const RenderedReports rendered = render_reports(files);
    std::cout << rendered.table;
    if (!csv_out.empty()) {
        write_file(csv_out, rendered.csv);
    }
    return 0;
}

// --- suggest (terminal client) -----------------------------------------------

int run_suggest(const std::string &endpoint, const std::string &state, const std::string &prefix, int n) {
    httplib::Client client(endpoint);
    auto res = client.Post("/suggest", serialize(SuggestRequest(TacticState(state), prefix, n)), "application/json");
    if (!res) {
        throw BackendUnavailable("cannot reach " + endpoint + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        std::cerr << "server answered " << res->status << ": " << res->body << "\n";
        return 1;
    }
    const SuggestResponse response = deserialize_response(res->body);
    if (response.suggestions.empty()) {
        std::cout << "no suggestions\n";
        return 0;
    }
    std::cout << "Try this:\n";
    for (const auto &s : response.suggestions) {
        std::cout << "  * " << s.tactic << "  [" << to_string(s.status) << ", " << s.score << "]\n";
    }
    return 0;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"llmstep: tactic suggestions, proof search evaluation and latency benchmarks"};
    app.require_subcommand(1);

    ServeArgs serve;
    auto *serve_cmd = app.add_subcommand("serve", "Run the HTTP suggestion server");
    serve_cmd->add_option("--bind", serve.bind, "host:port to listen on")->envname("LLMSTEP_BIND");
    serve_cmd->add_option("--backend", serve.backend, "mock:<rules.json> or remote:<url>")
        ->envname("LLMSTEP_BACKEND")
        ->required();
    serve_cmd->add_option("--model-id", serve.model_id, "Model id reported in responses")->envname("LLMSTEP_MODEL_ID");
    serve_cmd->add_option("--n", serve.n, "Default suggestion count")->envname("LLMSTEP_N")->check(CLI::PositiveNumber);
    serve_cmd->add_option("--check", serve.check, "sim:<table.json> to classify suggestions")
        ->envname("LLMSTEP_CHECK");
    serve_cmd->add_option("--timeout-s", serve.timeout_s, "Per-request deadline in seconds")
        ->envname("LLMSTEP_TIMEOUT_S")
        ->check(CLI::PositiveNumber);
    serve_cmd->add_option("--max-body-bytes", serve.max_body_bytes)->envname("LLMSTEP_MAX_BODY_BYTES");
    serve_cmd->add_option("--workers", serve.workers, "Concurrent request bound")->envname("LLMSTEP_WORKERS");
    serve_cmd->add_option("--decode", serve.decode, "Remote decode mode")
        ->check(CLI::IsMember({"beam", "sample"}))
        ->envname("LLMSTEP_DECODE");
    serve_cmd->add_option("--beam-width", serve.beam_width, "Remote beam width or sample count")
        ->envname("LLMSTEP_BEAM_WIDTH");
    serve_cmd->add_option("--temperature", serve.temperature)->envname("LLMSTEP_TEMPERATURE");
    serve_cmd->add_option("--max-tokens", serve.max_tokens)->envname("LLMSTEP_MAX_TOKENS");
    serve_cmd->add_option("--retries", serve.retries)->envname("LLMSTEP_RETRIES");

    EvalArgs eval;
    auto *eval_cmd = app.add_subcommand("eval", "Best-first proof search over a corpus");
    eval_cmd->add_option("--corpus", eval.corpus, "Corpus JSON; omitted means generate one from --seed");
    eval_cmd->add_option("--seed", eval.seed, "Seed for the generated corpus");
    eval_cmd->add_option("--gen-count", eval.gen_count);
    eval_cmd->add_option("--gen-depth", eval.gen_depth);
    eval_cmd->add_option("--gen-branching", eval.gen_branching);
    eval_cmd->add_option("--gen-distractors", eval.gen_distractors);
    eval_cmd->add_option("--backend", eval.backend, "edges, mock:<rules.json> or remote:<url>");
    eval_cmd->add_option("--adapter", eval.adapter, "External prover command speaking the JSON-lines protocol");
    eval_cmd->add_option("--attempts", eval.attempts)->check(CLI::PositiveNumber);
    eval_cmd->add_option("--expansion", eval.expansion)->check(CLI::PositiveNumber);
    eval_cmd->add_option("--max-iters", eval.max_iters)->check(CLI::PositiveNumber);
    eval_cmd->add_option("--timeout-s", eval.timeout_s)->check(CLI::PositiveNumber);
    eval_cmd->add_option("--max-depth", eval.max_depth, "0 disables the depth cap");
    eval_cmd->add_option("--workers", eval.workers)->check(CLI::PositiveNumber);
    eval_cmd->add_option("--out", eval.out, "Write the JSON report here");

    BenchArgs bench;
    auto *bench_cmd = app.add_subcommand("bench", "Measure /suggest round-trip latency");
    bench_cmd->add_option("--endpoint", bench.endpoint);
    bench_cmd->add_option("--examples", bench.examples)->required()->check(CLI::ExistingFile);
    bench_cmd->add_option("--n", bench.n, "Suggestion counts; repeat for several rows")->check(CLI::PositiveNumber);
    bench_cmd->add_option("--repeats", bench.repeats)->check(CLI::PositiveNumber);
    bench_cmd->add_option("--warmup", bench.warmup)->check(CLI::NonNegativeNumber);
    bench_cmd->add_option("--timeout-s", bench.timeout_s)->check(CLI::PositiveNumber);
    bench_cmd->add_option("--out", bench.out, "Report path; -n<N> is inserted when several --n are given");

    std::vector<std::string> render_paths;
    std::string render_csv;
    auto *render_cmd = app.add_subcommand("render", "Render eval and latency reports as tables");
    render_cmd->add_option("reports", render_paths)->required()->check(CLI::ExistingFile);
    render_cmd->add_option("--csv", render_csv, "Also write a CSV summary");

    CorpusParams corpus_params{7, 50, 4, 3, 4};
    std::string corpus_out;
    std::string table_out;
    auto *corpus_cmd = app.add_subcommand("corpus", "Generate a synthetic proof-DAG corpus");
    corpus_cmd->add_option("--seed", corpus_params.seed);
    corpus_cmd->add_option("--count", corpus_params.count)->check(CLI::PositiveNumber);
    corpus_cmd->add_option("--max-depth", corpus_params.max_depth)->check(CLI::PositiveNumber);
    corpus_cmd->add_option("--branching", corpus_params.branching)->check(CLI::PositiveNumber);
    corpus_cmd->add_option("--distractors", corpus_params.distractors_per_state);
    corpus_cmd->add_option("--out", corpus_out, "Corpus JSON path")->required();
    corpus_cmd->add_option("--table-out", table_out, "Also write the bare transition table");

    std::string adapter_table;
    std::string adapter_corpus;
    auto *adapter_cmd = app.add_subcommand("adapter-sim", "Serve a simulated prover over the stdio line protocol");
    adapter_cmd->add_option("--table", adapter_table, "Transition table JSON");
    adapter_cmd->add_option("--corpus", adapter_corpus, "Corpus JSON (theorem ids resolve to their roots)");

    std::string suggest_endpoint = "http://127.0.0.1:5000";
    std::string suggest_state;
    std::string suggest_prefix;
    int suggest_n = kDefaultSuggestionCount;
    auto *suggest_cmd = app.add_subcommand("suggest", "Ask a running server for suggestions");
    suggest_cmd->add_option("--endpoint", suggest_endpoint)->envname("LLMSTEP_ENDPOINT");
    suggest_cmd->add_option("--state", suggest_state)->required();
    suggest_cmd->add_option("--prefix", suggest_prefix);
    suggest_cmd->add_option("--n", suggest_n)->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve_cmd) {
            return run_serve(serve);
        }
        if (*eval_cmd) {
            return run_eval_command(eval);
        }
        if (*bench_cmd) {
            return run_bench(bench);
        }
        if (*render_cmd) {
            return run_render(render_paths, render_csv);
        }
        if (*corpus_cmd) {
            const Corpus corpus = generate_corpus(corpus_params);
            corpus.save(corpus_out);
            if (!table_out.empty()) {
                corpus.table.save(table_out);
            }
            std::cerr << "wrote " << corpus.theorems.size() << " theorems, " << corpus.table.states().size()
                      << " states, " << corpus.table.edge_count() << " edges\n";
            return 0;
        }
        if (*adapter_cmd) {
            std::map<std::string, TacticState> roots;
            SimProverTable table;
            if (!adapter_corpus.empty()) {
                Corpus corpus = Corpus::load(adapter_corpus);
                for (const auto &t : corpus.theorems) {
                    roots.emplace(t.id, t.root);
                }
                table = std::move(corpus.table);
            } else if (!adapter_table.empty()) {
                table = SimProverTable::load(adapter_table);
            } else {
                throw InvalidArgument("adapter-sim needs --table or --corpus");
            }
            serve_adapter_protocol(table, roots, std::cin, std::cout);
            return 0;
        }
        if (*suggest_cmd) {
            return run_suggest(suggest_endpoint, suggest_state, suggest_prefix, suggest_n);
        }
    } catch (const DecodeError &e) {
        std::cerr << "llmstep: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "llmstep: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

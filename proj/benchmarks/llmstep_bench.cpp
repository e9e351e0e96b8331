#include "llmstep/checking.hpp"
#include "llmstep/corpus.hpp"
#include "llmstep/harness.hpp"
#include "llmstep/search.hpp"
#include "llmstep/server.hpp"

#include <benchmark/benchmark.h>

using namespace llmstep;

namespace {

const std::string kDataDir = LLMSTEP_DATA_DIR;
const std::string kSubsetState = "⊢ R ⊆ S → S ⊆ T → R ⊆ T";

const Corpus &standard_corpus() {
    static const Corpus corpus = generate_corpus({7, 50, 4, 3, 4});
    return corpus;
}

void BM_GenerateCorpus(benchmark::State &state) {
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate_corpus({7, 50, 4, 3, 4}));
    }
}
BENCHMARK(BM_GenerateCorpus)->Unit(benchmark::kMillisecond);

void BM_SearchCorpus(benchmark::State &state) {
    const auto &corpus = standard_corpus();
    const auto table = std::make_shared<const SimProverTable>(corpus.table);
    SimulatedProver prover(table);
    EdgeEnumeratingGenerator gen(table);
    SearchBudget budget;
    budget.expansion_size = static_cast<int>(state.range(0));
    std::size_t solved = 0;
    for (auto _ : state) {
        solved = 0;
        for (const auto &thm : corpus.theorems) {
            solved += run_attempts(prover, gen, thm.root, budget).outcome == SearchOutcome::proved ? 1 : 0;
        }
    }
    state.counters["solved"] = static_cast<double>(solved);
}
BENCHMARK(BM_SearchCorpus)->Arg(4)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_BruteForceCorpus(benchmark::State &state) {
    const auto &corpus = standard_corpus();
    for (auto _ : state) {
        for (const auto &thm : corpus.theorems) {
            benchmark::DoNotOptimize(brute_force_prove(corpus.table, thm.root, 64));
        }
    }
}
BENCHMARK(BM_BruteForceCorpus)->Unit(benchmark::kMillisecond);

void BM_CheckBatch(benchmark::State &state) {
    const auto &corpus = standard_corpus();
    const auto table = std::make_shared<const SimProverTable>(corpus.table);
    SimulatedProver prover(table);
    EdgeEnumeratingGenerator gen(table);
    const TacticState &root = corpus.theorems.front().root;
    const auto candidates = gen.generate(root, "", 64);
    for (auto _ : state) {
        benchmark::DoNotOptimize(check_batch(prover, root, candidates));
    }
}
BENCHMARK(BM_CheckBatch);

void BM_SerializeRoundTrip(benchmark::State &state) {
    SuggestResponse response;
    response.model_id = "mock";
    for (int i = 0; i < state.range(0); ++i) {
        response.suggestions.emplace_back("exact lemma_" + std::to_string(i), -0.1 * i, SuggestionStatus::valid);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(deserialize_response(serialize(response)));
    }
}
BENCHMARK(BM_SerializeRoundTrip)->Arg(5)->Arg(32);

void BM_EncodePrompt(benchmark::State &state) {
    const TacticState s(kSubsetState);
    for (auto _ : state) {
        benchmark::DoNotOptimize(encode_prompt(s, "exact"));
    }
}
BENCHMARK(BM_EncodePrompt);

void BM_HandleSuggest(benchmark::State &state) {
    ServerConfig config;
    config.backend = MockBackendSpec{kDataDir + "/subset_rules.json"};
    if (state.range(0) != 0) {
        config.check_table_path = kDataDir + "/subset_table.json";
    }
    auto service = make_service(config);
    const std::string body = R"({"tactic_state":")" + kSubsetState + R"(","prefix":"","n":5})";
    for (auto _ : state) {
        benchmark::DoNotOptimize(service->handle_suggest_body(body));
    }
}
BENCHMARK(BM_HandleSuggest)->Arg(0)->Arg(1)->ArgNames({"check"});

void BM_FormatPassRate(benchmark::State &state) {
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(format_pass_rate(i % 245, 244 + i % 2));
        ++i;
    }
}
BENCHMARK(BM_FormatPassRate);

} // namespace

BENCHMARK_MAIN();

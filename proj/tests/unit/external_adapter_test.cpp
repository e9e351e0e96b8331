#include "llmstep/errors.hpp"
#include "llmstep/external_adapter.hpp"
#include "llmstep/search.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <sstream>

using namespace llmstep;
using namespace llmstep::testing;
using namespace std::chrono_literals;

namespace {

std::vector<std::string> fake_argv() { return {LLMSTEP_FAKE_ADAPTER}; }

} // namespace

TEST(ExternalAdapter, InitIssuesRootToken) {
    ExternalAdapter adapter(fake_argv());
    const auto reply = adapter.init("two_plus_two");
    ASSERT_TRUE(reply.outcome.is_progress());
    ASSERT_TRUE(reply.state_id.has_value());
    EXPECT_EQ(reply.outcome.next_state()->text(), "⊢ 2 + 2 = 4");
    EXPECT_TRUE(adapter.alive());
}

TEST(ExternalAdapter, ReflexivityCompletes) {
    ExternalAdapter adapter(fake_argv());
    const auto root = adapter.init("two_plus_two");
    EXPECT_TRUE(external_adapter_apply(adapter, *root.state_id, "rfl").is_completed());
}

TEST(ExternalAdapter, BrokenTacticCarriesMessage) {
    ExternalAdapter adapter(fake_argv());
    const auto root = adapter.init("two_plus_two");
    const auto out = external_adapter_apply(adapter, *root.state_id, "exact !!");
    ASSERT_TRUE(out.is_error());
    EXPECT_NE(out.message().find("unexpected token"), std::string::npos);
    EXPECT_EQ(external_adapter_apply(adapter, *root.state_id, "simp").message(), kUnknownTacticMessage);
}

TEST(ExternalAdapter, UnknownTheoremAndToken) {
    ExternalAdapter adapter(fake_argv());
    EXPECT_TRUE(adapter.init("no_such_theorem").outcome.is_error());
    EXPECT_TRUE(external_adapter_apply(adapter, "s999", "rfl").is_error());
}

TEST(ExternalAdapter, TimeoutIsErrorAndAdapterRecovers) {
    ExternalAdapter adapter(fake_argv(), 300ms);
    const auto root = adapter.init("two_plus_two");
    const auto slow = external_adapter_apply(adapter, *root.state_id, "sleep");
    ASSERT_TRUE(slow.is_error());
    EXPECT_NE(slow.message().find("timeout"), std::string::npos);
    EXPECT_TRUE(adapter.alive());
    std::this_thread::sleep_for(2s);
    // The late reply to "sleep" is discarded, not mistaken for this one.
    EXPECT_TRUE(external_adapter_apply(adapter, *root.state_id, "rfl").is_completed());
}

TEST(ExternalAdapter, CrashIsUnavailable) {
    ExternalAdapter adapter(fake_argv());
    const auto root = adapter.init("two_plus_two");
    EXPECT_THROW((void)adapter.apply(*root.state_id, "crash"), EnvironmentUnavailable);
    EXPECT_FALSE(adapter.alive());
    EXPECT_THROW((void)adapter.apply(*root.state_id, "rfl"), EnvironmentUnavailable);
}

TEST(ExternalAdapter, GarbageReplyIsUnavailable) {
    ExternalAdapter adapter(fake_argv());
    const auto root = adapter.init("two_plus_two");
    EXPECT_THROW((void)adapter.apply(*root.state_id, "garbage"), EnvironmentUnavailable);
}

TEST(ExternalAdapter, MissingExecutableIsUnavailable) {
    EXPECT_THROW(
        {
            ExternalAdapter adapter({"/nonexistent/prover-binary"});
            (void)adapter.init("x");
        },
        EnvironmentUnavailable);
    EXPECT_THROW(ExternalAdapter({}), InvalidArgument);
}

TEST(AdapterEnvironment, SubsetClassification) {
    AdapterEnvironment env(fake_argv());
    const auto root = env.open("subset", TacticState(kSubsetState));
    EXPECT_EQ(root.text(), kSubsetState);
    EXPECT_TRUE(env.apply(root, "tauto").is_completed());
    const auto intro = env.apply(root, "intros h1 h2");
    ASSERT_TRUE(intro.is_progress());
    EXPECT_TRUE(env.apply(*intro.next_state(), "exact subset_trans h1 h2").is_completed());
    EXPECT_TRUE(env.apply(root, "exact rfl").is_error());
    EXPECT_THROW((void)env.apply(TacticState("⊢ never issued"), "rfl"), EnvironmentIntegrityError);
    EXPECT_THROW((void)env.open("missing", TacticState("⊢ x")), EnvironmentIntegrityError);
}

TEST(AdapterEnvironment, SearchFindsProof) {
    auto env = std::make_shared<AdapterEnvironment>(fake_argv());
    MockGenerator gen(subset_rules());
    const auto root = env->open("subset", TacticState(kSubsetState));
    SearchBudget budget;
    budget.expansion_size = 5;
    budget.max_iterations = 10;
    const auto result = run_attempts(*env, gen, root, budget);
    ASSERT_EQ(result.outcome, SearchOutcome::proved);
    EXPECT_EQ(result.proof, std::vector<std::string>{"exact subset_trans"});
}

TEST(AdapterProtocolServer, InProcessProtocol) {
    const auto table = subset_table();
    AdapterProtocolServer server(*table, {{"subset", *table->root()}});
    const auto init = nlohmann::json::parse(server.handle(R"({"op":"init","theorem":"subset"})"));
    EXPECT_EQ(init.at("kind"), "progress");
    const std::string token = init.at("state_id");
    const auto step = nlohmann::json::parse(
        server.handle(nlohmann::json{{"op", "apply"}, {"state_id", token}, {"tactic", "intro"}}.dump()));
    EXPECT_EQ(step.at("kind"), "progress");
    EXPECT_NE(step.at("state_id"), token);
    // Same state, same token.
    const auto again = nlohmann::json::parse(
        server.handle(nlohmann::json{{"op", "apply"}, {"state_id", token}, {"tactic", "intro"}}.dump()));
    EXPECT_EQ(again.at("state_id"), step.at("state_id"));
    EXPECT_EQ(nlohmann::json::parse(server.handle("nonsense")).at("kind"), "error");
    EXPECT_EQ(nlohmann::json::parse(server.handle(R"({"op":"fly"})")).at("kind"), "error");
}

TEST(AdapterProtocolServer, StreamLoop) {
    const auto table = subset_table();
    std::istringstream in(R"({"op":"init","theorem":"anything"})"
                          "\n"
                          R"({"op":"apply","state_id":"s0","tactic":"tauto"})"
                          "\n");
    std::ostringstream out;
    serve_adapter_protocol(*table, {}, in, out);
    std::istringstream lines(out.str());
    std::string first, second;
    std::getline(lines, first);
    std::getline(lines, second);
    EXPECT_EQ(nlohmann::json::parse(first).at("next_state"), kSubsetState);
    EXPECT_EQ(nlohmann::json::parse(second).at("kind"), "completed");
}

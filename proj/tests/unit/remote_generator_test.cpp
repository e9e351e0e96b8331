#include "llmstep/errors.hpp"
#include "llmstep/generation.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <mutex>

using namespace llmstep;
using namespace llmstep::testing;
using nlohmann::json;

namespace {

/// Completion API stand-in answering from a mock rule table. Continuations are
/// returned without the prefix, terminated by the end-of-text sentinel.
class FakeUpstream {
  public:
    explicit FakeUpstream(MockRuleTable rules) : rules_(std::move(rules)) {
        server_.Post("/v1/completions", [this](const httplib::Request &req, httplib::Response &res) {
            std::unique_lock lock(mutex_);
            bodies.push_back(json::parse(req.body));
            const auto request = bodies.back();
            if (fail_next > 0) {
                --fail_next;
                res.status = 503;
                return;
            }
            const auto behaviour = mode;
            lock.unlock();
            if (behaviour == "slow") {
                std::this_thread::sleep_for(std::chrono::milliseconds(800));
            }
            if (behaviour == "malformed") {
                res.set_content("{\"choices\": 12", "application/json");
                return;
            }
            if (behaviour == "bad_request") {
                res.status = 400;
                return;
            }
            res.set_content(answer(request).dump(), "application/json");
        });
        server_.Get("/", [](const httplib::Request &, httplib::Response &res) { res.set_content("ok", "text/plain"); });
        port = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~FakeUpstream() {
        server_.stop();
        thread_.join();
    }

    RemoteBackendConfig config() const {
        RemoteBackendConfig c;
        c.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/completions";
        c.model_id = "fake";
        c.request_timeout_s = 5.0;
        c.initial_backoff_s = 0.01;
        return c;
    }

    std::vector<json> bodies;
    std::string mode = "ok";
    int fail_next = 0;
    int port = 0;
    std::mutex mutex_;

  private:
    json answer(const json &request) const {
        const std::string prompt = request.at("prompt");
        const auto goal = prompt.find("[GOAL]");
        const auto step = prompt.find("[PROOFSTEP]");
        const std::string state = prompt.substr(goal + 6, step - goal - 6);
        const std::string prefix = prompt.substr(step + 11);
        json choices = json::array();
        const auto outputs = generate_mock(rules_, TacticState(state), prefix, request.at("n").get<int>());
        for (const auto &c : outputs) {
            choices.push_back({{"text", c.tactic.substr(prefix.size()) + "<|endoftext|>"}, {"logprob", c.score}});
        }
        return {{"choices", choices}};
    }

    MockRuleTable rules_;
    httplib::Server server_;
    std::thread thread_;
};

MockRuleTable upstream_rules() {
    auto rules = subset_rules().rules();
    rules.push_back({"⊢ ∀ x, p x", "", {{"intro h x", -0.3}, {"intro h", -0.6}, {"simp", -0.9}}});
    return MockRuleTable(std::move(rules));
}

std::vector<std::string> tactics_of(const std::vector<Candidate> &candidates) {
    std::vector<std::string> out;
    for (const auto &c : candidates) {
        out.push_back(c.tactic);
    }
    return out;
}

} // namespace

TEST(RemoteGenerator, SendsEncodedPrompt) {
    FakeUpstream upstream(upstream_rules());
    RemoteGenerator gen(upstream.config());
    (void)gen.generate(TacticState(kSubsetState), "exact", 5);
    ASSERT_EQ(upstream.bodies.size(), 1u);
    const auto &body = upstream.bodies.front();
    EXPECT_EQ(body.at("prompt"), "[GOAL]" + kSubsetState + "[PROOFSTEP]exact");
    EXPECT_EQ(body.at("model"), "fake");
    EXPECT_EQ(body.at("n"), 32);
    EXPECT_EQ(body.at("beam_width"), 32);
    EXPECT_EQ(body.at("temperature"), 0.0);
    EXPECT_EQ(body.at("max_tokens"), 64);
}

TEST(RemoteGenerator, SamplingModeSendsTemperature) {
    FakeUpstream upstream(upstream_rules());
    auto config = upstream.config();
    config.decode_mode = DecodeMode::sample;
    config.temperature = 0.7;
    RemoteGenerator gen(config);
    (void)gen.generate(TacticState(kSubsetState), "", 5);
    EXPECT_FALSE(upstream.bodies.front().contains("beam_width"));
    EXPECT_DOUBLE_EQ(upstream.bodies.front().at("temperature").get<double>(), 0.7);
}

TEST(RemoteGenerator, SubsetSuggestions) {
    FakeUpstream upstream(upstream_rules());
    RemoteGenerator gen(upstream.config());
    EXPECT_EQ(tactics_of(gen.generate(TacticState(kSubsetState), "", 5)), kSubsetSuggestions);
    EXPECT_EQ(tactics_of(gen.generate(TacticState(kSubsetState), "", 1)), std::vector<std::string>{"exact subset_trans"});
}

TEST(RemoteGenerator, PrefixIsReattached) {
    FakeUpstream upstream(upstream_rules());
    RemoteGenerator gen(upstream.config());
    const auto out = gen.generate(TacticState("⊢ ∀ x, p x"), "intr", 1);
    EXPECT_EQ(tactics_of(out), std::vector<std::string>{"intro h x"});
}

TEST(RemoteGenerator, BatchesWhenNExceedsBeamWidth) {
    FakeUpstream upstream(upstream_rules());
    auto config = upstream.config();
    config.beam_width_or_samples = 2;
    RemoteGenerator gen(config);
    const auto out = gen.generate(TacticState(kSubsetState), "", 5);
    EXPECT_EQ(upstream.bodies.size(), 3u);
    // Identical batches collapse under deduplication.
    EXPECT_EQ(tactics_of(out), (std::vector<std::string>{"exact subset_trans", "exact Set.Subset.trans"}));
}

TEST(RemoteGenerator, MalformedPayloadIsProtocolError) {
    FakeUpstream upstream(upstream_rules());
    upstream.mode = "malformed";
    RemoteGenerator gen(upstream.config());
    EXPECT_THROW((void)gen.generate(TacticState(kSubsetState), "", 5), BackendProtocolError);
}

TEST(RemoteGenerator, ClientErrorIsProtocolError) {
    FakeUpstream upstream(upstream_rules());
    upstream.mode = "bad_request";
    RemoteGenerator gen(upstream.config());
    EXPECT_THROW((void)gen.generate(TacticState(kSubsetState), "", 5), BackendProtocolError);
    EXPECT_EQ(upstream.bodies.size(), 1u);
}

TEST(RemoteGenerator, ClosedPortIsUnavailable) {
    int port = 0;
    {
        FakeUpstream upstream(upstream_rules());
        port = upstream.port;
    }
    RemoteBackendConfig config;
    config.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/completions";
    config.request_timeout_s = 5.0;
    config.initial_backoff_s = 0.01;
    RemoteGenerator gen(config);
    EXPECT_THROW((void)gen.generate(TacticState(kSubsetState), "", 5), BackendUnavailable);
    EXPECT_FALSE(gen.ready());
}

TEST(RemoteGenerator, SlowUpstreamExceedsDeadline) {
    FakeUpstream upstream(upstream_rules());
    upstream.mode = "slow";
    auto config = upstream.config();
    config.request_timeout_s = 0.2;
    RemoteGenerator gen(config);
    EXPECT_THROW((void)gen.generate(TacticState(kSubsetState), "", 5), DeadlineExceeded);
}

TEST(RemoteGenerator, RetriesTransientFailures) {
    FakeUpstream upstream(upstream_rules());
    upstream.fail_next = 2;
    RemoteGenerator gen(upstream.config());
    EXPECT_EQ(tactics_of(gen.generate(TacticState(kSubsetState), "", 5)), kSubsetSuggestions);
    EXPECT_EQ(upstream.bodies.size(), 3u);
    EXPECT_TRUE(gen.ready());
}

TEST(RemoteGenerator, GivesUpAfterRetries) {
    FakeUpstream upstream(upstream_rules());
    upstream.fail_next = 10;
    auto config = upstream.config();
    config.retries = 1;
    EXPECT_THROW((void)generate_remote(config, TacticState(kSubsetState), "", 5), BackendUnavailable);
    EXPECT_EQ(upstream.bodies.size(), 2u);
}

#pragma once

#include "llmstep/generation.hpp"
#include "llmstep/proofenv.hpp"
#include "llmstep/protocol.hpp"

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <string>
#include <variant>

namespace llmstep {

struct MockBackendSpec {
    std::string rules_path;
};

struct ServerConfig {
    std::string host = "127.0.0.1";
    int port = 5000;
    std::variant<MockBackendSpec, RemoteBackendConfig> backend = MockBackendSpec{};
    std::string model_id;
    int default_n = kDefaultSuggestionCount;
    /// Path to a SimProverTable; empty means responses stay unchecked.
    std::string check_table_path;
    std::size_t max_body_bytes = 1 << 20;
    double request_timeout_s = 30.0;
    /// Bound on concurrently handled requests.
    int worker_threads = 8;

    void validate() const;
};

/// Parses "host:port"; a bare port binds loopback.
void parse_bind_address(std::string_view bind, ServerConfig &config);

struct HttpReply {
    int status = 200;
    std::string body;
};

/// Transport-independent suggestion service. Safe for concurrent calls.
class SuggestionService {
  public:
    SuggestionService(std::shared_ptr<Generator> generator, std::shared_ptr<ProofEnvironment> checker,
                      int default_n = kDefaultSuggestionCount, double request_timeout_s = 30.0);

    /// Generation, optional checking, prefix/dedup/cap enforcement.
    [[nodiscard]] SuggestResponse handle_suggest(const SuggestRequest &request);

    /// Decodes, serves, and maps failures: 400 decode, 502 malformed upstream,
    /// 503 backend unavailable, 504 deadline.
    [[nodiscard]] HttpReply handle_suggest_body(std::string_view body);

    /// {status, backend, model_id, uptime_s, requests_served, degraded, checking}
    [[nodiscard]] std::string handle_health();

    [[nodiscard]] std::size_t requests_served() const noexcept { return served_.load(); }

  private:
    std::vector<Candidate> generate_with_deadline(const SuggestRequest &request);

    std::shared_ptr<Generator> generator_;
    std::shared_ptr<ProofEnvironment> checker_;
    int default_n_;
    double request_timeout_s_;
    std::chrono::steady_clock::time_point started_;
    std::atomic<std::size_t> served_{0};
};

/// Builds the generator and optional checker a config names.
[[nodiscard]] std::shared_ptr<SuggestionService> make_service(const ServerConfig &config);

/// HTTP/1.1 front end: POST /suggest, GET /health.
class SuggestServer {
  public:
    SuggestServer(ServerConfig config, std::shared_ptr<SuggestionService> service);
    ~SuggestServer();

    SuggestServer(const SuggestServer &) = delete;
    SuggestServer &operator=(const SuggestServer &) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port.
    /// Returns the bound port.
    int start();
    /// Binds and serves on the calling thread until stop().
    void run();
    void stop();

    [[nodiscard]] int port() const noexcept { return port_; }
    [[nodiscard]] SuggestionService &service() noexcept { return *service_; }

  private:
    struct Impl;

    ServerConfig config_;
    std::shared_ptr<SuggestionService> service_;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

} // namespace llmstep

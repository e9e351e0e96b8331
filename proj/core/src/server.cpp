#include "llmstep/server.hpp"

#include "llmstep/checking.hpp"
#include "llmstep/errors.hpp"
#include "llmstep/text.hpp"

#include <cmath>
#include <future>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace llmstep {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

void ServerConfig::validate() const {
    if (port < 0 || port > 65535) {
        throw InvalidArgument("server: port out of range");
    }
    if (default_n < 1) {
        throw InvalidArgument("server: default n must be >= 1");
    }
    if (max_body_bytes < 4096) {
        throw InvalidArgument("server: max body size must be >= 4096 bytes");
    }
    if (!(request_timeout_s > 0.0)) {
        throw InvalidArgument("server: request timeout must be > 0");
    }
    if (worker_threads < 1) {
        throw InvalidArgument("server: worker thread count must be >= 1");
    }
    if (const auto *remote = std::get_if<RemoteBackendConfig>(&backend)) {
        remote->validate();
    }
}

void parse_bind_address(std::string_view bind, ServerConfig &config) {
    const auto colon = bind.rfind(':');
    std::string_view port_text = bind;
    if (colon != std::string_view::npos) {
        config.host = std::string(bind.substr(0, colon));
        port_text = bind.substr(colon + 1);
    }
    if (config.host.empty()) {
        config.host = "127.0.0.1";
    }
    try {
        std::size_t used = 0;
        const int port = std::stoi(std::string(port_text), &used);
        if (used != port_text.size() || port < 0 || port > 65535) {
            throw InvalidArgument("bad port");
        }
        config.port = port;
    } catch (const std::exception &) {
        throw InvalidArgument("bind address must be host:port, got '" + std::string(bind) + "'");
    }
}

// ---------------------------------------------------------------------------
// SuggestionService

SuggestionService::SuggestionService(std::shared_ptr<Generator> generator, std::shared_ptr<ProofEnvironment> checker,
                                     int default_n, double request_timeout_s)
    : generator_(std::move(generator)), checker_(std::move(checker)), default_n_(default_n),
      request_timeout_s_(request_timeout_s), started_(Clock::now()) {
    if (!generator_) {
        throw InvalidArgument("suggestion service needs a generator");
    }
    if (default_n_ < 1) {
        throw InvalidArgument("suggestion service: default n must be >= 1");
    }
}

std::vector<Candidate> SuggestionService::generate_with_deadline(const SuggestRequest &request) {
    // The worker owns copies of everything it touches, so an abandoned call
    // can finish after the request has been answered with 504.
    std::promise<std::vector<Candidate>> promise;
    auto future = promise.get_future();
    std::thread([generator = generator_, state = request.tactic_state, prefix = request.prefix, n = request.n,
                 promise = std::move(promise)]() mutable {
        try {
            promise.set_value(generator->generate(state, prefix, n));
        } catch (...) {
            promise.set_exception(std::current_exception());
        }
    }).detach();
    if (future.wait_for(std::chrono::duration<double>(request_timeout_s_)) != std::future_status::ready) {
        throw DeadlineExceeded("generator did not answer within the request timeout");
    }
    return future.get();
}

SuggestResponse SuggestionService::handle_suggest(const SuggestRequest &request) {
    const auto start = Clock::now();

    std::vector<Candidate> raw = generate_with_deadline(request);
    std::vector<Candidate> candidates;
    candidates.reserve(raw.size());
    for (auto &c : raw) {
        if (starts_with(c.tactic, request.prefix) && !trim(c.tactic).empty() && std::isfinite(c.score)) {
            candidates.push_back(std::move(c));
        }
    }
    candidates = score_normalize(std::move(candidates));
    if (candidates.size() > static_cast<std::size_t>(request.n)) {
        candidates.resize(static_cast<std::size_t>(request.n));
    }

    SuggestResponse response;
    response.model_id = generator_->model_id();
    bool checked = false;
    if (checker_) {
        try {
            response.suggestions = check_batch(*checker_, request.tactic_state, candidates).suggestions();
            checked = true;
        } catch (const EnvironmentIntegrityError &) {
            // The checker does not know this state; the suggestions stay unchecked.
        }
    }
    if (!checked) {
        for (auto &c : candidates) {
            response.suggestions.emplace_back(std::move(c.tactic), c.score, SuggestionStatus::unchecked);
        }
    }
    response.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
    return response;
}

namespace {

HttpReply error_reply(int status, std::string_view kind, std::string_view message, std::string_view field = {}) {
    json body{{"error", kind}, {"message", message}};
    if (!field.empty()) {
        body["field"] = field;
    }
    return {status, body.dump(-1, ' ', false, json::error_handler_t::replace)};
}

} // namespace

HttpReply SuggestionService::handle_suggest_body(std::string_view body) {
    ++served_;
    std::optional<SuggestRequest> request;
    try {
        request = deserialize_request(body, default_n_);
    } catch (const DecodeError &e) {
        return error_reply(400, "decode_error", e.what(), e.field());
    } catch (const InvalidArgument &e) {
        return error_reply(400, "decode_error", e.what(), "tactic_state");
    }
    try {
        return {200, serialize(handle_suggest(*request))};
    } catch (const DecodeError &e) {
        return error_reply(400, "decode_error", e.what(), e.field());
    } catch (const BackendUnavailable &e) {
        return error_reply(503, "backend_unavailable", e.what());
    } catch (const EnvironmentUnavailable &e) {
        return error_reply(503, "checker_unavailable", e.what());
    } catch (const DeadlineExceeded &e) {
        return error_reply(504, "deadline_exceeded", e.what());
    } catch (const BackendProtocolError &e) {
        return error_reply(502, "backend_protocol_error", e.what());
    } catch (const std::exception &e) {
        return error_reply(500, "internal_error", e.what());
    }
}

std::string SuggestionService::handle_health() {
    const double uptime = std::chrono::duration<double>(Clock::now() - started_).count();
    const bool ready = generator_->ready();
    json doc{{"status", "ok"},
             {"backend", generator_->backend_kind()},
             {"model_id", generator_->model_id()},
             {"uptime_s", uptime},
             {"requests_served", served_.load()},
             {"degraded", !ready},
             {"checking", checker_ != nullptr}};
    return doc.dump();
}

std::shared_ptr<SuggestionService> make_service(const ServerConfig &config) {
    config.validate();
    std::shared_ptr<Generator> generator;
    if (const auto *mock = std::get_if<MockBackendSpec>(&config.backend)) {
        generator = std::make_shared<MockGenerator>(MockRuleTable::load(mock->rules_path),
                                                    config.model_id.empty() ? "mock" : config.model_id);
    } else {
        RemoteBackendConfig remote = std::get<RemoteBackendConfig>(config.backend);
        if (!config.model_id.empty()) {
            remote.model_id = config.model_id;
        }
        generator = std::make_shared<RemoteGenerator>(std::move(remote));
    }
    std::shared_ptr<ProofEnvironment> checker;
    if (!config.check_table_path.empty()) {
        checker = std::make_shared<SimulatedProver>(
            std::make_shared<const SimProverTable>(SimProverTable::load(config.check_table_path)));
    }
    return std::make_shared<SuggestionService>(std::move(generator), std::move(checker), config.default_n,
                                               config.request_timeout_s);
}

// ---------------------------------------------------------------------------
// SuggestServer

struct SuggestServer::Impl {
    httplib::Server http;
    std::thread thread;
};

SuggestServer::SuggestServer(ServerConfig config, std::shared_ptr<SuggestionService> service)
    : config_(std::move(config)), service_(std::move(service)), impl_(std::make_unique<Impl>()) {
    config_.validate();
    if (!service_) {
        throw InvalidArgument("server needs a suggestion service");
    }
    const int workers = config_.worker_threads;
    impl_->http.new_task_queue = [workers] { return new httplib::ThreadPool(static_cast<std::size_t>(workers)); };
    impl_->http.set_payload_max_length(config_.max_body_bytes);

    auto service_ref = service_;
    impl_->http.Post("/suggest", [service_ref](const httplib::Request &req, httplib::Response &res) {
        HttpReply reply = service_ref->handle_suggest_body(req.body);
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    });
    impl_->http.Get("/health", [service_ref](const httplib::Request &, httplib::Response &res) {
        res.status = 200;
        res.set_content(service_ref->handle_health(), "application/json");
    });
}

SuggestServer::~SuggestServer() { stop(); }

int SuggestServer::start() {
    if (config_.port == 0) {
        port_ = impl_->http.bind_to_any_port(config_.host);
    } else {
        port_ = impl_->http.bind_to_port(config_.host, config_.port) ? config_.port : -1;
    }
    if (port_ < 0) {
        throw InvalidArgument("cannot bind " + config_.host + ":" + std::to_string(config_.port));
    }
    impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
    impl_->http.wait_until_ready();
    return port_;
}

void SuggestServer::run() {
    if (config_.port == 0) {
        port_ = impl_->http.bind_to_any_port(config_.host);
    } else {
        port_ = impl_->http.bind_to_port(config_.host, config_.port) ? config_.port : -1;
    }
    if (port_ < 0) {
        throw InvalidArgument("cannot bind " + config_.host + ":" + std::to_string(config_.port));
    }
    impl_->http.listen_after_bind();
}

void SuggestServer::stop() {
    if (!impl_) {
        return;
    }
    impl_->http.stop();
    if (impl_->thread.joinable()) {
        impl_->thread.join();
    }
}

} // namespace llmstep

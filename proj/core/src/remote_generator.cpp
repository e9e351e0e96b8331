#include "llmstep/errors.hpp"
#include "llmstep/generation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <semaphore>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace llmstep {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

void RemoteBackendConfig::validate() const {
    if (endpoint_url.empty()) {
        throw InvalidArgument("remote backend: endpoint_url is empty");
    }
    if (beam_width_or_samples < 1) {
        throw InvalidArgument("remote backend: beam_width_or_samples must be >= 1");
    }
    if (temperature < 0.0) {
        throw InvalidArgument("remote backend: temperature must be >= 0");
    }
    if (max_new_tokens < 1) {
        throw InvalidArgument("remote backend: max_new_tokens must be >= 1");
    }
    if (!(request_timeout_s > 0.0)) {
        throw InvalidArgument("remote backend: request_timeout_s must be > 0");
    }
    if (retries < 0) {
        throw InvalidArgument("remote backend: retries must be >= 0");
    }
    if (max_in_flight < 1) {
        throw InvalidArgument("remote backend: max_in_flight must be >= 1");
    }
}

namespace {

constexpr std::ptrdiff_t kMaxInFlight = 1024;

struct SplitUrl {
    std::string scheme_host_port;
    std::string path;
};

SplitUrl split_url(const std::string &url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw InvalidArgument("remote backend: endpoint_url needs a scheme: " + url);
    }
    if (url.compare(0, scheme_end, "http") != 0) {
        throw InvalidArgument("remote backend: only http:// endpoints are supported: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

void set_timeout(httplib::Client &client, double seconds) {
    const auto us = std::chrono::microseconds(static_cast<std::int64_t>(std::max(seconds, 0.001) * 1e6));
    client.set_connection_timeout(us);
    client.set_read_timeout(us);
    client.set_write_timeout(us);
}

std::vector<Candidate> parse_choices(const std::string &body, std::string_view prefix) {
    json doc;
    try {
        doc = json::parse(body);
    } catch (const json::parse_error &e) {
        throw BackendProtocolError(std::string("upstream returned invalid JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("choices") || !doc["choices"].is_array()) {
        throw BackendProtocolError("upstream payload has no 'choices' array");
    }
    std::vector<Candidate> out;
    for (const json &choice : doc["choices"]) {
        if (!choice.is_object() || !choice.contains("text") || !choice["text"].is_string()) {
            throw BackendProtocolError("upstream choice has no string 'text'");
        }
        if (!choice.contains("logprob") || !choice["logprob"].is_number()) {
            throw BackendProtocolError("upstream choice has no numeric 'logprob'");
        }
        const double score = choice["logprob"].get<double>();
        if (!std::isfinite(score)) {
            throw BackendProtocolError("upstream logprob is not finite");
        }
        if (auto tactic = parse_completion(prefix, choice["text"].get<std::string>())) {
            out.push_back({std::move(*tactic), score});
        }
    }
    return out;
}

} // namespace

struct RemoteGenerator::Impl {
    explicit Impl(const RemoteBackendConfig &config)
        : url(split_url(config.endpoint_url)), slots(config.max_in_flight) {}

    SplitUrl url;
    std::counting_semaphore<kMaxInFlight> slots;
};

RemoteGenerator::RemoteGenerator(RemoteBackendConfig config) : config_(std::move(config)) {
    config_.validate();
    if (config_.max_in_flight > kMaxInFlight) {
        config_.max_in_flight = kMaxInFlight;
    }
    impl_ = std::make_unique<Impl>(config_);
}

RemoteGenerator::~RemoteGenerator() = default;

std::vector<Candidate> RemoteGenerator::generate(const TacticState &state, std::string_view prefix, int n) {
    if (n < 1) {
        return {};
    }
    const std::string prompt = encode_prompt(state, prefix);
    const int per_batch = config_.beam_width_or_samples;
    const int batches = (n + per_batch - 1) / per_batch;

    const auto deadline =
        Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(config_.request_timeout_s));

    std::vector<Candidate> collected;
    for (int b = 0; b < batches; ++b) {
        json body{{"model", config_.model_id},
                  {"prompt", prompt},
                  {"n", per_batch},
                  {"max_tokens", config_.max_new_tokens}};
        if (config_.decode_mode == DecodeMode::beam) {
            body["beam_width"] = per_batch;
            body["temperature"] = 0.0;
        } else {
            body["temperature"] = config_.temperature;
        }
        const std::string payload = body.dump();

        impl_->slots.acquire();
        struct Release {
            std::counting_semaphore<kMaxInFlight> &s;
            ~Release() { s.release(); }
        } release{impl_->slots};

        bool timed_out = false;
        std::string last_error;
        bool done = false;
        for (int attempt = 0; attempt <= config_.retries && !done; ++attempt) {
            const double remaining = std::chrono::duration<double>(deadline - Clock::now()).count();
            if (remaining <= 0.0) {
                timed_out = true;
                break;
            }
            httplib::Client client(impl_->url.scheme_host_port);
            set_timeout(client, remaining);
            auto res = client.Post(impl_->url.path, payload, "application/json");
            if (res && res->status >= 200 && res->status < 300) {
                auto batch = parse_choices(res->body, prefix);
                collected.insert(collected.end(), batch.begin(), batch.end());
                done = true;
                break;
            }
            if (res) {
                if (res->status != 429 && res->status < 500) {
                    throw BackendProtocolError("upstream rejected the request with HTTP " +
                                               std::to_string(res->status));
                }
                last_error = "HTTP " + std::to_string(res->status);
            } else {
                last_error = httplib::to_string(res.error());
                if (Clock::now() >= deadline) {
                    timed_out = true;
                    break;
                }
            }
            if (attempt < config_.retries) {
                const double backoff = config_.initial_backoff_s * std::pow(2.0, attempt);
                const double left = std::chrono::duration<double>(deadline - Clock::now()).count();
                const double wait = std::min({backoff, config_.request_timeout_s, std::max(left, 0.0)});
                std::this_thread::sleep_for(std::chrono::duration<double>(wait));
            }
        }
        if (!done) {
            if (timed_out || Clock::now() >= deadline) {
                throw DeadlineExceeded("remote backend did not answer within " +
                                       std::to_string(config_.request_timeout_s) + " s");
            }
            throw BackendUnavailable("remote backend unavailable after " + std::to_string(config_.retries + 1) +
                                     " attempts: " + last_error);
        }
    }

    auto out = score_normalize(std::move(collected));
    if (out.size() > static_cast<std::size_t>(n)) {
        out.resize(static_cast<std::size_t>(n));
    }
    return out;
}

bool RemoteGenerator::ready() {
    httplib::Client client(impl_->url.scheme_host_port);
    set_timeout(client, std::min(1.0, config_.request_timeout_s));
    auto res = client.Get("/");
    return static_cast<bool>(res);
}

std::vector<Candidate> generate_remote(const RemoteBackendConfig &config, const TacticState &state,
                                       std::string_view prefix, int n) {
    RemoteGenerator generator(config);
    return generator.generate(state, prefix, n);
}

} // namespace llmstep

#include "llmstep/external_adapter.hpp"

#include "llmstep/errors.hpp"
#include "llmstep/text.hpp"

#include <cerrno>
#include <cstring>
#include <istream>
#include <ostream>
#include <thread>

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

namespace llmstep {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

ExternalAdapter::Reply decode_reply(const std::string &line) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error &e) {
        throw EnvironmentUnavailable(std::string("adapter sent malformed JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string()) {
        throw EnvironmentUnavailable("adapter reply has no 'kind': " + line);
    }
    std::optional<std::string> state_id;
    if (auto it = doc.find("state_id"); it != doc.end() && it->is_string()) {
        state_id = it->get<std::string>();
    }
    const std::string kind = doc["kind"].get<std::string>();
    try {
        if (kind == "progress") {
            const std::string next = doc.value("next_state", std::string{});
            const std::size_t goals = doc.value("goal_count", std::size_t{1});
            return {ProverOutcome::progress(TacticState(next), goals), state_id};
        }
        if (kind == "completed") {
            return {ProverOutcome::completed(), state_id};
        }
        if (kind == "error") {
            std::string message = doc.value("message", std::string{});
            if (trim(message).empty()) {
                message = "adapter reported an error";
            }
            return {ProverOutcome::error(std::move(message)), std::nullopt};
        }
    } catch (const InvalidArgument &e) {
        throw EnvironmentUnavailable(std::string("adapter reply violates the outcome contract: ") + e.what());
    } catch (const json::exception &e) {
        throw EnvironmentUnavailable(std::string("adapter reply has a mistyped field: ") + e.what());
    }
    throw EnvironmentUnavailable("adapter reply has unknown kind '" + kind + "'");
}

} // namespace

ExternalAdapter::ExternalAdapter(std::vector<std::string> argv, std::chrono::milliseconds tactic_timeout)
    : argv_(std::move(argv)), tactic_timeout_(tactic_timeout) {
    if (argv_.empty()) {
        throw InvalidArgument("external adapter: empty command");
    }
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0) {
        throw EnvironmentUnavailable(std::string("socketpair failed: ") + std::strerror(errno));
    }
    std::vector<char *> args;
    for (auto &a : argv_) {
        args.push_back(a.data());
    }
    args.push_back(nullptr);

    const pid_t pid = ::fork();
    if (pid < 0) {
        ::close(sv[0]);
        ::close(sv[1]);
        throw EnvironmentUnavailable(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid == 0) {
        ::dup2(sv[1], STDIN_FILENO);
        ::dup2(sv[1], STDOUT_FILENO);
        ::execvp(args[0], args.data());
        ::_exit(127);
    }
    ::close(sv[1]);
    pid_ = pid;
    fd_ = sv[0];
}

ExternalAdapter::~ExternalAdapter() { terminate(); }

void ExternalAdapter::terminate() noexcept {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
    if (pid_ > 0) {
        // Closing the socket is the polite shutdown; escalate after a grace period.
        for (int i = 0; i < 20; ++i) {
            if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
                pid_ = -1;
                return;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(10));
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, nullptr, 0);
        pid_ = -1;
    }
    dead_ = true;
}

bool ExternalAdapter::alive() const noexcept { return !dead_ && fd_ >= 0; }

std::optional<std::string> ExternalAdapter::read_line(Clock::time_point deadline) {
    while (true) {
        if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
        if (remaining.count() <= 0) {
            return std::nullopt;
        }
        pollfd pfd{fd_, POLLIN, 0};
        const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
        if (ready < 0) {
            if (errno == EINTR) {
                continue;
            }
            dead_ = true;
            throw EnvironmentUnavailable(std::string("poll on adapter failed: ") + std::strerror(errno));
        }
        if (ready == 0) {
            continue;
        }
        char chunk[4096];
        const ssize_t got = ::recv(fd_, chunk, sizeof chunk, 0);
        if (got <= 0) {
            if (got < 0 && errno == EINTR) {
                continue;
            }
            dead_ = true;
            throw EnvironmentUnavailable("adapter process exited");
        }
        buffer_.append(chunk, static_cast<std::size_t>(got));
    }
}

ExternalAdapter::Reply ExternalAdapter::round_trip(const std::string &line) {
    if (!alive()) {
        throw EnvironmentUnavailable("adapter process is not running");
    }
    const std::string framed = line + "\n";
    std::size_t sent = 0;
    while (sent < framed.size()) {
        const ssize_t n = ::send(fd_, framed.data() + sent, framed.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            dead_ = true;
            throw EnvironmentUnavailable(std::string("write to adapter failed: ") + std::strerror(errno));
        }
        sent += static_cast<std::size_t>(n);
    }

    const auto deadline = Clock::now() + tactic_timeout_;
    while (stale_replies_ > 0) {
        if (!read_line(deadline)) {
            ++stale_replies_;
            return {ProverOutcome::error("tactic timeout after " + std::to_string(tactic_timeout_.count()) + " ms"),
                    std::nullopt};
        }
        --stale_replies_;
    }
    auto reply = read_line(deadline);
    if (!reply) {
        ++stale_replies_;
        return {ProverOutcome::error("tactic timeout after " + std::to_string(tactic_timeout_.count()) + " ms"),
                std::nullopt};
    }
    return decode_reply(*reply);
}

ExternalAdapter::Reply ExternalAdapter::init(std::string_view theorem) {
    return round_trip(json{{"op", "init"}, {"theorem", theorem}}.dump());
}

ExternalAdapter::Reply ExternalAdapter::apply(std::string_view state_id, std::string_view tactic) {
    return round_trip(json{{"op", "apply"}, {"state_id", state_id}, {"tactic", tactic}}.dump());
}

ProverOutcome external_adapter_apply(ExternalAdapter &adapter, std::string_view state_id, std::string_view tactic) {
    return adapter.apply(state_id, tactic).outcome;
}

// ---------------------------------------------------------------------------
// AdapterEnvironment

AdapterEnvironment::AdapterEnvironment(std::vector<std::string> argv, std::chrono::milliseconds tactic_timeout)
    : adapter_(std::move(argv), tactic_timeout) {}

ProverOutcome AdapterEnvironment::apply(const TacticState &state, std::string_view tactic) {
    std::lock_guard lock(mutex_);
    auto it = tokens_.find(state.key());
    if (it == tokens_.end()) {
        throw EnvironmentIntegrityError("state was never issued by the adapter: " + state.text());
    }
    auto reply = adapter_.apply(it->second, tactic);
    if (reply.outcome.is_progress()) {
        if (!reply.state_id) {
            throw EnvironmentUnavailable("adapter progress reply carries no state_id");
        }
        tokens_[reply.outcome.next_state()->key()] = *reply.state_id;
    }
    return std::move(reply.outcome);
}

TacticState AdapterEnvironment::open(std::string_view theorem_id, const TacticState & /*recorded_root*/) {
    std::lock_guard lock(mutex_);
    auto reply = adapter_.init(theorem_id);
    if (!reply.outcome.is_progress() || !reply.state_id) {
        throw EnvironmentIntegrityError("adapter could not open theorem '" + std::string(theorem_id) +
                                        "': " + reply.outcome.message());
    }
    tokens_[reply.outcome.next_state()->key()] = *reply.state_id;
    return *reply.outcome.next_state();
}

// ---------------------------------------------------------------------------
// Reference adapter over a simulated table

AdapterProtocolServer::AdapterProtocolServer(const SimProverTable &table, std::map<std::string, TacticState> roots)
    : table_(table), roots_(std::move(roots)) {}

std::string AdapterProtocolServer::token_for(const TacticState &state) {
    const std::string key = state.key();
    auto it = token_by_key_.find(key);
    if (it != token_by_key_.end()) {
        return it->second;
    }
    std::string token = "s" + std::to_string(token_by_key_.size());
    token_by_key_.emplace(key, token);
    state_by_token_.emplace(token, state);
    return token;
}

std::string AdapterProtocolServer::handle(std::string_view request_line) {
    auto error = [](const std::string &message) { return json{{"kind", "error"}, {"message", message}}.dump(); };
    json req;
    try {
        req = json::parse(request_line.begin(), request_line.end());
    } catch (const json::parse_error &) {
        return error("malformed request");
    }
    const std::string op = req.is_object() ? req.value("op", std::string{}) : std::string{};
    if (op == "init") {
        const std::string theorem = req.value("theorem", std::string{});
        const TacticState *root = nullptr;
        if (auto it = roots_.find(theorem); it != roots_.end()) {
            root = &it->second;
        } else if (roots_.empty() && table_.root()) {
            root = &*table_.root();
        }
        if (root == nullptr) {
            return error("unknown theorem '" + theorem + "'");
        }
        return json{{"kind", "progress"}, {"state_id", token_for(*root)}, {"next_state", root->text()},
                    {"goal_count", 1}}
            .dump();
    }
    if (op == "apply") {
        auto it = state_by_token_.find(req.value("state_id", std::string{}));
        if (it == state_by_token_.end()) {
            return error("unknown state_id");
        }
        const ProverOutcome *outcome = table_.find(it->second, req.value("tactic", std::string{}));
        if (outcome == nullptr) {
            return error(std::string(kUnknownTacticMessage));
        }
        json reply{{"kind", to_string(outcome->kind())}};
        if (outcome->is_progress()) {
            reply["state_id"] = token_for(*outcome->next_state());
            reply["next_state"] = outcome->next_state()->text();
            reply["goal_count"] = outcome->goal_count();
        } else if (outcome->is_error()) {
            reply["message"] = outcome->message();
        }
        return reply.dump();
    }
    return error("unknown op '" + op + "'");
}

void serve_adapter_protocol(const SimProverTable &table, const std::map<std::string, TacticState> &roots,
                            std::istream &in, std::ostream &out) {
    AdapterProtocolServer server(table, roots);
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) {
            continue;
        }
        out << server.handle(line) << '\n' << std::flush;
    }
}

} // namespace llmstep

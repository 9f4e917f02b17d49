#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include "factdebate/errors.hpp"
#include "json.hpp"

namespace factdebate::backend {

struct CompletionRequest {
    std::string role_id;  // which agent is asking, e.g. "mediator" or an advocate name
    std::string system_prompt;
    std::string user_prompt;
    double temperature = 0.0;
    int max_tokens = 2048;
    std::string model_id;

    void validate() const;  // throws ConfigError
};

struct CompletionResult {
    std::string text;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    std::int64_t latency_ms = 0;
};

class BackendError : public Error {
public:
    enum class Kind { timeout, rate_limited, malformed_response, unauthorized, server_error, transport };

    BackendError(Kind kind, const std::string& what, int attempts = 1,
                 std::optional<double> retry_after_s = std::nullopt)
        : Error(what), kind_(kind), attempts_(attempts), retry_after_s_(retry_after_s) {}

    Kind kind() const noexcept { return kind_; }
    int attempts() const noexcept { return attempts_; }
    // Seconds suggested by the server's Retry-After header, when sent.
    std::optional<double> retry_after() const noexcept { return retry_after_s_; }

private:
    Kind kind_;
    int attempts_;
    std::optional<double> retry_after_s_;
};

// Gateway to a text-completion model. Implementations are safe for concurrent calls.
class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResult complete(const CompletionRequest& request) = 0;
    // Model identifier used when a request leaves model_id empty.
    virtual std::string model_id() const = 0;
};

struct ScriptRule {
    std::string role_id;                       // empty matches every role
    std::vector<std::string> match_substrings;  // all must occur in user_prompt
    std::string response;
};

// Deterministic offline backend: the first rule whose role and substrings match wins,
// otherwise default_response.
class ScriptedBackend final : public Backend {
public:
    explicit ScriptedBackend(std::vector<ScriptRule> rules, std::string default_response = "",
                             std::string model_id = "scripted");
    ScriptedBackend(ScriptedBackend&& other) noexcept
        : rules_(std::move(other.rules_)),
          default_response_(std::move(other.default_response_)),
          model_id_(std::move(other.model_id_)),
          calls_(other.calls_.load()) {}

    // Either an array of rules or {"rules": [...], "default_response": "..."}. Rule fields:
    // role_id, match_substring (string or array of strings), response.
    static ScriptedBackend from_json(const nlohmann::json& doc);
    static ScriptedBackend load_file(const std::filesystem::path& path);
    nlohmann::json to_json() const;

    CompletionResult complete(const CompletionRequest& request) override;
    std::string model_id() const override { return model_id_; }

    const std::vector<ScriptRule>& rules() const { return rules_; }
    std::uint64_t call_count() const { return calls_.load(); }

private:
    std::vector<ScriptRule> rules_;
    std::string default_response_;
    std::string model_id_;
    std::atomic<std::uint64_t> calls_{0};
};

struct RemoteConfig {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
    std::string model_id = "gpt-4";
    std::chrono::milliseconds timeout{120'000};
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1'000};
    int max_in_flight = 4;

    // Overlays FACTDEBATE_API_KEY, FACTDEBATE_BASE_URL and FACTDEBATE_MODEL when set.
    static RemoteConfig from_env(RemoteConfig base);
    static RemoteConfig from_env();
};

inline constexpr int kMaxInFlightCap = 64;

// Chat-completion HTTP client ("messages" with system/user roles). Retries timeouts, 429s
// and 5xx responses with exponential backoff.
class RemoteBackend final : public Backend {
public:
    explicit RemoteBackend(RemoteConfig config);
    ~RemoteBackend() override;

    CompletionResult complete(const CompletionRequest& request) override;
    std::string model_id() const override { return config_.model_id; }
    const RemoteConfig& config() const { return config_; }

    // Request body for a completion, exposed for tests.
    static nlohmann::json request_body(const CompletionRequest& request, const std::string& model_id);
    // Parses a chat-completion response body; throws BackendError(malformed_response).
    static CompletionResult parse_response(const std::string& body);

private:
    CompletionResult attempt(const CompletionRequest& request, int attempt_no) const;

    RemoteConfig config_;
    std::string scheme_host_;
    std::string path_prefix_;
    std::counting_semaphore<kMaxInFlightCap> in_flight_;
};

}  // namespace factdebate::backend

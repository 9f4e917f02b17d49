#include <algorithm>
#include <cmath>
#include <thread>

#include "factdebate/backend.hpp"
#include "httplib.h"

namespace factdebate::backend {

namespace {

using Kind = BackendError::Kind;

bool retryable(Kind kind) {
    return kind == Kind::timeout || kind == Kind::rate_limited || kind == Kind::server_error ||
           kind == Kind::transport;
}

std::optional<double> parse_retry_after(const httplib::Response& res) {
    if (!res.has_header("Retry-After")) return std::nullopt;
    try {
        return std::stod(res.get_header_value("Retry-After"));
    } catch (const std::exception&) {
        return std::nullopt;  // HTTP-date form is not interpreted
    }
}

struct SemaphoreGuard {
    explicit SemaphoreGuard(std::counting_semaphore<kMaxInFlightCap>& s) : sem(s) { sem.acquire(); }
    ~SemaphoreGuard() { sem.release(); }
    SemaphoreGuard(const SemaphoreGuard&) = delete;
    SemaphoreGuard& operator=(const SemaphoreGuard&) = delete;
    std::counting_semaphore<kMaxInFlightCap>& sem;
};

}  // namespace

RemoteBackend::RemoteBackend(RemoteConfig config)
    : config_(std::move(config)),
      in_flight_(std::clamp(config_.max_in_flight, 1, kMaxInFlightCap)) {
    if (config_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
    const auto scheme_end = config_.base_url.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("backend base URL must include a scheme: " + config_.base_url);
    }
    const auto path_start = config_.base_url.find('/', scheme_end + 3);
    scheme_host_ = config_.base_url.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : config_.base_url.substr(path_start);
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (config_.base_url.rfind("https://", 0) == 0) {
        throw ConfigError("this build has no TLS support; use an http:// base URL");
    }
#endif
}

RemoteBackend::~RemoteBackend() = default;

nlohmann::json RemoteBackend::request_body(const CompletionRequest& request, const std::string& model_id) {
    return {{"model", request.model_id.empty() ? model_id : request.model_id},
            {"temperature", request.temperature},
            {"max_tokens", request.max_tokens},
            {"messages",
             nlohmann::json::array({{{"role", "system"}, {"content", request.system_prompt}},
                                    {{"role", "user"}, {"content", request.user_prompt}}})}};
}

CompletionResult RemoteBackend::parse_response(const std::string& body) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
        throw BackendError(Kind::malformed_response, "completion response is not JSON");
    }
    CompletionResult result;
    try {
        const auto& message = doc.at("choices").at(0).at("message");
        const auto& content = message.contains("content") ? message["content"] : nlohmann::json();
        if (content.is_string()) {
            result.text = content.get<std::string>();
        } else if (message.contains("refusal") && message["refusal"].is_string()) {
            result.text = message["refusal"].get<std::string>();
        } else {
            throw BackendError(Kind::malformed_response, "completion response has no message content");
        }
        if (doc.contains("usage") && doc["usage"].is_object()) {
            result.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
            result.completion_tokens = doc["usage"].value("completion_tokens", 0);
        }
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(Kind::malformed_response, std::string("malformed completion response: ") + e.what());
    }
    return result;
}

CompletionResult RemoteBackend::attempt(const CompletionRequest& request, int attempt_no) const {
    httplib::Client client(scheme_host_);
    const auto timeout = config_.timeout;
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                  static_cast<time_t>((timeout.count() % 1000) * 1000));
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                            static_cast<time_t>((timeout.count() % 1000) * 1000));
    client.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                             static_cast<time_t>((timeout.count() % 1000) * 1000));
    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    const auto body = request_body(request, config_.model_id).dump();
    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path_prefix_ + "/chat/completions", headers, body, "application/json");
    if (!res) {
        const auto err = res.error();
        const auto kind = (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read)
                              ? Kind::timeout
                              : Kind::transport;
        throw BackendError(kind, "completion request failed: " + httplib::to_string(err), attempt_no);
    }
    if (res->status == 401 || res->status == 403) {
        throw BackendError(Kind::unauthorized, "backend rejected credentials (HTTP " +
                                                   std::to_string(res->status) + ")",
                           attempt_no);
    }
    if (res->status == 429) {
        throw BackendError(Kind::rate_limited, "backend rate limit (HTTP 429)", attempt_no,
                           parse_retry_after(*res));
    }
    if (res->status == 408 || res->status == 504) {
        throw BackendError(Kind::timeout, "backend timeout (HTTP " + std::to_string(res->status) + ")",
                           attempt_no);
    }
    if (res->status >= 500) {
        throw BackendError(Kind::server_error, "backend error (HTTP " + std::to_string(res->status) + ")",
                           attempt_no);
    }
    if (res->status != 200) {
        throw BackendError(Kind::malformed_response,
                           "unexpected HTTP status " + std::to_string(res->status), attempt_no);
    }
    auto result = parse_response(res->body);
    result.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - started)
                            .count();
    return result;
}

CompletionResult RemoteBackend::complete(const CompletionRequest& request) {
    request.validate();
    SemaphoreGuard guard(in_flight_);
    auto backoff = config_.initial_backoff;
    for (int attempt_no = 1;; ++attempt_no) {
        try {
            return attempt(request, attempt_no);
        } catch (const BackendError& e) {
            if (!retryable(e.kind()) || attempt_no >= config_.max_attempts) {
                throw BackendError(e.kind(), e.what(), attempt_no, e.retry_after());
            }
            auto wait = backoff;
            if (e.retry_after()) {
                const auto hinted = std::chrono::milliseconds(
                    static_cast<std::int64_t>(std::min(*e.retry_after(), 60.0) * 1000.0));
                wait = std::max(wait, hinted);
            }
            std::this_thread::sleep_for(wait);
            backoff *= 2;
        }
    }
}

}  // namespace factdebate::backend

#include <atomic>
#include <cstdlib>
#include <thread>

#include "doctest.h"
#include "factdebate/backend.hpp"
#include "httplib.h"

using namespace factdebate;
using namespace factdebate::backend;

namespace {

CompletionRequest request(std::string role, std::string user) {
    CompletionRequest r;
    r.role_id = std::move(role);
    r.system_prompt = "system";
    r.user_prompt = std::move(user);
    return r;
}

// Local HTTP server answering chat-completion posts through `handler`.
class StubServer {
public:
    explicit StubServer(httplib::Server::Handler handler) {
        server_.Post("/v1/chat/completions", [this, handler](const httplib::Request& req, httplib::Response& res) {
            ++hits;
            handler(req, res);
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~StubServer() {
        server_.stop();
        thread_.join();
    }
    std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

    std::atomic<int> hits{0};

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

RemoteConfig fast_config(const std::string& url) {
    RemoteConfig c;
    c.base_url = url;
    c.api_key = "test-key";
    c.model_id = "stub-model";
    c.timeout = std::chrono::milliseconds(2000);
    c.initial_backoff = std::chrono::milliseconds(5);
    return c;
}

const char* kOkBody =
    R"({"choices":[{"message":{"role":"assistant","content":"The claim is [[correct]]."}}],)"
    R"("usage":{"prompt_tokens":11,"completion_tokens":5}})";

}  // namespace

TEST_SUITE("backend") {

TEST_CASE("scripted: first matching rule wins, every time") {
    ScriptedBackend b({{"mediator", {"Round 1"}, "final [[incorrect]]"},
                       {"mediator", {}, "generic"},
                       {"", {"Round 1", "ice"}, "any role"}},
                      "fallback");
    auto r = request("mediator", "Round 1\nClaim: x");
    const auto first = b.complete(r).text;
    CHECK(first == "final [[incorrect]]");
    for (int i = 0; i < 5; ++i) CHECK(b.complete(r).text == first);
    CHECK(b.complete(request("mediator", "Round 2")).text == "generic");
    CHECK(b.complete(request("IPCC", "Round 1 ice")).text == "any role");
    CHECK(b.complete(request("IPCC", "Round 1")).text == "fallback");
    CHECK(b.call_count() == 9);
}

TEST_CASE("scripted: json forms") {
    auto doc = nlohmann::json::parse(R"({
      "default_response": "none",
      "rules": [
        {"role_id": "WMO", "match_substring": "drought", "response": "a"},
        {"match_substring": ["x", "y"], "response": "b"}
      ]})");
    auto b = ScriptedBackend::from_json(doc);
    REQUIRE(b.rules().size() == 2);
    CHECK(b.rules()[1].match_substrings == std::vector<std::string>{"x", "y"});
    CHECK(b.complete(request("WMO", "drought")).text == "a");
    CHECK(b.complete(request("Q", "y x")).text == "b");
    CHECK(b.complete(request("Q", "x")).text == "none");
    auto again = ScriptedBackend::from_json(b.to_json());
    CHECK(again.to_json() == b.to_json());
    CHECK_THROWS_AS(ScriptedBackend::from_json(nlohmann::json::parse(R"([{"role_id": 3}])")), ConfigError);
}

TEST_CASE("request validation") {
    ScriptedBackend b({}, "x");
    auto r = request("", "hi");
    CHECK_THROWS_AS(b.complete(r), ConfigError);
    r = request("a", "hi");
    r.max_tokens = 0;
    CHECK_THROWS_AS(b.complete(r), ConfigError);
    r = request("a", "hi");
    r.temperature = -1;
    CHECK_THROWS_AS(b.complete(r), ConfigError);
}

TEST_CASE("request body and response parsing") {
    auto r = request("IPCC", "hello");
    r.temperature = 0.5;
    auto body = RemoteBackend::request_body(r, "m1");
    CHECK(body["model"] == "m1");
    CHECK(body["messages"][0]["role"] == "system");
    CHECK(body["messages"][1]["content"] == "hello");
    auto parsed = RemoteBackend::parse_response(kOkBody);
    CHECK(parsed.text == "The claim is [[correct]].");
    CHECK(parsed.prompt_tokens == 11);
    try {
        RemoteBackend::parse_response("not json");
        FAIL("accepted");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendError::Kind::malformed_response);
    }
    CHECK_THROWS_AS(RemoteBackend::parse_response(R"({"choices":[]})"), BackendError);
}

TEST_CASE("remote: success against a stub server") {
    std::string auth;
    StubServer server([&](const httplib::Request& req, httplib::Response& res) {
        auth = req.get_header_value("Authorization");
        res.set_content(kOkBody, "application/json");
    });
    RemoteBackend b(fast_config(server.base_url()));
    auto result = b.complete(request("IPCC", "hello"));
    CHECK(result.text == "The claim is [[correct]].");
    CHECK(auth == "Bearer test-key");
    CHECK(server.hits == 1);
}

TEST_CASE("remote: three 429s surface as rate_limited after retries") {
    StubServer server([](const httplib::Request&, httplib::Response& res) {
        res.status = 429;
        res.set_content("slow down", "text/plain");
    });
    RemoteBackend b(fast_config(server.base_url()));
    try {
        b.complete(request("IPCC", "hello"));
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendError::Kind::rate_limited);
        CHECK(e.attempts() == 3);
    }
    CHECK(server.hits == 3);
}

TEST_CASE("remote: transient errors then success") {
    std::atomic<int> calls{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        if (++calls < 3) {
            res.status = 503;
            return;
        }
        res.set_content(kOkBody, "application/json");
    });
    RemoteBackend b(fast_config(server.base_url()));
    CHECK(b.complete(request("IPCC", "hello")).text.find("[[correct]]") != std::string::npos);
    CHECK(server.hits == 3);
}

TEST_CASE("remote: Retry-After is honoured") {
    std::atomic<int> calls{0};
    StubServer server([&](const httplib::Request&, httplib::Response& res) {
        if (++calls == 1) {
            res.status = 429;
            res.set_header("Retry-After", "0.3");
            return;
        }
        res.set_content(kOkBody, "application/json");
    });
    RemoteBackend b(fast_config(server.base_url()));
    const auto t0 = std::chrono::steady_clock::now();
    b.complete(request("IPCC", "hello"));
    CHECK(std::chrono::steady_clock::now() - t0 >= std::chrono::milliseconds(300));
}

TEST_CASE("remote: 401 is not retried") {
    StubServer server([](const httplib::Request&, httplib::Response& res) { res.status = 401; });
    RemoteBackend b(fast_config(server.base_url()));
    try {
        b.complete(request("IPCC", "hello"));
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendError::Kind::unauthorized);
    }
    CHECK(server.hits == 1);
}

TEST_CASE("remote: malformed body") {
    StubServer server([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"nothing": true})", "application/json");
    });
    RemoteBackend b(fast_config(server.base_url()));
    try {
        b.complete(request("IPCC", "hello"));
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.kind() == BackendError::Kind::malformed_response);
    }
}

TEST_CASE("remote: connection refused is a transport failure") {
    std::string url;
    {
        StubServer server([](const httplib::Request&, httplib::Response&) {});
        url = server.base_url();
    }
    auto cfg = fast_config(url);
    cfg.max_attempts = 2;
    RemoteBackend b(cfg);
    try {
        b.complete(request("IPCC", "hello"));
        FAIL("expected BackendError");
    } catch (const BackendError& e) {
        CHECK(e.attempts() == 2);
    }
}

TEST_CASE("credentials come from the environment") {
    ::setenv("FACTDEBATE_API_KEY", "env-key", 1);
    ::setenv("FACTDEBATE_MODEL", "env-model", 1);
    auto c = RemoteConfig::from_env();
    CHECK(c.api_key == "env-key");
    CHECK(c.model_id == "env-model");
    ::unsetenv("FACTDEBATE_API_KEY");
    ::unsetenv("FACTDEBATE_MODEL");
    CHECK(RemoteConfig::from_env().api_key.empty());
    CHECK_THROWS_AS(RemoteBackend(RemoteConfig{.base_url = "no-scheme"}), ConfigError);
}

}  // TEST_SUITE

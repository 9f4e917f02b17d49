#include "factdebate/backend.hpp"

#include <fstream>
#include <sstream>

namespace factdebate::backend {

namespace {

int whitespace_tokens(const std::string& text) {
    int n = 0;
    bool in_token = false;
    for (char c : text) {
        const bool space = c == ' ' || c == '\n' || c == '\t' || c == '\r';
        if (!space && !in_token) ++n;
        in_token = !space;
    }
    return n;
}

}  // namespace

void CompletionRequest::validate() const {
    if (role_id.empty()) throw ConfigError("completion request without a role id");
    if (system_prompt.empty() || user_prompt.empty()) {
        throw ConfigError("completion request for '" + role_id + "' has an empty prompt");
    }
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        throw ConfigError("temperature must lie in [0, 2]");
    }
    if (max_tokens < 1) throw ConfigError("max_tokens must be at least 1");
}

ScriptedBackend::ScriptedBackend(std::vector<ScriptRule> rules, std::string default_response,
                                 std::string model_id)
    : rules_(std::move(rules)),
      default_response_(std::move(default_response)),
      model_id_(std::move(model_id)) {}

ScriptedBackend ScriptedBackend::from_json(const nlohmann::json& doc) {
    const nlohmann::json* rules = &doc;
    std::string fallback;
    std::string model = "scripted";
    if (doc.is_object()) {
        if (!doc.contains("rules") || !doc["rules"].is_array()) {
            throw ConfigError("scripted backend document needs a 'rules' array");
        }
        rules = &doc["rules"];
        fallback = doc.value("default_response", std::string());
        model = doc.value("model_id", model);
    } else if (!doc.is_array()) {
        throw ConfigError("scripted backend rules must be a JSON array or object");
    }
    std::vector<ScriptRule> parsed;
    for (const auto& r : *rules) {
        if (!r.is_object() || !r.contains("response") || !r["response"].is_string()) {
            throw ConfigError("every scripted rule needs a string 'response'");
        }
        ScriptRule rule;
        rule.role_id = r.value("role_id", std::string());
        rule.response = r["response"].get<std::string>();
        if (auto it = r.find("match_substring"); it != r.end()) {
            if (it->is_string()) {
                rule.match_substrings.push_back(it->get<std::string>());
            } else if (it->is_array()) {
                for (const auto& s : *it) rule.match_substrings.push_back(s.get<std::string>());
            } else {
                throw ConfigError("match_substring must be a string or an array of strings");
            }
        }
        parsed.push_back(std::move(rule));
    }
    return ScriptedBackend(std::move(parsed), std::move(fallback), std::move(model));
}

ScriptedBackend ScriptedBackend::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read scripted backend rules " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return from_json(nlohmann::json::parse(buf.str()));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("scripted backend rules " + path.string() + ": " + e.what());
    }
}

nlohmann::json ScriptedBackend::to_json() const {
    nlohmann::json doc;
    doc["model_id"] = model_id_;
    doc["default_response"] = default_response_;
    auto& rules = doc["rules"] = nlohmann::json::array();
    for (const auto& r : rules_) {
        nlohmann::json row{{"role_id", r.role_id}, {"response", r.response}};
        if (r.match_substrings.size() == 1) {
            row["match_substring"] = r.match_substrings.front();
        } else {
            row["match_substring"] = r.match_substrings;
        }
        rules.push_back(std::move(row));
    }
    return doc;
}

CompletionResult ScriptedBackend::complete(const CompletionRequest& request) {
    request.validate();
    ++calls_;
    const std::string* text = &default_response_;
    for (const auto& rule : rules_) {
        if (!rule.role_id.empty() && rule.role_id != request.role_id) continue;
        bool all = true;
        for (const auto& s : rule.match_substrings) {
            if (request.user_prompt.find(s) == std::string::npos) {
                all = false;
                break;
            }
        }
        if (all) {
            text = &rule.response;
            break;
        }
    }
    CompletionResult result;
    result.text = *text;
    result.prompt_tokens = whitespace_tokens(request.system_prompt) + whitespace_tokens(request.user_prompt);
    result.completion_tokens = whitespace_tokens(result.text);
    return result;
}

RemoteConfig RemoteConfig::from_env() { return from_env(RemoteConfig{}); }

RemoteConfig RemoteConfig::from_env(RemoteConfig base) {
    if (const char* key = std::getenv("FACTDEBATE_API_KEY")) base.api_key = key;
    if (const char* url = std::getenv("FACTDEBATE_BASE_URL")) base.base_url = url;
    if (const char* model = std::getenv("FACTDEBATE_MODEL")) base.model_id = model;
    return base;
}

}  // namespace factdebate::backend

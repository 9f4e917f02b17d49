#include "factdebate/prompt_template.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "factdebate/default_assets.hpp"
#include "factdebate/errors.hpp"

namespace factdebate::agents {

namespace {

bool is_slot_char(char c) { return (c >= 'A' && c <= 'Z') || c == '_'; }

// Required slots per role.
std::vector<std::string_view> required_slots(std::string_view role) {
    if (role == "advocate" || role == "denier") return {"CLAIM", "EVIDENCE", "HISTORY"};
    if (role == "plain_model") return {"CLAIM", "HISTORY"};
    if (role == "arbitrator" || role == "neutral_arbitrator") return {"CLAIM", "ROSTER"};
    return {"CLAIM"};
}

std::string strip_trailing_newlines(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

}  // namespace

PromptTemplate PromptTemplate::parse(std::string_view text, std::string id) {
    PromptTemplate t;
    t.id_ = std::move(id);
    std::string* section = nullptr;
    bool saw_system = false;
    bool saw_user = false;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line == "[system]") {
            section = &t.system_;
            saw_system = true;
            continue;
        }
        if (line == "[user]") {
            section = &t.user_;
            saw_user = true;
            continue;
        }
        if (!section) {
            if (line.find_first_not_of(" \t") == std::string::npos) continue;
            throw ConfigError("template '" + t.id_ + "': text before the [system] section");
        }
        section->append(line);
        section->push_back('\n');
    }
    if (!saw_system || !saw_user) {
        throw ConfigError("template '" + t.id_ + "' needs [system] and [user] sections");
    }
    t.system_ = strip_trailing_newlines(std::move(t.system_));
    t.user_ = strip_trailing_newlines(std::move(t.user_));

    std::set<std::string> seen;
    for (const std::string* part : {&t.system_, &t.user_}) {
        const auto& s = *part;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (s[i] != '{') continue;
            std::size_t j = i + 1;
            while (j < s.size() && is_slot_char(s[j])) ++j;
            if (j == i + 1 || j >= s.size() || s[j] != '}') continue;
            const auto name = s.substr(i + 1, j - i - 1);
            if (std::find(kPlaceholders.begin(), kPlaceholders.end(), name) == kPlaceholders.end()) {
                throw ConfigError("template '" + t.id_ + "': unresolved placeholder {" + name + "}");
            }
            if (seen.insert(name).second) t.placeholders_.push_back(name);
        }
    }
    for (auto slot : required_slots(t.id_)) {
        if (!seen.count(std::string(slot))) {
            throw ConfigError("template '" + t.id_ + "' is missing required placeholder {" +
                              std::string(slot) + "}");
        }
    }
    return t;
}

bool PromptTemplate::uses(std::string_view slot) const {
    return std::find(placeholders_.begin(), placeholders_.end(), slot) != placeholders_.end();
}

std::string PromptTemplate::render(const std::string& text, const Slots& slots) const {
    std::string out;
    out.reserve(text.size() * 2);
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '{') {
            std::size_t j = i + 1;
            while (j < text.size() && is_slot_char(text[j])) ++j;
            if (j > i + 1 && j < text.size() && text[j] == '}') {
                const auto name = std::string_view(text).substr(i + 1, j - i - 1);
                auto it = slots.find(name);
                if (it != slots.end()) out += it->second;
                i = j;
                continue;
            }
        }
        out.push_back(text[i]);
    }
    return out;
}

const TemplateSet& TemplateSet::defaults() {
    static const TemplateSet set = [] {
        TemplateSet s;
        s.insert(PromptTemplate::parse(assets::template_advocate, "advocate"));
        s.insert(PromptTemplate::parse(assets::template_plain_model, "plain_model"));
        s.insert(PromptTemplate::parse(assets::template_arbitrator, "arbitrator"));
        s.insert(PromptTemplate::parse(assets::template_denier, "denier"));
        s.insert(PromptTemplate::parse(assets::template_neutral_arbitrator, "neutral_arbitrator"));
        return s;
    }();
    return set;
}

TemplateSet TemplateSet::load_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw ConfigError("template directory " + dir.string() + " does not exist");
    }
    TemplateSet set = defaults();
    for (auto role : kTemplateRoles) {
        const auto path = dir / (std::string(role) + ".txt");
        if (!std::filesystem::exists(path)) continue;
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot read template " + path.string());
        std::stringstream buf;
        buf << in.rdbuf();
        set.templates_.erase(std::string(role));
        set.insert(PromptTemplate::parse(buf.str(), std::string(role)));
    }
    return set;
}

const PromptTemplate& TemplateSet::get(std::string_view role) const {
    auto it = templates_.find(role);
    if (it == templates_.end()) throw ConfigError("no prompt template '" + std::string(role) + "'");
    return it->second;
}

bool TemplateSet::contains(std::string_view role) const { return templates_.find(role) != templates_.end(); }

void TemplateSet::insert(PromptTemplate t) {
    auto id = t.id();
    templates_.emplace(std::move(id), std::move(t));
}

}  // namespace factdebate::agents

#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace factdebate::agents {

// Slot names a template may reference as {NAME}.
inline constexpr std::array<std::string_view, 7> kPlaceholders{
    "CLAIM", "EVIDENCE", "HISTORY", "ROSTER", "ROUND", "LABELS", "ADVOCATE"};

// Template role ids; each ships as <id>.txt.
inline constexpr std::array<std::string_view, 5> kTemplateRoles{
    "advocate", "plain_model", "arbitrator", "denier", "neutral_arbitrator"};

using Slots = std::map<std::string, std::string, std::less<>>;

// A two-section prompt ("[system]" and "[user]" header lines) with {NAME} slots.
// Unknown uppercase slots are rejected at parse time; substitution is single-pass, so slot
// values are never re-expanded.
class PromptTemplate {
public:
    static PromptTemplate parse(std::string_view text, std::string id);

    const std::string& id() const { return id_; }
    const std::vector<std::string>& placeholders() const { return placeholders_; }
    bool uses(std::string_view slot) const;

    std::string render_system(const Slots& slots) const { return render(system_, slots); }
    std::string render_user(const Slots& slots) const { return render(user_, slots); }

private:
    std::string render(const std::string& text, const Slots& slots) const;

    std::string id_;
    std::string system_;
    std::string user_;
    std::vector<std::string> placeholders_;
};

class TemplateSet {
public:
    // The compiled-in templates.
    static const TemplateSet& defaults();
    // Loads <role>.txt for every role from `dir`; roles without a file keep the default.
    static TemplateSet load_dir(const std::filesystem::path& dir);

    const PromptTemplate& get(std::string_view role) const;  // throws ConfigError
    bool contains(std::string_view role) const;

private:
    void insert(PromptTemplate t);
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

}  // namespace factdebate::agents

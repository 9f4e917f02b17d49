#pragma once

#include <array>
#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace factdebate::taxonomy {

// Consolidation levels, ordered from finest to coarsest.
enum class Level { fine = 0, seven = 1, five = 2, binary = 3 };

inline constexpr std::array<Level, 4> kAllLevels{Level::fine, Level::seven, Level::five,
                                                 Level::binary};

std::string_view to_string(Level level);
Level level_from_string(std::string_view name);

inline constexpr std::string_view kNei = "nei";
inline constexpr std::string_view kFollowUp = "follow_up_question";
inline constexpr std::string_view kCorrect = "correct";
inline constexpr std::string_view kIncorrect = "incorrect";

struct VerdictLabel {
    std::string token;
    std::string display;

    bool is_nei() const { return token == kNei; }
    bool is_follow_up() const { return token == kFollowUp; }

    friend bool operator==(const VerdictLabel& a, const VerdictLabel& b) {
        return a.token == b.token;
    }
    friend std::strong_ordering operator<=>(const VerdictLabel& a, const VerdictLabel& b) {
        return a.token <=> b.token;
    }
};

enum class Polarity { correct, incorrect, nei };

// Lowercases, trims, turns "\_" into "_" and collapses whitespace/hyphen runs into "_".
// Idempotent.
std::string canonicalize(std::string_view raw);

// True when `token` matches [a-z][a-z_]*.
bool is_valid_token(std::string_view token);

// Immutable verdict vocabulary plus its consolidation maps. Safe for concurrent reads.
class Taxonomy {
public:
    static Taxonomy from_json(const nlohmann::json& doc);
    static Taxonomy parse(std::string_view text);
    static Taxonomy load_file(const std::filesystem::path& path);
    // The compiled-in default vocabulary.
    static const Taxonomy& default_taxonomy();

    const std::string& version() const { return version_; }

    // Fine labels in configuration order, including nei and follow_up_question.
    const std::vector<VerdictLabel>& labels() const { return labels_; }
    // Fine labels that may be final verdicts (everything except follow_up_question).
    std::vector<VerdictLabel> final_labels() const;
    // Distinct images at `level`, in first-seen order of the fine labels.
    std::vector<VerdictLabel> level_labels(Level level) const;

    // Resolves a canonical token (or alias) against the fine vocabulary.
    std::optional<VerdictLabel> find(std::string_view token) const;
    VerdictLabel label(std::string_view token) const;  // throws UnknownLabel
    VerdictLabel nei() const { return label(kNei); }
    VerdictLabel follow_up() const { return label(kFollowUp); }

    // Image of `label` at `level`. Accepts fine labels and coarse labels of any level at or
    // below `level`; identity at Level::fine.
    VerdictLabel consolidate(const VerdictLabel& label, Level level) const;
    Polarity polarity(const VerdictLabel& label) const;

    nlohmann::json to_json() const;

private:
    Taxonomy() = default;
    VerdictLabel coarse_label(const std::string& token) const;
    std::optional<Level> finest_level_of(const std::string& token) const;

    std::string version_;
    std::vector<VerdictLabel> labels_;
    std::map<std::string, std::size_t, std::less<>> index_;      // token -> labels_ slot
    std::map<std::string, std::string, std::less<>> aliases_;    // alias -> token
    std::map<std::string, std::vector<std::string>, std::less<>> alias_lists_;
    // maps_[level][fine token] = coarse token; level 0 unused.
    std::array<std::map<std::string, std::string, std::less<>>, 4> maps_;
};

// Canonicalized contents of every [[...]] occurrence, in order of appearance.
std::vector<std::string> bracket_tokens(std::string_view raw_text);

struct VerdictParse {
    enum class Status { ok, unparseable, unknown_label };
    Status status = Status::unparseable;
    std::optional<VerdictLabel> label;
    std::string unknown_token;  // set when status == unknown_label
};

// Non-throwing form of parse_verdict.
VerdictParse try_parse_verdict(std::string_view raw_text, const Taxonomy& taxonomy);

// Last bracketed token that names a known label. Throws UnparseableVerdict when no bracket
// is present and UnknownLabel when brackets exist but none is a known label.
VerdictLabel parse_verdict(std::string_view raw_text, const Taxonomy& taxonomy);

// "[[token]]"
std::string format_verdict(const VerdictLabel& label);

}  // namespace factdebate::taxonomy

#include "factdebate/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "factdebate/default_assets.hpp"
#include "factdebate/errors.hpp"

namespace factdebate::taxonomy {

namespace {

constexpr std::array<std::string_view, 4> kLevelNames{"fine", "seven", "five", "binary"};

std::string humanize(std::string_view token) {
    std::string out(token);
    std::replace(out.begin(), out.end(), '_', ' ');
    return out;
}

std::size_t level_slot(Level level) { return static_cast<std::size_t>(level); }

}  // namespace

std::string_view to_string(Level level) { return kLevelNames[level_slot(level)]; }

Level level_from_string(std::string_view name) {
    for (Level level : kAllLevels) {
        if (to_string(level) == name) return level;
    }
    throw ConfigError("unknown taxonomy level '" + std::string(name) +
                      "' (expected fine, seven, five or binary)");
}

std::string canonicalize(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    bool pending_sep = false;
    for (char ch : raw) {
        auto c = static_cast<unsigned char>(ch);
        if (c == '\\') continue;
        if (std::isspace(c) || c == '_' || c == '-') {
            pending_sep = true;
            continue;
        }
        if (pending_sep && !out.empty()) out.push_back('_');
        pending_sep = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

bool is_valid_token(std::string_view token) {
    if (token.empty() || token.front() < 'a' || token.front() > 'z') return false;
    return std::all_of(token.begin(), token.end(),
                       [](char c) { return (c >= 'a' && c <= 'z') || c == '_'; });
}

Taxonomy Taxonomy::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw ConfigError("taxonomy document must be a JSON object");
    Taxonomy tx;
    tx.version_ = doc.value("version", std::string("unversioned"));

    const auto labels_it = doc.find("labels");
    if (labels_it == doc.end() || !labels_it->is_array()) {
        throw ConfigError("taxonomy document needs a 'labels' array");
    }
    auto add_label = [&tx](const std::string& token, std::string display) {
        if (!is_valid_token(token)) throw TaxonomyError(token, "invalid label token");
        if (tx.index_.count(token) || tx.aliases_.count(token)) {
            throw TaxonomyError(token, "duplicate label");
        }
        if (display.empty()) display = humanize(token);
        tx.index_.emplace(token, tx.labels_.size());
        tx.labels_.push_back({token, std::move(display)});
    };
    for (const auto& entry : *labels_it) {
        if (!entry.is_object() || !entry.contains("token") || !entry["token"].is_string()) {
            throw ConfigError("every taxonomy label needs a string 'token'");
        }
        const std::string token = entry["token"].get<std::string>();
        add_label(token, entry.value("display", std::string()));
        for (const auto& alias : entry.value("aliases", nlohmann::json::array())) {
            const std::string a = canonicalize(alias.get<std::string>());
            if (tx.index_.count(a) || tx.aliases_.count(a)) {
                throw TaxonomyError(a, "duplicate label");
            }
            tx.aliases_.emplace(a, token);
            tx.alias_lists_[token].push_back(a);
        }
    }
    if (!tx.index_.count(kNei)) add_label(std::string(kNei), "NEI");
    if (!tx.index_.count(kFollowUp)) add_label(std::string(kFollowUp), "follow-up question");

    const auto levels_it = doc.find("levels");
    if (levels_it == doc.end() || !levels_it->is_object()) {
        throw ConfigError("taxonomy document needs a 'levels' object");
    }
    for (Level level : {Level::seven, Level::five, Level::binary}) {
        const auto name = std::string(to_string(level));
        if (!levels_it->contains(name) || !(*levels_it)[name].is_array()) {
            throw ConfigError("taxonomy level '" + name + "' is missing");
        }
        auto& map = tx.maps_[level_slot(level)];
        for (const auto& entry : (*levels_it)[name]) {
            const std::string token = entry.value("token", std::string());
            const std::string target = entry.value("maps_to", std::string());
            if (token == kFollowUp) {
                throw TaxonomyError(token, "follow_up_question cannot have an image at level " + name);
            }
            if (!tx.index_.count(token)) {
                throw TaxonomyError(token, "level " + name + " maps an undeclared label");
            }
            if (!is_valid_token(target)) {
                throw TaxonomyError(token, "invalid maps_to at level " + name);
            }
            if (!map.emplace(token, target).second) {
                throw TaxonomyError(token, "duplicate label at level " + name);
            }
        }
        for (const auto& label : tx.labels_) {
            if (label.is_follow_up()) continue;
            auto it = map.find(label.token);
            if (it == map.end()) {
                throw TaxonomyError(label.token, "missing image at level " + name);
            }
            if (label.is_nei() && it->second != kNei) {
                throw TaxonomyError(label.token, "nei must map to nei at level " + name);
            }
            if (!label.is_nei() && it->second == kNei) {
                throw TaxonomyError(label.token, "only nei may map to nei at level " + name);
            }
        }
    }

    // Binary images are exactly {correct, incorrect, nei}.
    {
        std::set<std::string> images;
        for (const auto& [fine, coarse] : tx.maps_[level_slot(Level::binary)]) images.insert(coarse);
        for (const auto& img : images) {
            if (img != kCorrect && img != kIncorrect && img != kNei) {
                throw TaxonomyError(img, "binary level may only use correct/incorrect/nei");
            }
        }
        for (auto required : {kCorrect, kIncorrect}) {
            if (!images.count(std::string(required))) {
                throw TaxonomyError(std::string(required), "binary level has no label mapped to");
            }
        }
    }

    // Labels merged at a level stay merged at every coarser level.
    const std::array<Level, 3> chain{Level::seven, Level::five, Level::binary};
    for (std::size_t i = 0; i + 1 < chain.size(); ++i) {
        const auto& finer = tx.maps_[level_slot(chain[i])];
        const auto& coarser = tx.maps_[level_slot(chain[i + 1])];
        std::map<std::string, std::string> group_image;
        for (const auto& label : tx.labels_) {
            if (label.is_follow_up()) continue;
            const auto& group = finer.at(label.token);
            const auto& image = coarser.at(label.token);
            auto [it, inserted] = group_image.emplace(group, image);
            if (!inserted && it->second != image) {
                throw TaxonomyError(label.token,
                                    "monotonicity violation between levels " +
                                        std::string(to_string(chain[i])) + " and " +
                                        std::string(to_string(chain[i + 1])));
            }
        }
    }

    // A coarse token that is also a fine label must be its own image, and a coarse token
    // reused at a coarser level must keep (or widen) its group.
    std::map<std::string, std::pair<Level, std::set<std::string>>> seen;
    for (Level level : chain) {
        std::map<std::string, std::set<std::string>> groups;
        for (const auto& [fine, coarse] : tx.maps_[level_slot(level)]) groups[coarse].insert(fine);
        for (const auto& [coarse, members] : groups) {
            if (tx.index_.count(coarse) && !members.count(coarse)) {
                throw TaxonomyError(coarse, "coarse label shadows a fine label it does not contain at level " +
                                                std::string(to_string(level)));
            }
            auto it = seen.find(coarse);
            if (it != seen.end()) {
                if (!std::includes(members.begin(), members.end(), it->second.second.begin(),
                                   it->second.second.end())) {
                    throw TaxonomyError(coarse, "coarse label narrows between levels");
                }
            }
            seen[coarse] = {level, members};
        }
    }
    return tx;
}

Taxonomy Taxonomy::parse(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("taxonomy config is not valid JSON: ") + e.what());
    }
    return from_json(doc);
}

Taxonomy Taxonomy::load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read taxonomy config " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

const Taxonomy& Taxonomy::default_taxonomy() {
    static const Taxonomy tx = parse(assets::taxonomy_default);
    return tx;
}

std::vector<VerdictLabel> Taxonomy::final_labels() const {
    std::vector<VerdictLabel> out;
    for (const auto& l : labels_) {
        if (!l.is_follow_up()) out.push_back(l);
    }
    return out;
}

std::vector<VerdictLabel> Taxonomy::level_labels(Level level) const {
    if (level == Level::fine) return final_labels();
    std::vector<VerdictLabel> out;
    std::set<std::string> emitted;
    for (const auto& l : labels_) {
        if (l.is_follow_up()) continue;
        const auto& coarse = maps_[level_slot(level)].at(l.token);
        if (emitted.insert(coarse).second) out.push_back(coarse_label(coarse));
    }
    return out;
}

std::optional<VerdictLabel> Taxonomy::find(std::string_view token) const {
    if (auto it = index_.find(token); it != index_.end()) return labels_[it->second];
    if (auto it = aliases_.find(token); it != aliases_.end()) {
        return labels_[index_.at(it->second)];
    }
    return std::nullopt;
}

VerdictLabel Taxonomy::label(std::string_view token) const {
    if (auto found = find(token)) return *found;
    throw UnknownLabel(std::string(token));
}

VerdictLabel Taxonomy::coarse_label(const std::string& token) const {
    if (auto it = index_.find(token); it != index_.end()) return labels_[it->second];
    return {token, humanize(token)};
}

std::optional<Level> Taxonomy::finest_level_of(const std::string& token) const {
    if (index_.count(token)) return Level::fine;
    for (Level level : {Level::seven, Level::five, Level::binary}) {
        for (const auto& [fine, coarse] : maps_[level_slot(level)]) {
            if (coarse == token) return level;
        }
    }
    return std::nullopt;
}

VerdictLabel Taxonomy::consolidate(const VerdictLabel& label, Level level) const {
    if (label.is_follow_up()) throw NotAFinalVerdict();
    const auto origin = finest_level_of(label.token);
    if (!origin) throw UnknownLabel(label.token);
    if (level_slot(*origin) > level_slot(level)) {
        throw Error("cannot refine '" + label.token + "' from level " +
                    std::string(to_string(*origin)) + " to " + std::string(to_string(level)));
    }
    if (level == Level::fine) return coarse_label(label.token);

    // Any fine preimage works: monotonicity makes the image independent of the choice.
    std::string representative = label.token;
    if (*origin != Level::fine) {
        for (const auto& [fine, coarse] : maps_[level_slot(*origin)]) {
            if (coarse == label.token) {
                representative = fine;
                break;
            }
        }
    }
    return coarse_label(maps_[level_slot(level)].at(representative));
}

Polarity Taxonomy::polarity(const VerdictLabel& label) const {
    const auto binary = consolidate(label, Level::binary);
    if (binary.token == kCorrect) return Polarity::correct;
    if (binary.token == kIncorrect) return Polarity::incorrect;
    return Polarity::nei;
}

nlohmann::json Taxonomy::to_json() const {
    nlohmann::json doc;
    doc["version"] = version_;
    auto& labels = doc["labels"] = nlohmann::json::array();
    for (const auto& l : labels_) {
        nlohmann::json entry{{"token", l.token}, {"display", l.display}};
        if (auto it = alias_lists_.find(l.token); it != alias_lists_.end()) {
            entry["aliases"] = it->second;
        }
        labels.push_back(std::move(entry));
    }
    for (Level level : {Level::seven, Level::five, Level::binary}) {
        auto& rows = doc["levels"][std::string(to_string(level))] = nlohmann::json::array();
        for (const auto& l : labels_) {
            if (l.is_follow_up()) continue;
            rows.push_back({{"token", l.token}, {"maps_to", maps_[level_slot(level)].at(l.token)}});
        }
    }
    return doc;
}

std::vector<std::string> bracket_tokens(std::string_view raw_text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto open = raw_text.find("[[", pos);
        if (open == std::string_view::npos) break;
        auto start = open + 2;
        // "[[[x]]" and similar: the innermost "[[" opens the token.
        while (start < raw_text.size() && raw_text[start] == '[') ++start;
        const auto close = raw_text.find("]]", start);
        if (close == std::string_view::npos) break;
        const auto body = raw_text.substr(start, close - start);
        const auto nested = body.rfind("[[");
        const auto inner = nested == std::string_view::npos ? body : body.substr(nested + 2);
        if (inner.find('\n') == std::string_view::npos) {
            auto token = canonicalize(inner);
            if (!token.empty()) out.push_back(std::move(token));
        }
        pos = close + 2;
    }
    return out;
}

VerdictParse try_parse_verdict(std::string_view raw_text, const Taxonomy& taxonomy) {
    VerdictParse result;
    const auto tokens = bracket_tokens(raw_text);
    if (tokens.empty()) return result;
    for (auto it = tokens.rbegin(); it != tokens.rend(); ++it) {
        if (auto label = taxonomy.find(*it)) {
            result.status = VerdictParse::Status::ok;
            result.label = std::move(label);
            return result;
        }
    }
    result.status = VerdictParse::Status::unknown_label;
    result.unknown_token = tokens.back();
    return result;
}

VerdictLabel parse_verdict(std::string_view raw_text, const Taxonomy& taxonomy) {
    auto parsed = try_parse_verdict(raw_text, taxonomy);
    switch (parsed.status) {
        case VerdictParse::Status::ok:
            return *parsed.label;
        case VerdictParse::Status::unknown_label:
            throw UnknownLabel(parsed.unknown_token);
        case VerdictParse::Status::unparseable:
            break;
    }
    throw UnparseableVerdict();
}

std::string format_verdict(const VerdictLabel& label) { return "[[" + label.token + "]]"; }

}  // namespace factdebate::taxonomy

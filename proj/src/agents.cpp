#include "factdebate/agents.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

namespace factdebate::agents {

namespace {

constexpr std::string_view kFirstRoundHistory = "(none: this is the first round)";
constexpr std::string_view kNoHistory = "(none)";
constexpr std::string_view kReconsiderQuestion =
    "The mediator asks every advocate to reconsider its verdict in light of the other "
    "assessments and to state its final verdict.";

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        auto line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.emplace_back(line);
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return lines;
}

// ---- evidence/agreement scales ----

std::optional<EvidenceLevel> evidence_word(std::string_view w) {
    if (w == "limited" || w == "low") return EvidenceLevel::limited;
    if (w == "medium" || w == "moderate") return EvidenceLevel::medium;
    if (w == "robust" || w == "high" || w == "strong") return EvidenceLevel::robust;
    return std::nullopt;
}

std::optional<AgreementLevel> agreement_word(std::string_view w) {
    if (w == "low" || w == "limited") return AgreementLevel::low;
    if (w == "medium" || w == "moderate") return AgreementLevel::medium;
    if (w == "high" || w == "robust" || w == "strong") return AgreementLevel::high;
    return std::nullopt;
}

bool is_scale(std::string_view w) { return evidence_word(w).has_value(); }

std::vector<std::string> words_of(std::string_view sentence) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : sentence) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalpha(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

std::vector<std::string> sentences_of(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == '.' || c == '!' || c == '?' || c == ';' || c == '\n') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

bool is_keyword(std::string_view w) { return w == "evidence" || w == "agreement" || w == "confidence"; }

// Scale word right before `pos`, also across "level of" ("high level of evidence").
std::optional<std::string> scale_before(const std::vector<std::string>& w, std::size_t pos) {
    if (pos >= 1 && is_scale(w[pos - 1])) return w[pos - 1];
    if (pos >= 3 && w[pos - 1] == "of" && w[pos - 2] == "level" && is_scale(w[pos - 3])) return w[pos - 3];
    return std::nullopt;
}

// First scale word after `pos`. A "level of X" / "X level" phrase may look to the end of the
// sentence; a bare keyword only a few words ahead, stopping at another keyword.
std::optional<std::string> scale_after(const std::vector<std::string>& w, std::size_t pos, bool phrase) {
    const std::size_t limit = phrase ? w.size() : std::min(w.size(), pos + 1 + 4);
    for (std::size_t i = pos + 1; i < limit; ++i) {
        if (is_scale(w[i])) return w[i];
        if (is_keyword(w[i])) break;
    }
    return std::nullopt;
}

bool preceded_by_level_of(const std::vector<std::string>& w, std::size_t pos) {
    return pos >= 2 && w[pos - 1] == "of" && w[pos - 2] == "level";
}

// ---- citations ----

std::string strip_url(std::string s) {
    s = trim(s);
    if (s.rfind("\\url{", 0) == 0) {
        s = s.substr(5);
        if (auto close = s.find('}'); close != std::string::npos) s = s.substr(0, close);
    }
    while (!s.empty() && (s.back() == ')' || s.back() == '.' || s.back() == ',' || s.back() == ';' ||
                          s.back() == '}' || s.back() == ']')) {
        s.pop_back();
    }
    return s;
}

std::string cut_at_paren(std::string_view s) {
    const auto p = s.find(')');
    return trim(p == std::string_view::npos ? s : s.substr(0, p));
}

// ---- prompts ----

backend::CompletionRequest make_request(const AgentContext& ctx, std::string role_id, std::string system,
                                        std::string user) {
    backend::CompletionRequest req;
    req.role_id = std::move(role_id);
    req.system_prompt = std::move(system);
    req.user_prompt = std::move(user);
    req.temperature = ctx.temperature;
    req.max_tokens = ctx.max_tokens;
    req.model_id = ctx.model_id.empty() ? ctx.backend.model_id() : ctx.model_id;
    return req;
}

CallRecord call_backend(const AgentContext& ctx, backend::CompletionRequest req) {
    auto result = ctx.backend.complete(req);
    return {std::move(req.role_id), std::move(req.system_prompt), std::move(req.user_prompt),
            std::move(result.text)};
}

std::string retrieve_evidence(const AgentContext& ctx, const AdvocateConfig& advocate, std::string_view query) {
    if (!advocate.persona.needs_corpus()) return {};
    std::vector<corpus::RetrievalHit> hits;
    try {
        hits = ctx.registry.get(*advocate.corpus_id).retrieve(query, advocate.retrieval_k);
    } catch (const corpus::EmptyQuery&) {
        hits.clear();
    }
    auto block = corpus::format_evidence(hits);
    return block.empty() ? std::string(kNoEvidence) : block;
}

AdvocateResponse run_advocate(const AgentContext& ctx, const AdvocateConfig& advocate, std::string_view claim,
                              std::string evidence, std::string history, int round) {
    const auto& tmpl = ctx.templates.get(advocate.persona.template_id());
    Slots slots{{"CLAIM", std::string(claim)},
                {"EVIDENCE", std::move(evidence)},
                {"HISTORY", std::move(history)},
                {"ROUND", std::to_string(round)},
                {"LABELS", render_labels(ctx.taxonomy)},
                {"ADVOCATE", advocate.name}};
    auto call = call_backend(ctx, make_request(ctx, advocate.name, tmpl.render_system(slots), tmpl.render_user(slots)));
    return interpret_advocate_reply(advocate.name, std::move(call), ctx.taxonomy);
}

std::string render_response_block(const AdvocateResponse& r) {
    std::string out = "### Advocate: " + r.advocate_name + "\n";
    out += "Verdict: " + r.verdict.token + (r.parse_failed ? " (no verdict could be parsed)" : "") + "\n";
    out += "Level of evidence: " + std::string(to_string(r.evidence_level)) +
           ". Level of agreement: " + std::string(to_string(r.agreement_level)) + ".\n";
    out += r.rationale;
    return out;
}

}  // namespace

std::string_view to_string(PersonaKind kind) {
    switch (kind) {
        case PersonaKind::scientific_rag: return "scientific_rag";
        case PersonaKind::plain_model: return "plain_model";
        case PersonaKind::denier_rag: return "denier_rag";
    }
    return "scientific_rag";
}

PersonaKind persona_kind_from_string(std::string_view name) {
    for (auto k : {PersonaKind::scientific_rag, PersonaKind::plain_model, PersonaKind::denier_rag}) {
        if (to_string(k) == name) return k;
    }
    throw ConfigError("unknown advocate persona '" + std::string(name) + "'");
}

std::string AdvocatePersona::template_id() const {
    if (!prompt_template_id.empty()) return prompt_template_id;
    switch (kind) {
        case PersonaKind::scientific_rag: return "advocate";
        case PersonaKind::plain_model: return "plain_model";
        case PersonaKind::denier_rag: return "denier";
    }
    return "advocate";
}

void validate_roster(const std::vector<AdvocateConfig>& roster, const corpus::IndexRegistry* registry) {
    if (roster.empty()) throw ConfigError("advocate roster is empty");
    std::set<std::string> names;
    for (const auto& a : roster) {
        if (a.name.empty()) throw ConfigError("advocate name must not be empty");
        if (!names.insert(a.name).second) throw ConfigError("duplicate advocate name '" + a.name + "'");
        if (a.retrieval_k < 1) throw ConfigError("advocate '" + a.name + "' needs retrieval_k >= 1");
        if (a.persona.needs_corpus()) {
            if (!a.corpus_id || a.corpus_id->empty()) {
                throw ConfigError("advocate '" + a.name + "' (" + std::string(to_string(a.persona.kind)) +
                                  ") requires a corpus");
            }
            if (registry && !registry->contains(*a.corpus_id)) {
                throw ConfigError("advocate '" + a.name + "' refers to unknown corpus '" + *a.corpus_id + "'");
            }
        } else if (a.corpus_id) {
            throw ConfigError("advocate '" + a.name + "' is a plain_model and must not have a corpus");
        }
    }
}

std::string_view to_string(EvidenceLevel level) {
    switch (level) {
        case EvidenceLevel::limited: return "limited";
        case EvidenceLevel::medium: return "medium";
        case EvidenceLevel::robust: return "robust";
        case EvidenceLevel::unstated: return "unstated";
    }
    return "unstated";
}

std::string_view to_string(AgreementLevel level) {
    switch (level) {
        case AgreementLevel::low: return "low";
        case AgreementLevel::medium: return "medium";
        case AgreementLevel::high: return "high";
        case AgreementLevel::unstated: return "unstated";
    }
    return "unstated";
}

EvidenceLevel evidence_level_from_string(std::string_view s) {
    for (auto l : {EvidenceLevel::limited, EvidenceLevel::medium, EvidenceLevel::robust, EvidenceLevel::unstated}) {
        if (to_string(l) == s) return l;
    }
    throw ConfigError("unknown evidence level '" + std::string(s) + "'");
}

AgreementLevel agreement_level_from_string(std::string_view s) {
    for (auto l : {AgreementLevel::low, AgreementLevel::medium, AgreementLevel::high, AgreementLevel::unstated}) {
        if (to_string(l) == s) return l;
    }
    throw ConfigError("unknown agreement level '" + std::string(s) + "'");
}

std::string_view to_string(MediatorVariant v) {
    return v == MediatorVariant::neutral ? "neutral" : "authoritative";
}

MediatorVariant mediator_variant_from_string(std::string_view s) {
    if (s == "neutral") return MediatorVariant::neutral;
    if (s == "authoritative") return MediatorVariant::authoritative;
    throw ConfigError("unknown mediator variant '" + std::string(s) + "'");
}

MediatorVariant MediatorConfig::resolve(const std::vector<AdvocateConfig>& roster) const {
    if (variant) return *variant;
    const bool has_denier = std::any_of(roster.begin(), roster.end(), [](const AdvocateConfig& a) {
        return a.persona.kind == PersonaKind::denier_rag;
    });
    return has_denier ? MediatorVariant::neutral : MediatorVariant::authoritative;
}

std::string contextualize_claim(std::string_view claim, bool needs_prefix) {
    if (!needs_prefix) return std::string(claim);
    return std::string(kContextPrefix) + std::string(claim);
}

std::pair<EvidenceLevel, AgreementLevel> parse_levels(std::string_view raw_text) {
    auto evidence = EvidenceLevel::unstated;
    auto agreement = AgreementLevel::unstated;
    auto set_joint = [&](const std::string& word) {
        evidence = *evidence_word(word);
        agreement = *agreement_word(word);
    };
    for (const auto& sentence : sentences_of(raw_text)) {
        const auto w = words_of(sentence);
        for (std::size_t i = 0; i < w.size(); ++i) {
            const bool joint = w[i] == "evidence" && i + 2 < w.size() && w[i + 1] == "and" && w[i + 2] == "agreement";
            if (joint) {
                if (auto s = scale_before(w, i)) {
                    set_joint(*s);
                } else if (auto s2 = scale_after(w, i + 2, true)) {
                    set_joint(*s2);
                }
                i += 2;
                continue;
            }
            if (w[i] != "evidence" && w[i] != "agreement") continue;
            std::optional<std::string> s = scale_before(w, i);
            if (!s) {
                const bool phrase = preceded_by_level_of(w, i) || (i + 1 < w.size() && w[i + 1] == "level");
                s = scale_after(w, i, phrase);
            }
            if (!s) continue;
            if (w[i] == "evidence") {
                evidence = *evidence_word(*s);
            } else {
                agreement = *agreement_word(*s);
            }
        }
    }
    return {evidence, agreement};
}

std::vector<Citation> parse_citations(std::string_view raw_text) {
    constexpr std::string_view kRef = "Reference:";
    std::vector<Citation> out;
    std::size_t pos = raw_text.find(kRef);
    while (pos != std::string_view::npos) {
        const auto start = pos + kRef.size();
        auto line_end = raw_text.find('\n', start);
        auto seg = raw_text.substr(start, line_end == std::string_view::npos ? std::string_view::npos : line_end - start);
        if (auto next = seg.find(kRef); next != std::string_view::npos) seg = seg.substr(0, next);

        struct Marker {
            std::string_view key;
            std::size_t at;
        };
        std::vector<Marker> markers;
        for (std::string_view key : {", Page:", ", ORG:", ", URL:"}) {
            if (auto at = seg.find(key); at != std::string_view::npos) markers.push_back({key, at});
        }
        std::sort(markers.begin(), markers.end(), [](const Marker& a, const Marker& b) { return a.at < b.at; });

        Citation c;
        const auto title_end = markers.empty() ? seg.size() : markers.front().at;
        c.title = markers.empty() ? cut_at_paren(seg) : trim(seg.substr(0, title_end));
        for (std::size_t m = 0; m < markers.size(); ++m) {
            const auto value_start = markers[m].at + markers[m].key.size();
            const auto value_end = m + 1 < markers.size() ? markers[m + 1].at : seg.size();
            const auto value = seg.substr(value_start, value_end - value_start);
            if (markers[m].key == ", Page:") {
                c.page = cut_at_paren(value);
            } else if (markers[m].key == ", ORG:") {
                c.organization = cut_at_paren(value);
            } else {
                auto url = trim(value);
                if (auto ws = url.find_first_of(" \t"); ws != std::string::npos) url = url.substr(0, ws);
                c.url = strip_url(url);
            }
        }
        if (!c.title.empty() && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(std::move(c));
        pos = raw_text.find(kRef, start);
    }
    return out;
}

std::vector<std::string> parse_subclaims(std::string_view raw_text, std::string_view claim) {
    constexpr std::string_view kPrefix = "SUBCLAIM:";
    std::vector<std::string> out;
    for (const auto& line : split_lines(raw_text)) {
        auto t = trim(line);
        while (!t.empty() && (t.front() == '-' || t.front() == '*')) t = trim(t.substr(1));
        if (t.rfind(kPrefix, 0) != 0) continue;
        auto body = trim(t.substr(kPrefix.size()));
        if (!body.empty()) out.push_back(std::move(body));
    }
    if (out.empty()) out.emplace_back(claim);
    return out;
}

MediatorOutcome parse_mediator_reply(std::string_view raw_text, const taxonomy::Taxonomy& taxonomy) {
    MediatorOutcome outcome;
    const auto tokens = taxonomy::bracket_tokens(raw_text);
    if (std::find(tokens.begin(), tokens.end(), taxonomy::kFollowUp) != tokens.end()) {
        outcome.kind = MediatorOutcome::Kind::follow_up;
        outcome.verdict = taxonomy.follow_up();
        for (const auto& line : split_lines(raw_text)) {
            const auto t = trim(line);
            if (t.rfind("QUESTION(", 0) != 0) continue;
            const auto close = t.find("):");
            if (close == std::string::npos) continue;
            auto name = trim(std::string_view(t).substr(9, close - 9));
            auto question = trim(std::string_view(t).substr(close + 2));
            if (!name.empty() && !question.empty()) {
                outcome.questions.push_back({std::move(name), std::move(question)});
            }
        }
        return outcome;
    }
    const auto parsed = taxonomy::try_parse_verdict(raw_text, taxonomy);
    if (parsed.status != taxonomy::VerdictParse::Status::ok) throw MediatorUnparseable(CallRecord{});
    outcome.kind = MediatorOutcome::Kind::final;
    outcome.verdict = *parsed.label;

    // Summary: the paragraph introduced by a "...Summary:" line, else the last paragraph.
    const auto lines = split_lines(raw_text);
    std::string summary;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto l = lower(lines[i]);
        const auto at = l.find("summary:");
        if (at == std::string::npos) continue;
        summary = trim(std::string_view(lines[i]).substr(at + 8));
        for (std::size_t j = i + 1; j < lines.size() && !trim(lines[j]).empty(); ++j) {
            summary += (summary.empty() ? "" : " ") + trim(lines[j]);
        }
    }
    if (summary.empty()) {
        std::string current;
        for (const auto& l : lines) {
            const auto t = trim(l);
            if (t.empty()) {
                if (!current.empty()) summary = current;
                current.clear();
            } else {
                current += (current.empty() ? "" : " ") + t;
            }
        }
        if (!current.empty()) summary = current;
    }
    outcome.summary = std::move(summary);
    return outcome;
}

AdvocateResponse interpret_advocate_reply(std::string advocate_name, CallRecord call,
                                          const taxonomy::Taxonomy& taxonomy) {
    AdvocateResponse r;
    r.advocate_name = std::move(advocate_name);
    r.rationale = call.response;
    const auto tokens = taxonomy::bracket_tokens(r.rationale);
    std::optional<VerdictLabel> found;
    for (auto it = tokens.rbegin(); it != tokens.rend() && !found; ++it) {
        if (auto label = taxonomy.find(*it); label && !label->is_follow_up()) found = label;
    }
    r.parse_failed = !found;
    r.verdict = found ? *found : taxonomy.nei();
    std::tie(r.evidence_level, r.agreement_level) = parse_levels(r.rationale);
    r.citations = parse_citations(r.rationale);
    r.call = std::move(call);
    return r;
}

std::string render_roster(const std::vector<AdvocateResponse>& responses) {
    std::vector<const AdvocateResponse*> sorted;
    for (const auto& r : responses) sorted.push_back(&r);
    std::sort(sorted.begin(), sorted.end(),
              [](const auto* a, const auto* b) { return a->advocate_name < b->advocate_name; });
    std::string out;
    for (const auto* r : sorted) {
        if (!out.empty()) out += "\n\n";
        out += render_response_block(*r);
    }
    return out;
}

std::string render_labels(const taxonomy::Taxonomy& taxonomy) {
    std::string out;
    for (const auto& l : taxonomy.final_labels()) {
        if (!out.empty()) out += ", ";
        out += l.token;
    }
    return out;
}

Decomposition decompose_claim(const AgentContext& ctx, std::string_view claim) {
    if (trim(claim).empty()) throw ConfigError("cannot decompose an empty claim");
    std::string system =
        "You split claims into the atomic factual assertions they make, without judging them.";
    std::string user =
        "Split the following claim into its atomic factual assertions. Write one assertion per "
        "line, each starting with \"SUBCLAIM:\".\n\nClaim: " +
        std::string(claim);
    auto call = call_backend(ctx, make_request(ctx, std::string(kDecomposerRole), std::move(system), std::move(user)));
    Decomposition d;
    d.subclaims = parse_subclaims(call.response, claim);
    d.call = std::move(call);
    return d;
}

AdvocateResponse assess_claim(const AgentContext& ctx, const AdvocateConfig& advocate, std::string_view claim,
                              int round) {
    auto evidence = retrieve_evidence(ctx, advocate, claim);
    return run_advocate(ctx, advocate, claim, std::move(evidence), std::string(kFirstRoundHistory), round);
}

AdvocateResponse answer_followup(const AgentContext& ctx, const AdvocateConfig& advocate, std::string_view claim,
                                 std::string_view question, const std::vector<AdvocateResponse>& previous_round,
                                 int round) {
    if (previous_round.empty()) throw ConfigError("a follow-up needs at least one prior round");
    const AdvocateResponse* own = nullptr;
    std::vector<AdvocateResponse> peers;
    for (const auto& r : previous_round) {
        if (r.advocate_name == advocate.name) {
            own = &r;
        } else {
            peers.push_back(r);
        }
    }
    const std::string q = trim(question).empty() ? std::string(kReconsiderQuestion) : std::string(question);
    std::string history = "Your previous assessment:\n";
    history += own ? own->rationale : std::string("(none recorded)");
    history += "\n\nOther advocates' previous assessments:\n";
    history += peers.empty() ? std::string(kNoHistory) : render_roster(peers);
    history += "\n\nQuestion from the mediator:\n" + q;

    auto evidence = retrieve_evidence(ctx, advocate, std::string(claim) + "\n" + q);
    return run_advocate(ctx, advocate, claim, std::move(evidence), std::move(history), round);
}

MediatorOutcome mediate(const AgentContext& ctx, MediatorVariant variant, std::string_view claim,
                        std::vector<AdvocateResponse> responses, int round, std::string_view history) {
    if (responses.empty()) throw ConfigError("mediation needs at least one advocate response");
    const auto& tmpl =
        ctx.templates.get(variant == MediatorVariant::neutral ? "neutral_arbitrator" : "arbitrator");
    Slots slots{{"CLAIM", std::string(claim)},
                {"ROSTER", render_roster(responses)},
                {"HISTORY", history.empty() ? std::string(kNoHistory) : std::string(history)},
                {"ROUND", std::to_string(round)},
                {"LABELS", render_labels(ctx.taxonomy)},
                {"ADVOCATE", "Mediator"}};
    auto call = call_backend(ctx, make_request(ctx, std::string(kMediatorRole), tmpl.render_system(slots),
                                               tmpl.render_user(slots)));
    try {
        auto outcome = parse_mediator_reply(call.response, ctx.taxonomy);
        outcome.call = std::move(call);
        return outcome;
    } catch (const MediatorUnparseable&) {
        throw MediatorUnparseable(std::move(call));
    }
}

MediatorOutcome synthesize_subclaims(const AgentContext& ctx, MediatorVariant variant, std::string_view claim,
                                     const std::vector<SubclaimResult>& results) {
    if (results.empty()) throw ConfigError("synthesis needs at least one subclaim result");
    const auto& tmpl =
        ctx.templates.get(variant == MediatorVariant::neutral ? "neutral_arbitrator" : "arbitrator");
    std::string roster;
    for (std::size_t i = 0; i < results.size(); ++i) {
        if (!roster.empty()) roster += "\n\n";
        roster += "### Subclaim " + std::to_string(i + 1) + ": " + results[i].subclaim + "\n";
        roster += "Verdict: " + results[i].verdict.token + "\n";
        roster += "Summary: " + results[i].summary;
    }
    Slots slots{{"CLAIM", std::string(claim)},
                {"ROSTER", std::move(roster)},
                {"HISTORY", "Each subclaim above was debated independently; combine their verdicts into one verdict for the whole claim."},
                {"ROUND", "subclaim synthesis"},
                {"LABELS", render_labels(ctx.taxonomy)},
                {"ADVOCATE", "Mediator"}};
    auto call = call_backend(ctx, make_request(ctx, std::string(kMediatorRole), tmpl.render_system(slots),
                                               tmpl.render_user(slots)));
    try {
        auto outcome = parse_mediator_reply(call.response, ctx.taxonomy);
        outcome.call = std::move(call);
        return outcome;
    } catch (const MediatorUnparseable&) {
        throw MediatorUnparseable(std::move(call));
    }
}

}  // namespace factdebate::agents

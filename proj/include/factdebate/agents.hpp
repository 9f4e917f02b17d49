#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "factdebate/backend.hpp"
#include "factdebate/corpus.hpp"
#include "factdebate/prompt_template.hpp"
#include "factdebate/taxonomy.hpp"

namespace factdebate::agents {

using taxonomy::VerdictLabel;

enum class PersonaKind { scientific_rag, plain_model, denier_rag };
std::string_view to_string(PersonaKind kind);
PersonaKind persona_kind_from_string(std::string_view name);

struct AdvocatePersona {
    PersonaKind kind = PersonaKind::scientific_rag;
    std::string prompt_template_id;  // empty selects the kind's default template

    std::string template_id() const;
    bool needs_corpus() const { return kind != PersonaKind::plain_model; }
};

struct AdvocateConfig {
    std::string name;
    AdvocatePersona persona;
    std::optional<std::string> corpus_id;
    int retrieval_k = corpus::kDefaultTopK;
};

// Unique names; RAG personas have a corpus (registered, when a registry is given);
// plain_model has none.
void validate_roster(const std::vector<AdvocateConfig>& roster,
                     const corpus::IndexRegistry* registry = nullptr);

enum class EvidenceLevel { limited, medium, robust, unstated };
enum class AgreementLevel { low, medium, high, unstated };
std::string_view to_string(EvidenceLevel level);
std::string_view to_string(AgreementLevel level);
EvidenceLevel evidence_level_from_string(std::string_view s);
AgreementLevel agreement_level_from_string(std::string_view s);

struct Citation {
    std::string title;
    std::string page;
    std::string url;
    std::string organization;

    friend bool operator==(const Citation&, const Citation&) = default;
};

// One model call: what was asked and what came back, verbatim.
struct CallRecord {
    std::string role_id;
    std::string system_prompt;
    std::string user_prompt;
    std::string response;
};

struct AdvocateResponse {
    std::string advocate_name;
    VerdictLabel verdict;
    bool parse_failed = false;  // verdict defaulted to nei
    EvidenceLevel evidence_level = EvidenceLevel::unstated;
    AgreementLevel agreement_level = AgreementLevel::unstated;
    std::vector<Citation> citations;
    std::string rationale;  // raw model output
    CallRecord call;
};

enum class MediatorVariant { authoritative, neutral };
std::string_view to_string(MediatorVariant v);
MediatorVariant mediator_variant_from_string(std::string_view s);

struct MediatorConfig {
    std::optional<MediatorVariant> variant;  // unset: neutral iff a denier is on the roster
    int max_rounds = 3;
    // A mediator nei before the round cap sends every advocate into another round.
    bool reconsider_nei = true;

    MediatorVariant resolve(const std::vector<AdvocateConfig>& roster) const;
};

struct FollowUpQuestion {
    std::string advocate_name;
    std::string question;
};

struct MediatorOutcome {
    enum class Kind { final, follow_up, unparseable };
    Kind kind = Kind::final;
    VerdictLabel verdict;  // meaningful for Kind::final
    std::string summary;
    std::vector<FollowUpQuestion> questions;
    CallRecord call;
};

class MediatorUnparseable : public Error {
public:
    explicit MediatorUnparseable(CallRecord call)
        : Error("mediator reply has neither a verdict nor a follow-up marker"), call_(std::move(call)) {}
    const CallRecord& call() const noexcept { return call_; }

private:
    CallRecord call_;
};

// Shared, read-only state for agent calls.
struct AgentContext {
    const taxonomy::Taxonomy& taxonomy;
    const TemplateSet& templates;
    backend::Backend& backend;
    const corpus::IndexRegistry& registry;
    std::string model_id;  // empty: backend default
    double temperature = 0.0;
    int max_tokens = 2048;
};

inline constexpr std::string_view kContextPrefix = "This claim is made in a climate-change context: ";
inline constexpr std::string_view kNoEvidence = "NO EVIDENCE FOUND";
inline constexpr std::string_view kMediatorRole = "mediator";
inline constexpr std::string_view kDecomposerRole = "decomposer";

std::string contextualize_claim(std::string_view claim, bool needs_prefix);

// ---- parsing (pure) ----

std::pair<EvidenceLevel, AgreementLevel> parse_levels(std::string_view raw_text);
std::vector<Citation> parse_citations(std::string_view raw_text);
std::vector<std::string> parse_subclaims(std::string_view raw_text, std::string_view claim);
// Throws MediatorUnparseable (with an empty call record).
MediatorOutcome parse_mediator_reply(std::string_view raw_text, const taxonomy::Taxonomy& taxonomy);
// Builds an AdvocateResponse from a raw reply; never yields follow_up_question.
AdvocateResponse interpret_advocate_reply(std::string advocate_name, CallRecord call,
                                          const taxonomy::Taxonomy& taxonomy);

// ---- prompt assembly (pure) ----

std::string render_roster(const std::vector<AdvocateResponse>& responses);
std::string render_labels(const taxonomy::Taxonomy& taxonomy);

// ---- agent calls ----

struct Decomposition {
    std::vector<std::string> subclaims;
    CallRecord call;
};
Decomposition decompose_claim(const AgentContext& ctx, std::string_view claim);

AdvocateResponse assess_claim(const AgentContext& ctx, const AdvocateConfig& advocate,
                              std::string_view claim, int round = 1);

// `previous_round` holds every advocate's response from the last round (this one included).
AdvocateResponse answer_followup(const AgentContext& ctx, const AdvocateConfig& advocate,
                                 std::string_view claim, std::string_view question,
                                 const std::vector<AdvocateResponse>& previous_round, int round);

// `history` summarizes earlier rounds of mediation; empty in round 1.
MediatorOutcome mediate(const AgentContext& ctx, MediatorVariant variant, std::string_view claim,
                        std::vector<AdvocateResponse> responses, int round,
                        std::string_view history = {});

struct SubclaimResult {
    std::string subclaim;
    VerdictLabel verdict;
    std::string summary;
};
// One mediation call over independent subclaim verdicts.
MediatorOutcome synthesize_subclaims(const AgentContext& ctx, MediatorVariant variant,
                                     std::string_view claim, const std::vector<SubclaimResult>& results);

}  // namespace factdebate::agents

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factdebate/agents.hpp"
#include "factdebate/backend.hpp"
#include "factdebate/corpus.hpp"
#include "factdebate/prompt_template.hpp"
#include "factdebate/taxonomy.hpp"
#include "json.hpp"

namespace factdebate::debate {

using agents::AdvocateResponse;
using agents::MediatorOutcome;
using taxonomy::VerdictLabel;

enum class Status { in_progress, final, forced };
std::string_view to_string(Status s);
Status status_from_string(std::string_view s);

struct Round {
    int index = 1;
    std::vector<AdvocateResponse> responses;  // sorted by advocate name
    MediatorOutcome mediator;
};

struct DebateTranscript {
    std::string claim_id;
    std::string claim;
    nlohmann::json config_fingerprint;
    std::vector<Round> rounds;
    Status status = Status::in_progress;
    std::optional<VerdictLabel> final_verdict;
    std::string summary;
    std::optional<std::string> error;  // set when the run stopped on a backend failure

    // Subclaim mode only.
    std::vector<std::string> subclaims;
    std::optional<agents::CallRecord> decomposition;
    std::vector<DebateTranscript> subclaim_debates;
    std::optional<MediatorOutcome> synthesis;

    bool complete() const { return status != Status::in_progress; }
    bool subclaim_mode() const { return decomposition.has_value(); }

    nlohmann::json to_json() const;
    static DebateTranscript from_json(const nlohmann::json& doc, const taxonomy::Taxonomy& taxonomy);
    // Pretty-printed JSON plus a trailing newline; the on-disk form.
    std::string dump() const;
    static DebateTranscript load(const std::filesystem::path& path, const taxonomy::Taxonomy& taxonomy);
    void save(const std::filesystem::path& path) const;  // atomic replace
};

// Every model call recorded in a transcript, in call order.
std::vector<agents::CallRecord> recorded_calls(const DebateTranscript& transcript);

// A scripted backend answering each recorded prompt with its recorded response.
backend::ScriptedBackend replay_backend(const DebateTranscript& transcript);

// Strict majority of binary-consolidated non-nei verdicts; ties and all-nei give nei.
VerdictLabel forced_consolidation(const std::vector<AdvocateResponse>& latest_responses,
                                  const taxonomy::Taxonomy& taxonomy);
VerdictLabel forced_consolidation(const std::vector<VerdictLabel>& verdicts, const taxonomy::Taxonomy& taxonomy);

struct DebateConfig {
    std::vector<agents::AdvocateConfig> roster;
    agents::MediatorConfig mediator;
    bool subclaims = false;
    std::string model_id;  // empty: backend default
    double temperature = 0.0;
    int max_tokens = 2048;
    bool parallel_advocates = true;

    void validate(const corpus::IndexRegistry* registry = nullptr) const;  // throws ConfigError
    // Normalized config plus a "hash" member (FNV-1a 64 over the rest, hex).
    nlohmann::json fingerprint(const taxonomy::Taxonomy& taxonomy, const std::string& backend_model) const;
};

// 64-bit FNV-1a digest as 16 lowercase hex digits.
std::string fnv1a64_hex(std::string_view data);

// Resolves a stored verdict token against fine and coarse vocabularies.
VerdictLabel resolve_label(const taxonomy::Taxonomy& taxonomy, std::string_view token);

class DebateEngine {
public:
    DebateEngine(const taxonomy::Taxonomy& taxonomy, const agents::TemplateSet& templates, backend::Backend& backend,
                 const corpus::IndexRegistry& registry, DebateConfig config);

    // Never throws on backend failures: the transcript comes back in_progress with `error` set.
    DebateTranscript run(std::string claim_id, std::string claim) const;
    // Continues an in_progress transcript from its last completed round.
    DebateTranscript resume(DebateTranscript transcript) const;

    const DebateConfig& config() const { return config_; }
    const nlohmann::json& fingerprint() const { return fingerprint_; }
    const taxonomy::Taxonomy& taxonomy() const { return taxonomy_; }

private:
    void continue_debate(DebateTranscript& t) const;
    void continue_subclaims(DebateTranscript& t) const;
    std::vector<AdvocateResponse> run_round(const DebateTranscript& t, int round) const;
    agents::AgentContext context() const;

    const taxonomy::Taxonomy& taxonomy_;
    const agents::TemplateSet& templates_;
    backend::Backend& backend_;
    const corpus::IndexRegistry& registry_;
    DebateConfig config_;
    agents::MediatorVariant variant_;
    nlohmann::json fingerprint_;
};

struct ClaimInput {
    std::string claim_id;
    std::string text;  // as shown to the agents (context prefix already applied)
};

struct ClaimFailure {
    std::string claim_id;
    std::string error;
};

// Verdict x round counts. Column r counts each claim's round-r outcome; claims that
// concluded earlier carry their final verdict forward.
struct BatchSummary {
    std::vector<std::string> columns;  // "Round 1", "Round 2", ...
    std::vector<VerdictLabel> rows;    // substantive verdicts, then follow_up_question, nei
    std::map<std::string, std::vector<int>> counts;  // row token -> per-column counts
    int n_claims = 0;
    std::vector<ClaimFailure> failures;

    int count(std::string_view token, int round) const;
    nlohmann::json to_json() const;
    std::string to_text() const;
};

BatchSummary summarize(const std::vector<DebateTranscript>& transcripts, const taxonomy::Taxonomy& taxonomy);

struct BatchOptions {
    std::filesystem::path out_dir;
    int jobs = 1;
};

struct BatchResult {
    std::vector<DebateTranscript> transcripts;  // input order
    BatchSummary summary;
    int skipped = 0;  // already complete on disk
    int resumed = 0;
};

// File name used for a claim's transcript.
std::string transcript_filename(std::string_view claim_id);

// One transcript per claim under out_dir plus summary.json. Completed transcripts with a
// matching fingerprint are left untouched; in_progress ones are resumed.
BatchResult run_batch(const DebateEngine& engine, const std::vector<ClaimInput>& claims, const BatchOptions& options);

}  // namespace factdebate::debate

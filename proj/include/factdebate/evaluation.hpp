#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "factdebate/backend.hpp"
#include "factdebate/debate.hpp"
#include "factdebate/errors.hpp"
#include "factdebate/taxonomy.hpp"
#include "json.hpp"

namespace factdebate::eval {

using taxonomy::Level;
using taxonomy::VerdictLabel;

enum class Source { climate_feedback, skeptical_science, nipcc, other };
std::string_view to_string(Source s);
Source source_from_string(std::string_view s);

struct ClaimRecord {
    std::string claim_id;
    std::string text;
    Source source = Source::other;
    std::optional<std::string> source_url;
    std::optional<VerdictLabel> gold_fine_verdict;
    std::optional<std::string> explanation;
    bool needs_context_prefix = false;

    nlohmann::json to_json() const;
};

class MalformedRecord : public Error {
public:
    MalformedRecord(std::size_t line, const std::string& what)
        : Error("malformed claim record on line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class MissingGold : public Error {
public:
    explicit MissingGold(std::string claim_id)
        : Error("no gold label for claim '" + claim_id + "'"), claim_id_(std::move(claim_id)) {}
    const std::string& claim_id() const noexcept { return claim_id_; }

private:
    std::string claim_id_;
};

class EmptyEvaluation : public Error {
public:
    EmptyEvaluation() : Error("nothing to evaluate") {}
};

// JSON-lines claims. `default_source` applies to records without a "source" field.
// Gold labels are checked against the taxonomy (line numbers are 1-based).
std::vector<ClaimRecord> load_claims(const std::filesystem::path& path, const taxonomy::Taxonomy& taxonomy,
                                     Source default_source = Source::other);
std::vector<ClaimRecord> parse_claims(std::string_view jsonl, const taxonomy::Taxonomy& taxonomy,
                                      Source default_source = Source::other);
void save_claims(const std::filesystem::path& path, const std::vector<ClaimRecord>& records);

// The text a debate sees for a record (context prefix applied when flagged).
std::string claim_prompt_text(const ClaimRecord& record);

struct BootstrapFlag {
    std::string claim_id;
    std::string reason;
};

struct BootstrapResult {
    std::vector<ClaimRecord> records;  // input order; flagged records keep an empty gold
    std::vector<BootstrapFlag> flagged;
};

inline constexpr std::string_view kLabelerRole = "labeler";

std::string bootstrap_prompt(const ClaimRecord& record, const taxonomy::Taxonomy& taxonomy);

// Labels every record from its explanation alone. Throws ConfigError before any call when a
// record lacks an explanation.
BootstrapResult bootstrap_labels(std::vector<ClaimRecord> records, backend::Backend& backend,
                                 const taxonomy::Taxonomy& taxonomy, int jobs = 1, std::string model_id = {});

struct ConfusionMatrix {
    Level level = Level::fine;
    bool include_nei = true;
    std::vector<VerdictLabel> labels;          // union of gold and predicted classes
    std::vector<std::vector<long>> counts;     // counts[gold][pred]
    long n = 0;
    long n_predictions = 0;  // before nei rows were dropped
    long n_nei_predictions = 0;

    long at(std::string_view gold, std::string_view pred) const;
    long trace() const;
};

using Predictions = std::map<std::string, VerdictLabel>;  // claim_id -> verdict

// Both sides consolidated to `level`. With include_nei false, claims predicted nei are dropped.
ConfusionMatrix confusion(const Predictions& preds, const Predictions& golds, const taxonomy::Taxonomy& taxonomy,
                          Level level, bool include_nei);

struct ClassMetrics {
    std::string label;
    long support = 0;  // gold count
    long predicted = 0;
    long true_positive = 0;
    double precision = 0.0;  // fractions in [0, 1]
    double recall = 0.0;
    double f1 = 0.0;
};

// Percentages are kept unrounded; round only when printing.
struct MetricsReport {
    Level level = Level::fine;
    bool include_nei = true;
    double precision = 0.0;
    double recall = 0.0;
    double macro_f1 = 0.0;
    double accuracy = 0.0;
    long n_claims = 0;
    double nei_ratio = 0.0;
    // A precision or recall denominator was empty and 0 was substituted.
    bool zero_division = false;
    // Macro averages over gold-present classes only.
    double precision_gold_only = 0.0;
    double recall_gold_only = 0.0;
    double macro_f1_gold_only = 0.0;
    std::vector<ClassMetrics> per_class;

    nlohmann::json to_json() const;
};

MetricsReport metrics(const ConfusionMatrix& matrix);

double nei_ratio(const std::vector<VerdictLabel>& preds);
double nei_ratio(const Predictions& preds);

// Fixed two-decimal rendering.
std::string format_percent(double value);

struct ReportRow {
    std::string subject;  // "mediator" or an advocate name
    MetricsReport metrics;
};

struct Report {
    std::vector<ReportRow> rows;
    std::map<Level, int> class_counts;  // substantive classes per level, for panel titles

    nlohmann::json to_json() const;
    std::string to_text() const;
};

struct ReportOptions {
    std::vector<Level> levels{Level::seven, Level::five, Level::binary};
    std::vector<bool> nei_modes{false, true};  // include_nei values
    bool per_advocate = false;  // advocates' last-round verdicts as extra rows
};

// Claims without a gold are reported via MissingGold; an empty transcript set raises
// EmptyEvaluation.
Report report(const std::vector<debate::DebateTranscript>& transcripts, const Predictions& golds,
              const taxonomy::Taxonomy& taxonomy, const ReportOptions& options = {});

}  // namespace factdebate::eval

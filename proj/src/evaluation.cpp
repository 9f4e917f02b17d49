#include "factdebate/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "factdebate/agents.hpp"

namespace factdebate::eval {

namespace {

using json = nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read claims file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::optional<std::string> optional_string(const json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw MalformedRecord(line, std::string("'") + key + "' must be a string");
    return it->get<std::string>();
}

std::string required_string(const json& j, const char* key, std::size_t line) {
    auto value = optional_string(j, key, line);
    if (!value || value->empty()) throw MalformedRecord(line, std::string("missing '") + key + "'");
    return *value;
}

double safe_ratio(long num, long den, bool& zero_division) {
    if (den == 0) {
        zero_division = true;
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

std::size_t index_of(const std::vector<VerdictLabel>& labels, std::string_view token) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i].token == token) return i;
    }
    return labels.size();
}

}  // namespace

std::string_view to_string(Source s) {
    switch (s) {
        case Source::climate_feedback: return "climate_feedback";
        case Source::skeptical_science: return "skeptical_science";
        case Source::nipcc: return "nipcc";
        case Source::other: return "other";
    }
    return "other";
}

Source source_from_string(std::string_view s) {
    for (auto src : {Source::climate_feedback, Source::skeptical_science, Source::nipcc, Source::other}) {
        if (to_string(src) == s) return src;
    }
    throw ConfigError("unknown claim source '" + std::string(s) + "'");
}

json ClaimRecord::to_json() const {
    json j;
    j["claim_id"] = claim_id;
    j["text"] = text;
    j["source"] = to_string(source);
    j["source_url"] = source_url ? json(*source_url) : json(nullptr);
    j["gold_fine_verdict"] = gold_fine_verdict ? json(gold_fine_verdict->token) : json(nullptr);
    j["explanation"] = explanation ? json(*explanation) : json(nullptr);
    j["needs_context_prefix"] = needs_context_prefix;
    return j;
}

std::vector<ClaimRecord> parse_claims(std::string_view jsonl, const taxonomy::Taxonomy& taxonomy,
                                      Source default_source) {
    std::vector<ClaimRecord> out;
    std::set<std::string> ids;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < jsonl.size()) {
        auto end = jsonl.find('\n', start);
        if (end == std::string_view::npos) end = jsonl.size();
        const auto line = jsonl.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;

        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw MalformedRecord(line_no, "not valid JSON");
        }
        if (!j.is_object()) throw MalformedRecord(line_no, "expected a JSON object");

        ClaimRecord r;
        r.claim_id = required_string(j, "claim_id", line_no);
        r.text = required_string(j, "text", line_no);
        if (!ids.insert(r.claim_id).second) throw MalformedRecord(line_no, "duplicate claim_id '" + r.claim_id + "'");
        if (auto src = optional_string(j, "source", line_no)) {
            try {
                r.source = source_from_string(*src);
            } catch (const ConfigError& e) {
                throw MalformedRecord(line_no, e.what());
            }
        } else {
            r.source = default_source;
        }
        r.source_url = optional_string(j, "source_url", line_no);
        r.explanation = optional_string(j, "explanation", line_no);
        if (auto gold = optional_string(j, "gold_fine_verdict", line_no); gold && !gold->empty()) {
            const auto token = taxonomy::canonicalize(*gold);
            auto label = taxonomy.find(token);
            if (!label) throw UnknownLabel(token, line_no);
            if (label->is_follow_up()) throw MalformedRecord(line_no, "follow_up_question cannot be a gold label");
            r.gold_fine_verdict = *label;
        }
        if (auto it = j.find("needs_context_prefix"); it != j.end() && !it->is_null()) {
            if (!it->is_boolean()) throw MalformedRecord(line_no, "'needs_context_prefix' must be a boolean");
            r.needs_context_prefix = it->get<bool>();
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<ClaimRecord> load_claims(const std::filesystem::path& path, const taxonomy::Taxonomy& taxonomy,
                                     Source default_source) {
    return parse_claims(read_file(path), taxonomy, default_source);
}

void save_claims(const std::filesystem::path& path, const std::vector<ClaimRecord>& records) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        for (const auto& r : records) out << r.to_json().dump() << "\n";
        if (!out) throw Error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string claim_prompt_text(const ClaimRecord& record) {
    return agents::contextualize_claim(record.text, record.needs_context_prefix);
}

// ---- bootstrapping ----

std::string bootstrap_prompt(const ClaimRecord& record, const taxonomy::Taxonomy& taxonomy) {
    std::string labels;
    for (const auto& l : taxonomy.final_labels()) {
        if (l.is_nei()) continue;
        labels += (labels.empty() ? "" : ", ") + l.token;
    }
    return "Claim: " + claim_prompt_text(record) + "\n\nExplanation: " + record.explanation.value_or("") +
           "\n\nEvaluate the claim in relation to the explanation above, without using any further "
           "information. Choose exactly one label from: " +
           labels +
           ". End your answer with the chosen label in double square brackets, for example [[incorrect]].";
}

BootstrapResult bootstrap_labels(std::vector<ClaimRecord> records, backend::Backend& backend,
                                 const taxonomy::Taxonomy& taxonomy, int jobs, std::string model_id) {
    if (jobs < 1) throw ConfigError("jobs must be at least 1");
    for (const auto& r : records) {
        if (!r.explanation || r.explanation->find_first_not_of(" \t\r\n") == std::string::npos) {
            throw ConfigError("claim '" + r.claim_id + "' has no explanation to label from");
        }
    }
    std::vector<std::optional<std::string>> flags(records.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < records.size(); i = next++) {
            auto& r = records[i];
            r.gold_fine_verdict.reset();
            backend::CompletionRequest req;
            req.role_id = std::string(kLabelerRole);
            req.system_prompt = "You assign fact-check ratings to claims using only the explanation you are given.";
            req.user_prompt = bootstrap_prompt(r, taxonomy);
            req.model_id = model_id.empty() ? backend.model_id() : model_id;
            try {
                const auto reply = backend.complete(req);
                const auto parsed = taxonomy::try_parse_verdict(reply.text, taxonomy);
                if (parsed.status == taxonomy::VerdictParse::Status::ok && !parsed.label->is_follow_up()) {
                    r.gold_fine_verdict = *parsed.label;
                } else if (parsed.status == taxonomy::VerdictParse::Status::unknown_label) {
                    flags[i] = "unknown label '" + parsed.unknown_token + "'";
                } else {
                    flags[i] = "no bracketed label in reply";
                }
            } catch (const backend::BackendError& e) {
                flags[i] = std::string("backend error: ") + e.what();
            }
        }
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), records.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    BootstrapResult result;
    for (std::size_t i = 0; i < records.size(); ++i) {
        if (flags[i]) result.flagged.push_back({records[i].claim_id, *flags[i]});
    }
    result.records = std::move(records);
    return result;
}

// ---- confusion and metrics ----

long ConfusionMatrix::at(std::string_view gold, std::string_view pred) const {
    const auto g = index_of(labels, gold);
    const auto p = index_of(labels, pred);
    if (g == labels.size() || p == labels.size()) return 0;
    return counts[g][p];
}

long ConfusionMatrix::trace() const {
    long t = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) t += counts[i][i];
    return t;
}

ConfusionMatrix confusion(const Predictions& preds, const Predictions& golds, const taxonomy::Taxonomy& taxonomy,
                          Level level, bool include_nei) {
    ConfusionMatrix m;
    m.level = level;
    m.include_nei = include_nei;
    std::vector<std::pair<VerdictLabel, VerdictLabel>> pairs;
    for (const auto& [id, pred] : preds) {
        auto g = golds.find(id);
        if (g == golds.end()) throw MissingGold(id);
        ++m.n_predictions;
        const auto p = taxonomy.consolidate(pred, level);
        if (p.is_nei()) ++m.n_nei_predictions;
        if (p.is_nei() && !include_nei) continue;
        pairs.emplace_back(taxonomy.consolidate(g->second, level), p);
    }

    std::set<std::string> present;
    for (const auto& [g, p] : pairs) {
        present.insert(g.token);
        present.insert(p.token);
    }
    for (const auto& l : taxonomy.level_labels(level)) {
        if (present.erase(l.token)) m.labels.push_back(l);
    }
    for (const auto& leftover : present) m.labels.push_back(debate::resolve_label(taxonomy, leftover));

    m.counts.assign(m.labels.size(), std::vector<long>(m.labels.size(), 0));
    for (const auto& [g, p] : pairs) ++m.counts[index_of(m.labels, g.token)][index_of(m.labels, p.token)];
    m.n = static_cast<long>(pairs.size());
    return m;
}

MetricsReport metrics(const ConfusionMatrix& m) {
    if (m.n <= 0) throw EmptyEvaluation();
    MetricsReport r;
    r.level = m.level;
    r.include_nei = m.include_nei;
    r.n_claims = m.n;
    const std::size_t k = m.labels.size();
    double sum_p = 0, sum_r = 0, sum_f = 0;
    double gold_p = 0, gold_r = 0, gold_f = 0;
    int gold_classes = 0;
    for (std::size_t c = 0; c < k; ++c) {
        ClassMetrics cm;
        cm.label = m.labels[c].token;
        cm.true_positive = m.counts[c][c];
        for (std::size_t o = 0; o < k; ++o) {
            cm.support += m.counts[c][o];
            cm.predicted += m.counts[o][c];
        }
        cm.precision = safe_ratio(cm.true_positive, cm.predicted, r.zero_division);
        cm.recall = safe_ratio(cm.true_positive, cm.support, r.zero_division);
        cm.f1 = cm.precision + cm.recall > 0 ? 2 * cm.precision * cm.recall / (cm.precision + cm.recall) : 0.0;
        sum_p += cm.precision;
        sum_r += cm.recall;
        sum_f += cm.f1;
        if (cm.support > 0) {
            ++gold_classes;
            gold_p += cm.precision;
            gold_r += cm.recall;
            gold_f += cm.f1;
        }
        r.per_class.push_back(std::move(cm));
    }
    const double kd = static_cast<double>(k);
    r.precision = 100.0 * sum_p / kd;
    r.recall = 100.0 * sum_r / kd;
    r.macro_f1 = 100.0 * sum_f / kd;
    r.accuracy = 100.0 * static_cast<double>(m.trace()) / static_cast<double>(m.n);
    if (gold_classes > 0) {
        r.precision_gold_only = 100.0 * gold_p / gold_classes;
        r.recall_gold_only = 100.0 * gold_r / gold_classes;
        r.macro_f1_gold_only = 100.0 * gold_f / gold_classes;
    }
    if (m.n_predictions > 0) {
        r.nei_ratio = 100.0 * static_cast<double>(m.n_nei_predictions) / static_cast<double>(m.n_predictions);
    }
    return r;
}

json MetricsReport::to_json() const {
    json classes = json::array();
    for (const auto& c : per_class) {
        classes.push_back({{"label", c.label},
                           {"support", c.support},
                           {"predicted", c.predicted},
                           {"true_positive", c.true_positive},
                           {"precision", 100.0 * c.precision},
                           {"recall", 100.0 * c.recall},
                           {"f1", 100.0 * c.f1}});
    }
    return {{"level", taxonomy::to_string(level)},
            {"include_nei", include_nei},
            {"n_claims", n_claims},
            {"precision", precision},
            {"recall", recall},
            {"macro_f1", macro_f1},
            {"accuracy", accuracy},
            {"nei_ratio", nei_ratio},
            {"zero_division", zero_division},
            {"macro_over", "gold_or_predicted"},
            {"gold_only", {{"precision", precision_gold_only}, {"recall", recall_gold_only}, {"macro_f1", macro_f1_gold_only}}},
            {"per_class", std::move(classes)}};
}

double nei_ratio(const std::vector<VerdictLabel>& preds) {
    if (preds.empty()) throw EmptyEvaluation();
    const auto nei = std::count_if(preds.begin(), preds.end(), [](const VerdictLabel& l) { return l.is_nei(); });
    return 100.0 * static_cast<double>(nei) / static_cast<double>(preds.size());
}

double nei_ratio(const Predictions& preds) {
    std::vector<VerdictLabel> v;
    v.reserve(preds.size());
    for (const auto& [id, l] : preds) v.push_back(l);
    return nei_ratio(v);
}

std::string format_percent(double value) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(2) << value;
    return out.str();
}

// ---- report ----

Report report(const std::vector<debate::DebateTranscript>& transcripts, const Predictions& golds,
              const taxonomy::Taxonomy& taxonomy, const ReportOptions& options) {
    if (transcripts.empty()) throw EmptyEvaluation();
    Predictions mediator;
    std::map<std::string, Predictions> advocates;
    for (const auto& t : transcripts) {
        if (!t.complete() || !t.final_verdict) throw Error("transcript '" + t.claim_id + "' has no final verdict");
        if (!golds.count(t.claim_id)) throw MissingGold(t.claim_id);
        mediator[t.claim_id] = *t.final_verdict;
        if (options.per_advocate && !t.rounds.empty()) {
            for (const auto& r : t.rounds.back().responses) advocates[r.advocate_name][t.claim_id] = r.verdict;
        }
    }
    Report rep;
    for (auto level : options.levels) {
        int k = 0;
        for (const auto& l : taxonomy.level_labels(level)) k += l.is_nei() ? 0 : 1;
        rep.class_counts[level] = k;
        for (bool include_nei : options.nei_modes) {
            auto add = [&](const std::string& subject, const Predictions& preds) {
                const auto m = confusion(preds, golds, taxonomy, level, include_nei);
                if (m.n == 0) {
                    // Every prediction was nei: nothing left to score in this mode.
                    MetricsReport empty;
                    empty.level = level;
                    empty.include_nei = include_nei;
                    empty.nei_ratio = 100.0;
                    empty.zero_division = true;
                    rep.rows.push_back({subject, empty});
                    return;
                }
                rep.rows.push_back({subject, metrics(m)});
            };
            add("mediator", mediator);
            for (const auto& [name, preds] : advocates) add(name, preds);
        }
    }
    return rep;
}

json Report::to_json() const {
    json rows_json = json::array();
    for (const auto& r : rows) {
        auto j = r.metrics.to_json();
        j["subject"] = r.subject;
        rows_json.push_back(std::move(j));
    }
    return {{"rows", std::move(rows_json)}};
}

std::string Report::to_text() const {
    std::size_t subject_width = std::string("Subject").size();
    for (const auto& r : rows) subject_width = std::max(subject_width, r.subject.size());
    const auto sw = static_cast<int>(subject_width);
    std::ostringstream out;
    std::string current;
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        const auto it = class_counts.find(m.level);
        const int k = it == class_counts.end() ? 0 : it->second;
        const auto panel = std::to_string(k) + " classes " + (m.include_nei ? "incl." : "excl.") + " NEI (" +
                           std::string(taxonomy::to_string(m.level)) + ")";
        if (panel != current) {
            if (!current.empty()) out << "\n";
            current = panel;
            out << "Panel: " << panel << "\n";
            out << std::left << std::setw(sw) << "Subject" << std::right << std::setw(10) << "# Claims"
                << std::setw(9) << "Prec." << std::setw(9) << "Rec." << std::setw(9) << "F1" << std::setw(9)
                << "Acc." << std::setw(9) << "NEI %" << "\n";
        }
        out << std::left << std::setw(sw) << r.subject << std::right << std::setw(10) << m.n_claims << std::setw(9)
            << format_percent(m.precision) << std::setw(9) << format_percent(m.recall) << std::setw(9)
            << format_percent(m.macro_f1) << std::setw(9) << format_percent(m.accuracy) << std::setw(9)
            << format_percent(m.nei_ratio) << "\n";
    }
    return out.str();
}

}  // namespace factdebate::eval

#include "factdebate/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "factdebate/evaluation.hpp"

namespace factdebate::cli {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

const std::set<std::string> kCredentialKeys{"api_key", "apikey", "authorization", "password", "secret", "bearer"};

void reject_credentials(const json& j, const std::string& where) {
    if (j.is_object()) {
        for (const auto& [key, value] : j.items()) {
            std::string k = key;
            std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
            if (kCredentialKeys.count(k)) {
                throw ConfigError("config field '" + where + key +
                                  "' looks like a credential; credentials are read from the environment only");
            }
            reject_credentials(value, where + key + ".");
        }
    } else if (j.is_array()) {
        for (const auto& v : j) reject_credentials(v, where);
    }
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!allowed.count(key)) throw ConfigError("unknown config field '" + where + "." + key + "'");
    }
}

template <typename T>
T field(const json& j, const char* key, T fallback, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config field '" + where + "." + key + "' has the wrong type");
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

agents::AdvocateConfig parse_advocate(const json& j, std::size_t i) {
    const auto where = "roster[" + std::to_string(i) + "]";
    check_keys(j, {"name", "persona", "corpus_id", "retrieval_k", "template"}, where);
    agents::AdvocateConfig a;
    a.name = field<std::string>(j, "name", "", where);
    a.persona.kind = agents::persona_kind_from_string(field<std::string>(j, "persona", "scientific_rag", where));
    a.persona.prompt_template_id = field<std::string>(j, "template", "", where);
    if (!a.persona.prompt_template_id.empty() &&
        std::find(agents::kTemplateRoles.begin(), agents::kTemplateRoles.end(), a.persona.prompt_template_id) ==
            agents::kTemplateRoles.end()) {
        throw ConfigError(where + ": unknown template '" + a.persona.prompt_template_id + "'");
    }
    if (j.contains("corpus_id") && !j["corpus_id"].is_null()) a.corpus_id = field<std::string>(j, "corpus_id", "", where);
    a.retrieval_k = field<int>(j, "retrieval_k", corpus::kDefaultTopK, where);
    return a;
}

// ---- output helpers ----

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

void print_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths;
    for (const auto& r : rows) {
        widths.resize(std::max(widths.size(), r.size()), 0);
        for (std::size_t c = 0; c < r.size(); ++c) widths[c] = std::max(widths[c], r[c].size());
    }
    for (const auto& r : rows) {
        std::string line;
        for (std::size_t c = 0; c < r.size(); ++c) {
            line += c + 1 == r.size() ? r[c] : pad(r[c], widths[c]) + "  ";
        }
        out << line << "\n";
    }
}

void print_check_result(std::ostream& out, const debate::DebateTranscript& t, const taxonomy::Taxonomy& tax,
                        const std::optional<taxonomy::Level>& level) {
    out << "Final verdict: " << (t.final_verdict ? t.final_verdict->token : std::string("(none)")) << "\n";
    if (level && t.final_verdict) {
        out << "Verdict at " << taxonomy::to_string(*level) << ": " << tax.consolidate(*t.final_verdict, *level).token
            << "\n";
    }
    const auto rounds = t.rounds.size();
    out << "Status: " << debate::to_string(t.status);
    if (!t.subclaim_mode()) out << " after " << rounds << (rounds == 1 ? " round" : " rounds");
    out << "\n";
    out << "Summary: " << (t.summary.empty() ? std::string("(none)") : t.summary) << "\n\n";

    std::vector<std::vector<std::string>> rows;
    if (t.subclaim_mode()) {
        rows.push_back({"Subclaim", "Verdict", "Rounds"});
        for (const auto& s : t.subclaim_debates) {
            rows.push_back({s.claim, s.final_verdict ? s.final_verdict->token : "(none)", std::to_string(s.rounds.size())});
        }
    } else if (!t.rounds.empty()) {
        rows.push_back({"Advocate", "Verdict", "Evidence", "Agreement"});
        for (const auto& r : t.rounds.back().responses) {
            rows.push_back({r.advocate_name, r.verdict.token + (r.parse_failed ? " (unparsed)" : ""),
                            std::string(agents::to_string(r.evidence_level)),
                            std::string(agents::to_string(r.agreement_level))});
        }
    }
    print_table(out, rows);
}

// ---- commands ----

struct CommonRunFlags {
    std::string config;
    std::string out;
    bool subclaims = false;
    int max_rounds = 0;
    int jobs = 0;
};

RunConfig load_with_overrides(const CommonRunFlags& flags) {
    auto config = RunConfig::load(flags.config);
    if (!flags.out.empty()) config.out_dir = flags.out;
    if (flags.subclaims) config.debate.subclaims = true;
    if (flags.max_rounds != 0) {
        if (flags.max_rounds < 1) throw ConfigError("--max-rounds must be at least 1");
        config.debate.mediator.max_rounds = flags.max_rounds;
    }
    if (flags.jobs != 0) {
        if (flags.jobs < 1) throw ConfigError("--jobs must be at least 1");
        config.jobs = flags.jobs;
    }
    return config;
}

int cmd_ingest(const std::string& manifest, const std::string& out_path, int window, int overlap, std::ostream& out) {
    corpus::ChunkingParams params{window, overlap};
    params.validate();
    if (out_path.empty()) throw ConfigError("ingest needs --out");
    auto index = corpus::ingest_manifest(manifest, params);
    index.save(out_path);
    out << "Indexed " << index.documents().size() << " documents, " << index.chunks().size() << " chunks -> "
        << out_path << "\n";
    return kExitOk;
}

int cmd_check(const std::string& claim, const std::string& claim_id, const CommonRunFlags& flags,
              const std::optional<taxonomy::Level>& level, std::ostream& out, std::ostream& err) {
    if (claim.find_first_not_of(" \t\r\n") == std::string::npos) throw ConfigError("claim text is empty");
    const auto config = load_with_overrides(flags);
    auto rt = load_runtime(config);
    const debate::DebateEngine engine(*rt.taxonomy, *rt.templates, *rt.backend, *rt.registry, config.debate);
    const auto id = claim_id.empty() ? default_claim_id(claim) : claim_id;

    const auto t = engine.run(id, claim);
    const auto path = config.out_dir / debate::transcript_filename(id);
    t.save(path);
    if (t.error) {
        err << "backend failure: " << *t.error << "\n";
        err << "partial transcript: " << path.generic_string() << "\n";
        return kExitBackend;
    }
    print_check_result(out, t, *rt.taxonomy, level);
    out << "\nTranscript: " << path.generic_string() << "\n";
    return kExitOk;
}

int cmd_batch(const std::string& claims_path, const CommonRunFlags& flags, std::ostream& out) {
    const auto config = load_with_overrides(flags);
    auto rt = load_runtime(config);
    const debate::DebateEngine engine(*rt.taxonomy, *rt.templates, *rt.backend, *rt.registry, config.debate);
    const auto records = eval::load_claims(claims_path, *rt.taxonomy);

    std::vector<debate::ClaimInput> inputs;
    inputs.reserve(records.size());
    for (const auto& r : records) inputs.push_back({r.claim_id, eval::claim_prompt_text(r)});
    const auto result = debate::run_batch(engine, inputs, {config.out_dir, config.jobs});
    out << result.summary.to_text();
    out << "Skipped (already complete): " << result.skipped << "\n";
    out << "Summary: " << (config.out_dir / "summary.json").generic_string() << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& transcripts_dir, const std::string& claims_path, const std::string& config_path,
             const std::vector<std::string>& level_names, bool include_only, bool exclude_only, bool per_advocate,
             const std::string& json_out, std::ostream& out, std::ostream& err) {
    std::unique_ptr<taxonomy::Taxonomy> owned;
    const taxonomy::Taxonomy* tax = &taxonomy::Taxonomy::default_taxonomy();
    if (!config_path.empty()) {
        const auto config = RunConfig::load(config_path);
        if (config.taxonomy_path) {
            owned = std::make_unique<taxonomy::Taxonomy>(taxonomy::Taxonomy::load_file(*config.taxonomy_path));
            tax = owned.get();
        }
    }
    eval::ReportOptions options;
    if (!level_names.empty()) {
        options.levels.clear();
        for (const auto& n : level_names) options.levels.push_back(taxonomy::level_from_string(n));
    }
    if (include_only) options.nei_modes = {true};
    if (exclude_only) options.nei_modes = {false};
    options.per_advocate = per_advocate;

    if (!fs::is_directory(transcripts_dir)) throw ConfigError("transcript directory " + transcripts_dir + " does not exist");
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(transcripts_dir)) {
        const auto name = entry.path().filename().string();
        const std::string suffix = ".transcript.json";
        if (name.size() > suffix.size() && name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<debate::DebateTranscript> transcripts;
    for (const auto& f : files) transcripts.push_back(debate::DebateTranscript::load(f, *tax));

    eval::Predictions golds;
    for (const auto& r : eval::load_claims(claims_path, *tax)) {
        if (r.gold_fine_verdict) golds[r.claim_id] = *r.gold_fine_verdict;
    }
    std::vector<std::string> missing;
    std::vector<std::string> unfinished;
    for (const auto& t : transcripts) {
        if (!golds.count(t.claim_id)) missing.push_back(t.claim_id);
        if (!t.complete()) unfinished.push_back(t.claim_id);
    }
    auto list = [](const std::vector<std::string>& ids) {
        std::string s;
        for (const auto& id : ids) s += (s.empty() ? "" : ", ") + id;
        return s;
    };
    if (!missing.empty()) {
        err << "missing gold labels for: " << list(missing) << "\n";
        return kExitUsage;
    }
    if (!unfinished.empty()) {
        err << "transcripts without a final verdict: " << list(unfinished) << "\n";
        return kExitUsage;
    }
    const auto rep = eval::report(transcripts, golds, *tax, options);
    out << rep.to_text();
    const fs::path json_path = json_out.empty() ? fs::path(transcripts_dir) / "report.json" : fs::path(json_out);
    {
        if (json_path.has_parent_path()) fs::create_directories(json_path.parent_path());
        std::ofstream f(json_path, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot write " + json_path.string());
        f << rep.to_json().dump(2) << "\n";
    }
    out << "\nReport: " << json_path.generic_string() << "\n";
    return kExitOk;
}

int cmd_bootstrap(const std::string& claims_path, const CommonRunFlags& flags, std::ostream& out) {
    if (flags.out.empty()) throw ConfigError("bootstrap needs --out for the labeled claims file");
    auto config = RunConfig::load(flags.config);
    if (flags.jobs != 0) {
        if (flags.jobs < 1) throw ConfigError("--jobs must be at least 1");
        config.jobs = flags.jobs;
    }
    auto rt = load_runtime(config);
    auto records = eval::load_claims(claims_path, *rt.taxonomy);
    for (const auto& r : records) {
        if (!r.explanation || r.explanation->find_first_not_of(" \t\r\n") == std::string::npos) {
            throw ConfigError("claim '" + r.claim_id + "' has no explanation to label from");
        }
    }
    const auto result = eval::bootstrap_labels(std::move(records), *rt.backend, *rt.taxonomy, config.jobs,
                                               config.debate.model_id);
    eval::save_claims(flags.out, result.records);
    const auto labeled = result.records.size() - result.flagged.size();
    out << "Labeled " << labeled << " of " << result.records.size() << " claims -> " << flags.out << "\n";
    if (!result.flagged.empty()) {
        out << "Flagged:\n";
        for (const auto& f : result.flagged) out << "  " << f.claim_id << ": " << f.reason << "\n";
    }
    return kExitOk;
}

}  // namespace

// ---- config ----

RunConfig RunConfig::from_json(const json& doc, const fs::path& base_dir) {
    reject_credentials(doc, "");
    check_keys(doc,
               {"description", "taxonomy", "templates", "corpora", "chunking", "roster", "mediator", "backend",
                "model_id", "temperature", "max_tokens", "subclaims", "out_dir", "jobs"},
               "config");
    RunConfig c;
    if (auto t = field<std::string>(doc, "taxonomy", "", "config"); !t.empty()) c.taxonomy_path = resolve(base_dir, t);
    if (auto t = field<std::string>(doc, "templates", "", "config"); !t.empty()) c.templates_dir = resolve(base_dir, t);
    if (doc.contains("corpora")) {
        if (!doc["corpora"].is_object()) throw ConfigError("config field 'corpora' must map corpus ids to paths");
        for (const auto& [id, path] : doc["corpora"].items()) {
            if (!path.is_string()) throw ConfigError("corpus '" + id + "' path must be a string");
            c.corpora[id] = resolve(base_dir, path.get<std::string>());
        }
    }
    if (doc.contains("chunking")) {
        const auto& ch = doc["chunking"];
        check_keys(ch, {"window", "overlap"}, "chunking");
        c.chunking.window = field<int>(ch, "window", c.chunking.window, "chunking");
        c.chunking.overlap = field<int>(ch, "overlap", c.chunking.overlap, "chunking");
        c.chunking.validate();
    }
    if (!doc.contains("roster") || !doc["roster"].is_array()) throw ConfigError("config needs a 'roster' array");
    for (std::size_t i = 0; i < doc["roster"].size(); ++i) c.debate.roster.push_back(parse_advocate(doc["roster"][i], i));
    if (doc.contains("mediator")) {
        const auto& m = doc["mediator"];
        check_keys(m, {"variant", "max_rounds", "reconsider_nei"}, "mediator");
        if (auto v = field<std::string>(m, "variant", "", "mediator"); !v.empty()) {
            c.debate.mediator.variant = agents::mediator_variant_from_string(v);
        }
        c.debate.mediator.max_rounds = field<int>(m, "max_rounds", c.debate.mediator.max_rounds, "mediator");
        c.debate.mediator.reconsider_nei = field<bool>(m, "reconsider_nei", c.debate.mediator.reconsider_nei, "mediator");
    }
    if (!doc.contains("backend")) throw ConfigError("config needs a 'backend' section");
    {
        const auto& b = doc["backend"];
        check_keys(b, {"kind", "rules", "base_url", "model", "timeout_s", "max_attempts", "max_in_flight"}, "backend");
        const auto kind = field<std::string>(b, "kind", "", "backend");
        if (kind == "scripted") {
            c.backend.kind = BackendSpec::Kind::scripted;
            const auto rules = field<std::string>(b, "rules", "", "backend");
            if (rules.empty()) throw ConfigError("scripted backend needs 'rules'");
            c.backend.rules_path = resolve(base_dir, rules);
        } else if (kind == "remote") {
            c.backend.kind = BackendSpec::Kind::remote;
            c.backend.base_url = field<std::string>(b, "base_url", "", "backend");
            c.backend.model = field<std::string>(b, "model", "", "backend");
            c.backend.timeout_s = field<int>(b, "timeout_s", c.backend.timeout_s, "backend");
            c.backend.max_attempts = field<int>(b, "max_attempts", c.backend.max_attempts, "backend");
            c.backend.max_in_flight = field<int>(b, "max_in_flight", c.backend.max_in_flight, "backend");
            if (c.backend.timeout_s < 1) throw ConfigError("backend timeout_s must be at least 1");
            if (c.backend.max_in_flight < 1 || c.backend.max_in_flight > backend::kMaxInFlightCap) {
                throw ConfigError("backend max_in_flight must be within [1, " +
                                  std::to_string(backend::kMaxInFlightCap) + "]");
            }
        } else {
            throw ConfigError("backend kind must be 'scripted' or 'remote'");
        }
    }
    c.debate.model_id = field<std::string>(doc, "model_id", "", "config");
    c.debate.temperature = field<double>(doc, "temperature", 0.0, "config");
    c.debate.max_tokens = field<int>(doc, "max_tokens", 2048, "config");
    c.debate.subclaims = field<bool>(doc, "subclaims", false, "config");
    if (auto o = field<std::string>(doc, "out_dir", "", "config"); !o.empty()) c.out_dir = resolve(base_dir, o);
    c.jobs = field<int>(doc, "jobs", 1, "config");
    if (c.jobs < 1) throw ConfigError("jobs must be at least 1");
    c.debate.validate();
    return c;
}

RunConfig RunConfig::load(const fs::path& path) {
    if (path.empty()) throw ConfigError("--config is required");
    const auto text = read_text(path);
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return from_json(doc, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

Runtime load_runtime(const RunConfig& config) {
    Runtime rt;
    rt.taxonomy = std::make_unique<taxonomy::Taxonomy>(config.taxonomy_path
                                                           ? taxonomy::Taxonomy::load_file(*config.taxonomy_path)
                                                           : taxonomy::Taxonomy::default_taxonomy());
    rt.templates = std::make_unique<agents::TemplateSet>(
        config.templates_dir ? agents::TemplateSet::load_dir(*config.templates_dir) : agents::TemplateSet::defaults());
    rt.registry = std::make_unique<corpus::IndexRegistry>();
    for (const auto& [id, path] : config.corpora) {
        if (path.extension() == ".jsonl") {
            rt.registry->add_index(id, corpus::ingest_manifest(path, config.chunking));
        } else {
            rt.registry->add_index(id, corpus::CorpusIndex::load(path));
        }
    }
    agents::validate_roster(config.debate.roster, rt.registry.get());
    if (config.backend.kind == BackendSpec::Kind::scripted) {
        rt.backend = std::make_unique<backend::ScriptedBackend>(backend::ScriptedBackend::load_file(config.backend.rules_path));
    } else {
        backend::RemoteConfig rc;
        if (!config.backend.base_url.empty()) rc.base_url = config.backend.base_url;
        if (!config.backend.model.empty()) rc.model_id = config.backend.model;
        rc.timeout = std::chrono::seconds(config.backend.timeout_s);
        rc.max_attempts = config.backend.max_attempts;
        rc.max_in_flight = config.backend.max_in_flight;
        rt.backend = std::make_unique<backend::RemoteBackend>(backend::RemoteConfig::from_env(rc));
    }
    return rt;
}

std::string default_claim_id(std::string_view claim_text) { return "claim-" + debate::fnv1a64_hex(claim_text).substr(0, 12); }

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multi-advocate claim verification and evaluation", "factdebate"};
    app.require_subcommand(1);

    std::string manifest, index_out;
    int window = corpus::ChunkingParams{}.window;
    int overlap = corpus::ChunkingParams{}.overlap;
    auto* ingest = app.add_subcommand("ingest", "Chunk and index a corpus manifest");
    ingest->add_option("manifest", manifest, "JSON-lines document manifest")->required();
    ingest->add_option("--out", index_out, "Index file to write")->required();
    ingest->add_option("--window", window, "Chunk window in whitespace tokens");
    ingest->add_option("--overlap", overlap, "Tokens shared by consecutive chunks");

    CommonRunFlags check_flags;
    std::string claim, claim_id, check_level;
    auto* check = app.add_subcommand("check", "Fact-check one claim");
    check->add_option("claim", claim, "Claim text")->required();
    check->add_option("--config", check_flags.config, "Run configuration")->required();
    check->add_option("--out", check_flags.out, "Transcript directory (overrides out_dir)");
    check->add_option("--claim-id", claim_id, "Claim id used for the transcript file");
    check->add_option("--level", check_level, "Also print the verdict at this level")
        ->check(CLI::IsMember({"fine", "seven", "five", "binary"}));
    check->add_flag("--subclaims", check_flags.subclaims, "Debate each subclaim separately");
    check->add_option("--max-rounds", check_flags.max_rounds, "Round cap");

    CommonRunFlags batch_flags;
    std::string batch_claims;
    auto* batch = app.add_subcommand("batch", "Fact-check every claim of a JSON-lines file");
    batch->add_option("claims", batch_claims, "Claims file")->required();
    batch->add_option("--config", batch_flags.config, "Run configuration")->required();
    batch->add_option("--out", batch_flags.out, "Transcript directory (overrides out_dir)");
    batch->add_option("--jobs", batch_flags.jobs, "Claims debated concurrently");
    batch->add_flag("--subclaims", batch_flags.subclaims, "Debate each subclaim separately");
    batch->add_option("--max-rounds", batch_flags.max_rounds, "Round cap");

    std::string eval_dir, eval_claims, eval_config, eval_out;
    std::vector<std::string> eval_levels;
    bool include_nei = false, exclude_nei = false, per_advocate = false;
    auto* evaluate = app.add_subcommand("eval", "Score transcripts against gold labels");
    evaluate->add_option("transcripts", eval_dir, "Directory of transcripts")->required();
    evaluate->add_option("claims", eval_claims, "Claims file with gold labels")->required();
    evaluate->add_option("--config", eval_config, "Run configuration (for its taxonomy)");
    evaluate->add_option("--level", eval_levels, "Levels to report (repeatable)")
        ->check(CLI::IsMember({"fine", "seven", "five", "binary"}));
    auto* inc = evaluate->add_flag("--include-nei", include_nei, "Only the mode that keeps nei predictions");
    auto* exc = evaluate->add_flag("--exclude-nei", exclude_nei, "Only the mode that drops nei predictions");
    inc->excludes(exc);
    evaluate->add_flag("--per-advocate", per_advocate, "Add rows for each advocate's last verdict");
    evaluate->add_option("--out", eval_out, "JSON report path");

    CommonRunFlags boot_flags;
    std::string boot_claims;
    auto* boot = app.add_subcommand("bootstrap", "Derive gold labels from claim explanations");
    boot->add_option("claims", boot_claims, "Claims file with explanations")->required();
    boot->add_option("--config", boot_flags.config, "Run configuration")->required();
    boot->add_option("--out", boot_flags.out, "Labeled claims file to write")->required();
    boot->add_option("--jobs", boot_flags.jobs, "Concurrent labeling calls");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*ingest) return cmd_ingest(manifest, index_out, window, overlap, out);
        if (*check) {
            std::optional<taxonomy::Level> level;
            if (!check_level.empty()) level = taxonomy::level_from_string(check_level);
            return cmd_check(claim, claim_id, check_flags, level, out, err);
        }
        if (*batch) return cmd_batch(batch_claims, batch_flags, out);
        if (*evaluate) {
            return cmd_eval(eval_dir, eval_claims, eval_config, eval_levels, include_nei, exclude_nei, per_advocate,
                            eval_out, out, err);
        }
        if (*boot) return cmd_bootstrap(boot_claims, boot_flags, out);
    } catch (const backend::BackendError& e) {
        err << "backend failure: " << e.what() << "\n";
        return kExitBackend;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace factdebate::cli

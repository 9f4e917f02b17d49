#include "factdebate/debate.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <future>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace factdebate::debate {

namespace {

using json = nlohmann::json;
using agents::CallRecord;
using Kind = MediatorOutcome::Kind;

std::string_view kind_name(Kind k) {
    switch (k) {
        case Kind::final: return "final";
        case Kind::follow_up: return "follow_up";
        case Kind::unparseable: return "unparseable";
    }
    return "final";
}

Kind kind_from_name(std::string_view s) {
    if (s == "final") return Kind::final;
    if (s == "follow_up") return Kind::follow_up;
    if (s == "unparseable") return Kind::unparseable;
    throw Error("unknown mediator outcome kind '" + std::string(s) + "'");
}

json call_to_json(const CallRecord& c) {
    return {{"role_id", c.role_id},
            {"system_prompt", c.system_prompt},
            {"user_prompt", c.user_prompt},
            {"response", c.response}};
}

CallRecord call_from_json(const json& j) {
    return {j.at("role_id").get<std::string>(), j.at("system_prompt").get<std::string>(),
            j.at("user_prompt").get<std::string>(), j.at("response").get<std::string>()};
}

json response_to_json(const AdvocateResponse& r) {
    json citations = json::array();
    for (const auto& c : r.citations) {
        citations.push_back({{"title", c.title}, {"page", c.page}, {"organization", c.organization}, {"url", c.url}});
    }
    return {{"advocate", r.advocate_name},
            {"verdict", r.verdict.token},
            {"parse_failed", r.parse_failed},
            {"evidence_level", agents::to_string(r.evidence_level)},
            {"agreement_level", agents::to_string(r.agreement_level)},
            {"citations", std::move(citations)},
            {"call", call_to_json(r.call)}};
}

AdvocateResponse response_from_json(const json& j, const taxonomy::Taxonomy& tax) {
    AdvocateResponse r;
    r.advocate_name = j.at("advocate").get<std::string>();
    r.verdict = resolve_label(tax, j.at("verdict").get<std::string>());
    r.parse_failed = j.at("parse_failed").get<bool>();
    r.evidence_level = agents::evidence_level_from_string(j.at("evidence_level").get<std::string>());
    r.agreement_level = agents::agreement_level_from_string(j.at("agreement_level").get<std::string>());
    for (const auto& c : j.at("citations")) {
        r.citations.push_back({c.at("title").get<std::string>(), c.at("page").get<std::string>(),
                               c.at("url").get<std::string>(), c.at("organization").get<std::string>()});
    }
    r.call = call_from_json(j.at("call"));
    r.rationale = r.call.response;
    return r;
}

json outcome_to_json(const MediatorOutcome& o) {
    json j{{"kind", kind_name(o.kind)}};
    j["verdict"] = o.kind == Kind::final ? json(o.verdict.token) : json(nullptr);
    j["summary"] = o.summary;
    json questions = json::array();
    for (const auto& q : o.questions) questions.push_back({{"advocate", q.advocate_name}, {"question", q.question}});
    j["questions"] = std::move(questions);
    j["call"] = call_to_json(o.call);
    return j;
}

MediatorOutcome outcome_from_json(const json& j, const taxonomy::Taxonomy& tax) {
    MediatorOutcome o;
    o.kind = kind_from_name(j.at("kind").get<std::string>());
    if (o.kind == Kind::final) {
        o.verdict = resolve_label(tax, j.at("verdict").get<std::string>());
    } else if (o.kind == Kind::follow_up) {
        o.verdict = tax.follow_up();
    }
    o.summary = j.at("summary").get<std::string>();
    for (const auto& q : j.at("questions")) {
        o.questions.push_back({q.at("advocate").get<std::string>(), q.at("question").get<std::string>()});
    }
    o.call = call_from_json(j.at("call"));
    return o;
}

std::string fingerprint_hash(const json& fp) {
    if (!fp.is_object()) return {};
    return fp.value("hash", std::string());
}

// Text of earlier mediations shown to the mediator in later rounds.
std::string mediation_history(const std::vector<Round>& rounds) {
    std::string out;
    for (const auto& r : rounds) {
        if (!out.empty()) out += "\n";
        out += "Round " + std::to_string(r.index) + ": ";
        switch (r.mediator.kind) {
            case Kind::final:
                out += "verdict " + taxonomy::format_verdict(r.mediator.verdict) +
                       " was sent back to the advocates for reconsideration.";
                break;
            case Kind::follow_up:
                out += "follow-up questions were asked.";
                for (const auto& q : r.mediator.questions) {
                    out += "\nQUESTION(" + q.advocate_name + "): " + q.question;
                }
                break;
            case Kind::unparseable:
                out += "the mediation could not be parsed.";
                break;
        }
    }
    return out;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out) throw Error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string forced_summary(const VerdictLabel& v) {
    return "No mediator verdict was reached; the verdict " + taxonomy::format_verdict(v) +
           " is the majority of the advocates' final binary verdicts.";
}

}  // namespace

std::string_view to_string(Status s) {
    switch (s) {
        case Status::in_progress: return "in_progress";
        case Status::final: return "final";
        case Status::forced: return "forced";
    }
    return "in_progress";
}

Status status_from_string(std::string_view s) {
    for (auto st : {Status::in_progress, Status::final, Status::forced}) {
        if (to_string(st) == s) return st;
    }
    throw Error("unknown debate status '" + std::string(s) + "'");
}

VerdictLabel resolve_label(const taxonomy::Taxonomy& tax, std::string_view token) {
    if (auto l = tax.find(token)) return *l;
    for (auto level : {taxonomy::Level::seven, taxonomy::Level::five, taxonomy::Level::binary}) {
        for (const auto& l : tax.level_labels(level)) {
            if (l.token == token) return l;
        }
    }
    throw UnknownLabel(std::string(token));
}

std::string fnv1a64_hex(std::string_view data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex << std::setw(16) << std::setfill('0') << h;
    return out.str();
}

// ---- transcript ----

json DebateTranscript::to_json() const {
    json j;
    j["claim_id"] = claim_id;
    j["claim"] = claim;
    j["config_fingerprint"] = config_fingerprint;
    json rs = json::array();
    for (const auto& r : rounds) {
        json responses = json::array();
        for (const auto& resp : r.responses) responses.push_back(response_to_json(resp));
        rs.push_back({{"round", r.index}, {"responses", std::move(responses)}, {"mediator", outcome_to_json(r.mediator)}});
    }
    j["rounds"] = std::move(rs);
    j["final_verdict"] = final_verdict ? json(final_verdict->token) : json(nullptr);
    j["status"] = to_string(status);
    j["summary"] = summary;
    if (error) j["error"] = *error;
    if (decomposition) {
        j["subclaims"] = subclaims;
        j["decomposition"] = call_to_json(*decomposition);
        json subs = json::array();
        for (const auto& s : subclaim_debates) subs.push_back(s.to_json());
        j["subclaim_debates"] = std::move(subs);
        j["synthesis"] = synthesis ? outcome_to_json(*synthesis) : json(nullptr);
    }
    return j;
}

DebateTranscript DebateTranscript::from_json(const json& j, const taxonomy::Taxonomy& tax) {
    DebateTranscript t;
    try {
        t.claim_id = j.at("claim_id").get<std::string>();
        t.claim = j.at("claim").get<std::string>();
        t.config_fingerprint = j.at("config_fingerprint");
        for (const auto& r : j.at("rounds")) {
            Round round;
            round.index = r.at("round").get<int>();
            for (const auto& resp : r.at("responses")) round.responses.push_back(response_from_json(resp, tax));
            round.mediator = outcome_from_json(r.at("mediator"), tax);
            t.rounds.push_back(std::move(round));
        }
        if (!j.at("final_verdict").is_null()) {
            t.final_verdict = resolve_label(tax, j["final_verdict"].get<std::string>());
        }
        t.status = status_from_string(j.at("status").get<std::string>());
        t.summary = j.at("summary").get<std::string>();
        if (j.contains("error")) t.error = j["error"].get<std::string>();
        if (j.contains("decomposition")) {
            t.subclaims = j.at("subclaims").get<std::vector<std::string>>();
            t.decomposition = call_from_json(j["decomposition"]);
            for (const auto& s : j.at("subclaim_debates")) t.subclaim_debates.push_back(from_json(s, tax));
            if (!j.at("synthesis").is_null()) t.synthesis = outcome_from_json(j["synthesis"], tax);
        }
    } catch (const json::exception& e) {
        throw Error(std::string("malformed transcript: ") + e.what());
    }
    return t;
}

std::string DebateTranscript::dump() const { return to_json().dump(2) + "\n"; }

DebateTranscript DebateTranscript::load(const std::filesystem::path& path, const taxonomy::Taxonomy& tax) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read transcript " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw Error("transcript " + path.string() + " is not JSON: " + e.what());
    }
    return from_json(doc, tax);
}

void DebateTranscript::save(const std::filesystem::path& path) const { write_atomic(path, dump()); }

std::vector<CallRecord> recorded_calls(const DebateTranscript& t) {
    std::vector<CallRecord> calls;
    if (t.decomposition) calls.push_back(*t.decomposition);
    for (const auto& sub : t.subclaim_debates) {
        auto inner = recorded_calls(sub);
        calls.insert(calls.end(), inner.begin(), inner.end());
    }
    for (const auto& r : t.rounds) {
        for (const auto& resp : r.responses) calls.push_back(resp.call);
        calls.push_back(r.mediator.call);
    }
    if (t.synthesis) calls.push_back(t.synthesis->call);
    return calls;
}

backend::ScriptedBackend replay_backend(const DebateTranscript& t) {
    std::vector<backend::ScriptRule> rules;
    std::set<std::pair<std::string, std::string>> seen;
    for (auto& c : recorded_calls(t)) {
        if (!seen.insert({c.role_id, c.user_prompt}).second) continue;
        rules.push_back({c.role_id, {c.user_prompt}, c.response});
    }
    // Longest prompt first, so a prompt that contains a shorter one is matched by its own rule.
    std::stable_sort(rules.begin(), rules.end(), [](const auto& a, const auto& b) {
        return a.match_substrings.front().size() > b.match_substrings.front().size();
    });
    const auto model = t.config_fingerprint.is_object() ? t.config_fingerprint.value("model_id", std::string("scripted"))
                                                       : std::string("scripted");
    return backend::ScriptedBackend(std::move(rules), "", model);
}

// ---- forced consolidation ----

VerdictLabel forced_consolidation(const std::vector<VerdictLabel>& verdicts, const taxonomy::Taxonomy& tax) {
    if (verdicts.empty()) throw Error("forced consolidation needs at least one verdict");
    int correct = 0;
    int incorrect = 0;
    for (const auto& v : verdicts) {
        if (v.is_nei() || v.is_follow_up()) continue;
        switch (tax.polarity(v)) {
            case taxonomy::Polarity::correct: ++correct; break;
            case taxonomy::Polarity::incorrect: ++incorrect; break;
            case taxonomy::Polarity::nei: break;
        }
    }
    if (correct > incorrect) return resolve_label(tax, taxonomy::kCorrect);
    if (incorrect > correct) return resolve_label(tax, taxonomy::kIncorrect);
    return tax.nei();
}

VerdictLabel forced_consolidation(const std::vector<AdvocateResponse>& latest, const taxonomy::Taxonomy& tax) {
    std::vector<VerdictLabel> verdicts;
    verdicts.reserve(latest.size());
    for (const auto& r : latest) verdicts.push_back(r.verdict);
    return forced_consolidation(verdicts, tax);
}

// ---- config ----

void DebateConfig::validate(const corpus::IndexRegistry* registry) const {
    agents::validate_roster(roster, registry);
    if (mediator.max_rounds < 1) throw ConfigError("max_rounds must be at least 1");
    if (temperature < 0.0 || temperature > 2.0) throw ConfigError("temperature must be within [0, 2]");
    if (max_tokens < 1) throw ConfigError("max_tokens must be at least 1");
}

json DebateConfig::fingerprint(const taxonomy::Taxonomy& tax, const std::string& backend_model) const {
    auto sorted = roster;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    json r = json::array();
    for (const auto& a : sorted) {
        r.push_back({{"name", a.name},
                     {"persona", agents::to_string(a.persona.kind)},
                     {"template", a.persona.template_id()},
                     {"corpus_id", a.corpus_id ? json(*a.corpus_id) : json(nullptr)},
                     {"retrieval_k", a.retrieval_k}});
    }
    json fp;
    fp["roster"] = std::move(r);
    fp["mediator"] = {{"variant", agents::to_string(mediator.resolve(roster))},
                      {"max_rounds", mediator.max_rounds},
                      {"reconsider_nei", mediator.reconsider_nei}};
    fp["model_id"] = model_id.empty() ? backend_model : model_id;
    fp["taxonomy_version"] = tax.version();
    fp["subclaims"] = subclaims;
    fp["temperature"] = temperature;
    fp["max_tokens"] = max_tokens;
    fp["hash"] = fnv1a64_hex(fp.dump());
    return fp;
}

// ---- engine ----

DebateEngine::DebateEngine(const taxonomy::Taxonomy& taxonomy, const agents::TemplateSet& templates,
                           backend::Backend& backend, const corpus::IndexRegistry& registry, DebateConfig config)
    : taxonomy_(taxonomy),
      templates_(templates),
      backend_(backend),
      registry_(registry),
      config_(std::move(config)) {
    config_.validate(&registry_);
    variant_ = config_.mediator.resolve(config_.roster);
    fingerprint_ = config_.fingerprint(taxonomy_, backend_.model_id());
}

agents::AgentContext DebateEngine::context() const {
    return agents::AgentContext{taxonomy_, templates_, backend_, registry_,
                                config_.model_id, config_.temperature, config_.max_tokens};
}

std::vector<AdvocateResponse> DebateEngine::run_round(const DebateTranscript& t, int round) const {
    const auto ctx = context();
    std::map<std::string, std::string> questions;
    if (round > 1) {
        for (const auto& q : t.rounds.back().mediator.questions) {
            auto& slot = questions[q.advocate_name];
            slot += (slot.empty() ? "" : "\n") + q.question;
        }
    }
    auto task = [&](const agents::AdvocateConfig& a) {
        if (round == 1) return agents::assess_claim(ctx, a, t.claim, round);
        const auto it = questions.find(a.name);
        const std::string q = it == questions.end() ? std::string() : it->second;
        return agents::answer_followup(ctx, a, t.claim, q, t.rounds.back().responses, round);
    };

    std::vector<AdvocateResponse> responses;
    if (config_.parallel_advocates && config_.roster.size() > 1) {
        std::vector<std::future<AdvocateResponse>> futures;
        for (const auto& a : config_.roster) futures.push_back(std::async(std::launch::async, task, std::cref(a)));
        std::exception_ptr first;
        for (auto& f : futures) {
            try {
                responses.push_back(f.get());
            } catch (...) {
                if (!first) first = std::current_exception();
            }
        }
        if (first) std::rethrow_exception(first);
    } else {
        for (const auto& a : config_.roster) responses.push_back(task(a));
    }
    std::sort(responses.begin(), responses.end(),
              [](const auto& a, const auto& b) { return a.advocate_name < b.advocate_name; });
    return responses;
}

void DebateEngine::continue_debate(DebateTranscript& t) const {
    const auto ctx = context();
    const int max_rounds = config_.mediator.max_rounds;
    try {
        while (!t.complete()) {
            const int round = static_cast<int>(t.rounds.size()) + 1;
            Round r;
            r.index = round;
            r.responses = run_round(t, round);
            try {
                r.mediator = agents::mediate(ctx, variant_, t.claim, r.responses, round, mediation_history(t.rounds));
            } catch (const agents::MediatorUnparseable& e) {
                r.mediator = MediatorOutcome{};
                r.mediator.kind = Kind::unparseable;
                r.mediator.call = e.call();
            }
            t.rounds.push_back(std::move(r));
            const auto& last = t.rounds.back();
            const bool more_rounds = round < max_rounds;
            if (last.mediator.kind == Kind::final) {
                if (last.mediator.verdict.is_nei() && config_.mediator.reconsider_nei && more_rounds) continue;
                t.status = Status::final;
                t.final_verdict = last.mediator.verdict;
                t.summary = last.mediator.summary;
            } else if (last.mediator.kind == Kind::follow_up && more_rounds) {
                continue;
            } else {
                t.status = Status::forced;
                t.final_verdict = forced_consolidation(last.responses, taxonomy_);
                t.summary = forced_summary(*t.final_verdict);
            }
        }
        t.error.reset();
    } catch (const backend::BackendError& e) {
        t.status = Status::in_progress;
        t.error = e.what();
    }
}

void DebateEngine::continue_subclaims(DebateTranscript& t) const {
    const auto ctx = context();
    try {
        if (!t.decomposition) {
            auto d = agents::decompose_claim(ctx, t.claim);
            t.subclaims = std::move(d.subclaims);
            t.decomposition = std::move(d.call);
        }
        for (std::size_t i = 0; i < t.subclaims.size(); ++i) {
            if (i == t.subclaim_debates.size()) {
                DebateTranscript sub;
                sub.claim_id = t.claim_id + "#s" + std::to_string(i + 1);
                sub.claim = t.subclaims[i];
                sub.config_fingerprint = fingerprint_;
                t.subclaim_debates.push_back(std::move(sub));
            }
            auto& sub = t.subclaim_debates[i];
            if (sub.complete()) continue;
            continue_debate(sub);
            if (sub.error) {
                t.error = "subclaim " + std::to_string(i + 1) + ": " + *sub.error;
                return;
            }
        }
        std::vector<agents::SubclaimResult> results;
        std::vector<VerdictLabel> verdicts;
        for (const auto& sub : t.subclaim_debates) {
            results.push_back({sub.claim, *sub.final_verdict, sub.summary});
            verdicts.push_back(*sub.final_verdict);
        }
        try {
            t.synthesis = agents::synthesize_subclaims(ctx, variant_, t.claim, results);
        } catch (const agents::MediatorUnparseable& e) {
            MediatorOutcome o;
            o.kind = Kind::unparseable;
            o.call = e.call();
            t.synthesis = std::move(o);
        }
        if (t.synthesis->kind == Kind::final) {
            t.status = Status::final;
            t.final_verdict = t.synthesis->verdict;
            t.summary = t.synthesis->summary;
        } else {
            t.status = Status::forced;
            t.final_verdict = forced_consolidation(verdicts, taxonomy_);
            t.summary = forced_summary(*t.final_verdict);
        }
        t.error.reset();
    } catch (const backend::BackendError& e) {
        t.status = Status::in_progress;
        t.error = e.what();
    }
}

DebateTranscript DebateEngine::run(std::string claim_id, std::string claim) const {
    DebateTranscript t;
    t.claim_id = std::move(claim_id);
    t.claim = std::move(claim);
    t.config_fingerprint = fingerprint_;
    return resume(std::move(t));
}

DebateTranscript DebateEngine::resume(DebateTranscript t) const {
    if (t.complete()) return t;
    if (t.claim.empty()) throw ConfigError("claim '" + t.claim_id + "' has empty text");
    t.config_fingerprint = fingerprint_;
    if (config_.subclaims) {
        continue_subclaims(t);
    } else {
        continue_debate(t);
    }
    return t;
}

// ---- batch ----

std::string transcript_filename(std::string_view claim_id) {
    std::string name;
    for (char c : claim_id) {
        const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        name.push_back(ok ? c : '_');
    }
    if (name.empty() || name.front() == '.') name.insert(name.begin(), '_');
    return name + ".transcript.json";
}

int BatchSummary::count(std::string_view token, int round) const {
    auto it = counts.find(std::string(token));
    if (it == counts.end() || round < 1 || round > static_cast<int>(it->second.size())) return 0;
    return it->second[static_cast<std::size_t>(round - 1)];
}

BatchSummary summarize(const std::vector<DebateTranscript>& transcripts, const taxonomy::Taxonomy& tax) {
    BatchSummary s;
    s.n_claims = static_cast<int>(transcripts.size());
    std::size_t n_columns = 0;
    for (const auto& t : transcripts) {
        n_columns = std::max(n_columns, t.subclaim_mode() ? std::size_t{1} : t.rounds.size());
    }
    for (std::size_t c = 0; c < n_columns; ++c) s.columns.push_back("Round " + std::to_string(c + 1));

    std::map<std::string, std::vector<int>> counts;
    auto bump = [&](const std::string& token, std::size_t col) {
        auto& v = counts[token];
        v.resize(n_columns, 0);
        ++v[col];
    };
    for (const auto& t : transcripts) {
        for (std::size_t c = 0; c < n_columns; ++c) {
            if (t.subclaim_mode()) {
                if (t.final_verdict) bump(t.final_verdict->token, c);
                continue;
            }
            if (c < t.rounds.size()) {
                const auto& r = t.rounds[c];
                const bool last = c + 1 == t.rounds.size();
                if (last && t.status == Status::forced) {
                    bump(t.final_verdict->token, c);
                } else if (r.mediator.kind == Kind::final) {
                    bump(r.mediator.verdict.token, c);
                } else if (r.mediator.kind == Kind::follow_up) {
                    bump(std::string(taxonomy::kFollowUp), c);
                }
            } else if (t.complete() && t.final_verdict) {
                bump(t.final_verdict->token, c);
            }
        }
        if (t.error) s.failures.push_back({t.claim_id, *t.error});
    }

    // Rows: substantive verdicts in taxonomy order (fine first, then coarser images), then
    // follow-up and NEI, which are always present.
    std::vector<VerdictLabel> ordered = tax.final_labels();
    for (auto level : {taxonomy::Level::seven, taxonomy::Level::five, taxonomy::Level::binary}) {
        for (const auto& l : tax.level_labels(level)) {
            if (std::find(ordered.begin(), ordered.end(), l) == ordered.end()) ordered.push_back(l);
        }
    }
    for (const auto& l : ordered) {
        if (l.is_nei() || l.is_follow_up()) continue;
        if (counts.count(l.token)) s.rows.push_back(l);
    }
    s.rows.push_back(tax.follow_up());
    s.rows.push_back(tax.nei());
    for (const auto& row : s.rows) {
        auto v = counts.count(row.token) ? counts[row.token] : std::vector<int>{};
        v.resize(n_columns, 0);
        s.counts[row.token] = std::move(v);
    }
    return s;
}

json BatchSummary::to_json() const {
    json table = json::object();
    json rows_json = json::array();
    for (const auto& row : rows) {
        rows_json.push_back(row.token);
        json cells = json::object();
        const auto& v = counts.at(row.token);
        for (std::size_t c = 0; c < columns.size(); ++c) cells[columns[c]] = v[c];
        table[row.token] = std::move(cells);
    }
    json fails = json::array();
    for (const auto& f : failures) fails.push_back({{"claim_id", f.claim_id}, {"error", f.error}});
    return {{"columns", columns}, {"rows", rows_json}, {"table", table}, {"n_claims", n_claims}, {"failures", fails}};
}

std::string BatchSummary::to_text() const {
    std::size_t label_width = std::string("Verdict").size();
    for (const auto& r : rows) label_width = std::max(label_width, r.display.size());
    std::ostringstream out;
    out << std::left << std::setw(static_cast<int>(label_width)) << "Verdict";
    for (const auto& c : columns) out << "  " << std::right << std::setw(static_cast<int>(c.size())) << c;
    out << "\n";
    for (const auto& r : rows) {
        out << std::left << std::setw(static_cast<int>(label_width)) << r.display;
        const auto& v = counts.at(r.token);
        for (std::size_t c = 0; c < columns.size(); ++c) {
            out << "  " << std::right << std::setw(static_cast<int>(columns[c].size())) << v[c];
        }
        out << "\n";
    }
    out << "Claims: " << n_claims << "\n";
    if (!failures.empty()) {
        out << "Failures: " << failures.size() << "\n";
        for (const auto& f : failures) out << "  " << f.claim_id << ": " << f.error << "\n";
    }
    return out.str();
}

BatchResult run_batch(const DebateEngine& engine, const std::vector<ClaimInput>& claims, const BatchOptions& options) {
    if (options.jobs < 1) throw ConfigError("jobs must be at least 1");
    std::set<std::string> names;
    for (const auto& c : claims) {
        if (c.claim_id.empty()) throw ConfigError("claim with an empty claim_id");
        if (!names.insert(transcript_filename(c.claim_id)).second) {
            throw ConfigError("duplicate claim_id '" + c.claim_id + "'");
        }
    }
    std::filesystem::create_directories(options.out_dir);

    const auto& tax = engine.taxonomy();
    const auto hash = fingerprint_hash(engine.fingerprint());
    BatchResult result;
    result.transcripts.resize(claims.size());
    std::vector<std::optional<std::string>> hard_errors(claims.size());
    std::atomic<int> skipped{0};
    std::atomic<int> resumed{0};
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t i = next++; i < claims.size(); i = next++) {
            const auto& c = claims[i];
            const auto path = options.out_dir / transcript_filename(c.claim_id);
            try {
                std::optional<DebateTranscript> existing;
                if (std::filesystem::exists(path)) {
                    auto t = DebateTranscript::load(path, tax);
                    if (fingerprint_hash(t.config_fingerprint) == hash && t.claim_id == c.claim_id && t.claim == c.text) {
                        existing = std::move(t);
                    }
                }
                if (existing && existing->complete()) {
                    result.transcripts[i] = std::move(*existing);
                    ++skipped;
                    continue;
                }
                DebateTranscript t;
                if (existing) {
                    ++resumed;
                    t = engine.resume(std::move(*existing));
                } else {
                    t = engine.run(c.claim_id, c.text);
                }
                t.save(path);
                result.transcripts[i] = std::move(t);
            } catch (const std::exception& e) {
                hard_errors[i] = e.what();
                result.transcripts[i].claim_id = c.claim_id;
                result.transcripts[i].claim = c.text;
            }
        }
    };
    const auto n_threads = std::min<std::size_t>(static_cast<std::size_t>(options.jobs), std::max<std::size_t>(claims.size(), 1));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < claims.size(); ++i) {
        if (hard_errors[i]) result.transcripts[i].error = *hard_errors[i];
    }
    result.skipped = skipped;
    result.resumed = resumed;
    result.summary = summarize(result.transcripts, tax);
    write_atomic(options.out_dir / "summary.json", result.summary.to_json().dump(2) + "\n");
    return result;
}

}  // namespace factdebate::debate

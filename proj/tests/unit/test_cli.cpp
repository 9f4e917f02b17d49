#include <sstream>

#include "doctest.h"
#include "factdebate/cli.hpp"
#include "factdebate/evaluation.hpp"
#include "test_support.hpp"

using namespace factdebate;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "factdebate");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

// Scripted two-advocate setup in `dir`; `mediator` is the mediator's canned reply.
fs::path write_config(const testing::TempDir& dir, const std::string& advocate, const std::string& mediator,
                      const std::string& extra = "") {
    nlohmann::json rules = {{"default_response", advocate},
                            {"rules", {{{"role_id", "mediator"}, {"response", mediator}},
                                       {{"role_id", "labeler"}, {"match_substring", "unlabelable"}, {"response", "no idea"}},
                                       {{"role_id", "labeler"}, {"response", "[[incorrect]]"}}}}};
    testing::write_file(dir / "rules.json", rules.dump(2));
    std::string cfg = R"({
      "corpora": {"IPCC": ")" + (testing::fixtures() / "corpora/ipcc/manifest.jsonl").generic_string() + R"("},
      "chunking": {"window": 64, "overlap": 8},
      "roster": [
        {"name": "IPCC", "persona": "scientific_rag", "corpus_id": "IPCC", "retrieval_k": 2},
        {"name": "GPT-4", "persona": "plain_model"}
      ],
      "mediator": {"max_rounds": 3},
      "backend": {"kind": "scripted", "rules": "rules.json"})" + extra + R"(
    })";
    testing::write_file(dir / "config.json", cfg);
    return dir / "config.json";
}

const std::string kCorrect = "[[correct]]\nSummary: Supported by the evidence.";

void write_claims(const fs::path& path, int n, bool with_gold, bool with_expl = false) {
    std::string body;
    for (int i = 0; i < n; ++i) {
        nlohmann::json j = {{"claim_id", "C" + std::to_string(i)}, {"text", "Claim number " + std::to_string(i)}};
        if (with_gold) j["gold_fine_verdict"] = "correct";
        if (with_expl) j["explanation"] = i == 1 ? "unlabelable" : "Ratings say otherwise.";
        body += j.dump() + "\n";
    }
    testing::write_file(path, body);
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("ingest") {
    testing::TempDir dir("ingest");
    auto ok = invoke({"ingest", (testing::fixtures() / "corpora/wmo/manifest.jsonl").string(), "--out",
                   (dir / "wmo.index.json").string(), "--window", "64", "--overlap", "8"});
    CHECK(ok.code == 0);
    CHECK(fs::exists(dir / "wmo.index.json"));
    CHECK(ok.out.find("Indexed 5 documents") != std::string::npos);

    testing::write_file(dir / "m.jsonl", R"({"doc_id":"lost-doc","title":"T","organization":"O","text_path":"missing.txt"})"
                                         "\n");
    auto missing = invoke({"ingest", (dir / "m.jsonl").string(), "--out", (dir / "x.json").string()});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("lost-doc") != std::string::npos);

    auto bad = invoke({"ingest", (testing::fixtures() / "corpora/wmo/manifest.jsonl").string(), "--out",
                    (dir / "y.json").string(), "--window", "4", "--overlap", "4"});
    CHECK(bad.code == 2);
    CHECK_FALSE(fs::exists(dir / "y.json"));
}

TEST_CASE("check: unanimous correct") {
    testing::TempDir dir("check");
    auto cfg = write_config(dir, "The claim is [[correct]].", kCorrect);
    auto r = invoke({"check", "Sea levels are rising.", "--config", cfg.string(), "--out", (dir / "out").string(),
                  "--level", "binary"});
    CHECK(r.code == 0);
    CHECK(r.out.rfind("Final verdict: correct\n", 0) == 0);
    CHECK(r.out.find("after 1 round\n") != std::string::npos);
    CHECK(r.out.find("GPT-4") != std::string::npos);
    auto again = invoke({"check", "Sea levels are rising.", "--config", cfg.string(), "--out", (dir / "out").string(),
                      "--level", "binary"});
    CHECK(again.out == r.out);
}

TEST_CASE("invalid configs exit 2 without writing") {
    testing::TempDir dir("badcfg");
    auto cfg = write_config(dir, "[[correct]]", kCorrect, R"(, "max_tokens": 0)");
    auto r = invoke({"check", "x", "--config", cfg.string(), "--out", (dir / "out").string()});
    CHECK(r.code == 2);
    CHECK_FALSE(fs::exists(dir / "out"));

    write_config(dir, "[[correct]]", kCorrect, R"(, "api_key": "sk-123")");
    CHECK(invoke({"check", "x", "--config", cfg.string(), "--out", (dir / "out").string()}).code == 2);
    write_config(dir, "[[correct]]", kCorrect, R"(, "surprise": 1)");
    CHECK(invoke({"check", "x", "--config", cfg.string(), "--out", (dir / "out").string()}).code == 2);
    CHECK_FALSE(fs::exists(dir / "out"));
    CHECK(invoke({"check", "x", "--config", (dir / "nope.json").string()}).code == 2);
    CHECK(invoke({"frobnicate"}).code == 2);
    CHECK(invoke({"--help"}).code == 0);
}

TEST_CASE("check: backend failure exits 3 with a partial transcript") {
    testing::TempDir dir("fail");
    write_config(dir, "[[correct]]", kCorrect);
    std::string cfg = testing::read_file(dir / "config.json");
    const auto pos = cfg.find(R"("backend": {)");
    cfg = cfg.substr(0, pos) +
          R"("backend": {"kind": "remote", "base_url": "http://127.0.0.1:9/v1", "max_attempts": 1, "timeout_s": 2}})";
    testing::write_file(dir / "remote.json", cfg);
    auto r = invoke({"check", "x", "--config", (dir / "remote.json").string(), "--out", (dir / "out").string(),
                  "--claim-id", "x1"});
    CHECK(r.code == 3);
    REQUIRE(fs::exists(dir / "out/x1.transcript.json"));
    auto t = nlohmann::json::parse(testing::read_file(dir / "out/x1.transcript.json"));
    CHECK(t["status"] == "in_progress");
}

TEST_CASE("batch, rerun and eval") {
    testing::TempDir dir("batch");
    auto cfg = write_config(dir, "The claim is [[correct]].", kCorrect);
    write_claims(dir / "claims.jsonl", 10, true);
    auto out = (dir / "runs").string();
    auto r = invoke({"batch", (dir / "claims.jsonl").string(), "--config", cfg.string(), "--out", out, "--jobs", "3"});
    CHECK(r.code == 0);
    int transcripts = 0;
    for (const auto& e : fs::directory_iterator(dir / "runs")) {
        transcripts += e.path().string().find(".transcript.json") != std::string::npos ? 1 : 0;
    }
    CHECK(transcripts == 10);
    auto summary = nlohmann::json::parse(testing::read_file(dir / "runs/summary.json"));
    CHECK(summary["n_claims"] == 10);
    CHECK(summary["table"]["correct"]["Round 1"] == 10);

    auto before = testing::read_file(dir / "runs/C3.transcript.json");
    auto again = invoke({"batch", (dir / "claims.jsonl").string(), "--config", cfg.string(), "--out", out});
    CHECK(again.out.find("Skipped (already complete): 10") != std::string::npos);
    CHECK(testing::read_file(dir / "runs/C3.transcript.json") == before);

    auto ev = invoke({"eval", out, (dir / "claims.jsonl").string(), "--level", "binary", "--level", "five"});
    CHECK(ev.code == 0);
    CHECK(ev.out.find("100.00") != std::string::npos);
    auto report = nlohmann::json::parse(testing::read_file(dir / "runs/report.json"));
    CHECK(report["rows"].size() == 4);
    for (const auto& row : report["rows"]) CHECK(row["accuracy"] == 100.0);

    write_claims(dir / "nogold.jsonl", 10, false);
    auto missing = invoke({"eval", out, (dir / "nogold.jsonl").string()});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("C0") != std::string::npos);
    CHECK(invoke({"eval", out, (dir / "claims.jsonl").string(), "--include-nei", "--exclude-nei"}).code == 2);
}

TEST_CASE("eval: nei-heavy run shrinks the excl-NEI denominator") {
    testing::TempDir dir("neirun");
    auto cfg = write_config(dir, "[[nei]]", "[[nei]]\nSummary: Not enough information.");
    write_claims(dir / "claims.jsonl", 4, true);
    CHECK(invoke({"batch", (dir / "claims.jsonl").string(), "--config", cfg.string(), "--out", (dir / "runs").string()})
              .code == 0);
    // One claim is edited to a substantive verdict.
    auto t0 = nlohmann::json::parse(testing::read_file(dir / "runs/C0.transcript.json"));
    t0["final_verdict"] = "correct";
    testing::write_file(dir / "runs/C0.transcript.json", t0.dump(2) + "\n");
    auto ev = invoke({"eval", (dir / "runs").string(), (dir / "claims.jsonl").string(), "--level", "binary"});
    REQUIRE(ev.code == 0);
    auto report = nlohmann::json::parse(testing::read_file(dir / "runs/report.json"));
    REQUIRE(report["rows"].size() == 2);
    CHECK(report["rows"][0]["n_claims"] == 1);
    CHECK(report["rows"][1]["n_claims"] == 4);
}

TEST_CASE("bootstrap") {
    testing::TempDir dir("boot");
    auto cfg = write_config(dir, "[[correct]]", kCorrect);
    write_claims(dir / "three.jsonl", 3, false, true);
    auto r = invoke({"bootstrap", (dir / "three.jsonl").string(), "--config", cfg.string(), "--out",
                  (dir / "labeled.jsonl").string()});
    CHECK(r.code == 0);
    auto recs = eval::load_claims(dir / "labeled.jsonl", taxonomy::Taxonomy::default_taxonomy());
    REQUIRE(recs.size() == 3);
    CHECK(recs[0].gold_fine_verdict->token == "incorrect");
    CHECK_FALSE(recs[1].gold_fine_verdict);
    CHECK(recs[2].gold_fine_verdict);
    CHECK(r.out.find("Flagged:\n  C1") != std::string::npos);

    write_claims(dir / "bare.jsonl", 2, false, false);
    CHECK(invoke({"bootstrap", (dir / "bare.jsonl").string(), "--config", cfg.string(), "--out",
               (dir / "x.jsonl").string()})
              .code == 2);
    CHECK_FALSE(fs::exists(dir / "x.jsonl"));
}

TEST_CASE("default claim ids are stable") {
    CHECK(cli::default_claim_id("abc") == cli::default_claim_id("abc"));
    CHECK(cli::default_claim_id("abc") != cli::default_claim_id("abd"));
    CHECK(cli::default_claim_id("abc").size() == std::string("claim-").size() + 12);
}

}  // TEST_SUITE

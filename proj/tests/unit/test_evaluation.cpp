#include <random>

#include "doctest.h"
#include "factdebate/evaluation.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace factdebate;
using namespace factdebate::eval;
using taxonomy::Level;

namespace {

const taxonomy::Taxonomy& tax() { return taxonomy::Taxonomy::default_taxonomy(); }
VerdictLabel L(std::string_view t) { return tax().label(t); }

ConfusionMatrix two_class(std::vector<std::vector<long>> counts) {
    ConfusionMatrix m;
    m.level = Level::binary;
    m.labels = {L("correct"), L("incorrect")};
    m.counts = std::move(counts);
    for (const auto& row : m.counts) {
        for (auto v : row) m.n += v;
    }
    m.n_predictions = m.n;
    return m;
}

debate::DebateTranscript finished(std::string id, std::string token) {
    debate::DebateTranscript t;
    t.claim_id = std::move(id);
    t.claim = "text";
    t.status = debate::Status::final;
    t.final_verdict = L(token);
    return t;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("two-class matrix") {
    auto r = metrics(two_class({{8, 2}, {1, 9}}));
    CHECK(format_percent(r.accuracy) == "85.00");
    // Per-class mean 0.849624...
    const auto f1_text = format_percent(r.macro_f1);
    CHECK((f1_text == "84.96" || f1_text == "84.97"));
    // Per-class oracle by hand: P = (8/9, 9/11), R = (8/10, 9/10).
    const double p1 = 8.0 / 9, p2 = 9.0 / 11, r1 = 0.8, r2 = 0.9;
    const double f1 = 2 * p1 * r1 / (p1 + r1), f2 = 2 * p2 * r2 / (p2 + r2);
    CHECK(r.macro_f1 == doctest::Approx(50.0 * (f1 + f2)).epsilon(1e-12));
    CHECK(r.precision == doctest::Approx(50.0 * (p1 + p2)).epsilon(1e-12));
    CHECK(r.recall == doctest::Approx(50.0 * (r1 + r2)).epsilon(1e-12));
    CHECK_FALSE(r.zero_division);
}

TEST_CASE("perfect and single-class matrices") {
    auto perfect = metrics(two_class({{5, 0}, {0, 7}}));
    for (double v : {perfect.accuracy, perfect.precision, perfect.recall, perfect.macro_f1}) {
        CHECK(format_percent(v) == "100.00");
    }
    ConfusionMatrix one;
    one.labels = {L("correct")};
    one.counts = {{4}};
    one.n = 4;
    auto r = metrics(one);
    CHECK(r.accuracy == 100.0);
    CHECK(r.macro_f1 == 100.0);
    CHECK(r.per_class.size() == 1);
    CHECK_THROWS_AS(metrics(ConfusionMatrix{}), EmptyEvaluation);
}

TEST_CASE("never-predicted class sets the zero-division flag") {
    auto r = metrics(two_class({{3, 0}, {2, 0}}));
    CHECK(r.zero_division);
    CHECK(r.precision_gold_only == r.precision);
    ConfusionMatrix m = two_class({{3, 1}, {0, 0}});
    auto g = metrics(m);
    CHECK(g.macro_f1_gold_only > g.macro_f1);
}

TEST_CASE("nei denominators") {
    Predictions preds, golds;
    for (int i = 0; i < 163; ++i) {
        const auto id = "SKS-" + std::to_string(i);
        golds[id] = L("incorrect");
        preds[id] = i < 80 ? L("nei") : L("incorrect");
    }
    auto excl = confusion(preds, golds, tax(), Level::binary, false);
    auto incl = confusion(preds, golds, tax(), Level::binary, true);
    CHECK(excl.n == 83);
    CHECK(incl.n == 163);
    CHECK(incl.at("incorrect", "nei") == 80);
    CHECK(format_percent(metrics(excl).accuracy) == "100.00");
    CHECK(metrics(incl).nei_ratio == doctest::Approx(100.0 * 80 / 163));
}

TEST_CASE("diagonal matrix when everything matches") {
    Predictions p{{"a", L("correct")}, {"b", L("misleading")}, {"c", L("nei")}};
    auto m = confusion(p, p, tax(), Level::fine, true);
    CHECK(m.trace() == m.n);
    CHECK(m.n == 3);
}

TEST_CASE("missing gold") {
    Predictions p{{"a", L("correct")}};
    try {
        confusion(p, {}, tax(), Level::binary, true);
        FAIL("expected MissingGold");
    } catch (const MissingGold& e) {
        CHECK(e.claim_id() == "a");
    }
}

TEST_CASE("nei ratio") {
    std::vector<VerdictLabel> v(170, L("correct"));
    CHECK(format_percent(nei_ratio(v)) == "0.00");
    for (int i = 0; i < 43; ++i) v[static_cast<std::size_t>(i)] = L("nei");
    CHECK(format_percent(nei_ratio(v)) == "25.29");
    std::vector<VerdictLabel> all(5, L("nei"));
    CHECK(format_percent(nei_ratio(all)) == "100.00");
    CHECK_THROWS_AS(nei_ratio(std::vector<VerdictLabel>{}), EmptyEvaluation);
}

TEST_CASE("properties over random predictions") {
    std::mt19937 rng(7);
    const auto finals = tax().final_labels();
    std::uniform_int_distribution<std::size_t> pick(0, finals.size() - 1);
    for (int trial = 0; trial < 50; ++trial) {
        Predictions preds, golds;
        bool any_nei = false;
        for (int i = 0; i < 40; ++i) {
            const auto id = std::to_string(i);
            golds[id] = finals[pick(rng)];
            while (golds[id].is_nei()) golds[id] = finals[pick(rng)];
            preds[id] = finals[pick(rng)];
            any_nei = any_nei || preds[id].is_nei();
        }
        // Binarizing first and then counting equals counting at the binary level.
        Predictions bp, bg;
        for (auto& [id, l] : preds) bp[id] = tax().consolidate(l, Level::binary);
        for (auto& [id, l] : golds) bg[id] = tax().consolidate(l, Level::binary);
        auto direct = confusion(preds, golds, tax(), Level::binary, true);
        auto pre = confusion(bp, bg, tax(), Level::binary, true);
        CHECK(direct.counts == pre.counts);
        // Merging classes never loses a match.
        auto acc = [&](Level l) { return metrics(confusion(preds, golds, tax(), l, true)).accuracy; };
        CHECK(acc(Level::binary) >= acc(Level::five));
        CHECK(acc(Level::five) >= acc(Level::seven));
        auto excl = confusion(preds, golds, tax(), Level::five, false);
        auto incl = confusion(preds, golds, tax(), Level::five, true);
        if (!any_nei) CHECK(excl.counts == incl.counts);
        // Matches the brute-force oracle.
        std::vector<std::pair<std::string, std::string>> pairs;
        for (auto& [id, l] : preds) {
            pairs.emplace_back(tax().consolidate(golds[id], Level::seven).token,
                               tax().consolidate(l, Level::seven).token);
        }
        auto got = metrics(confusion(preds, golds, tax(), Level::seven, true));
        auto want = oracle::macro_metrics(pairs);
        CHECK(std::abs(got.macro_f1 - want.f1) < 1e-9);
        CHECK(std::abs(got.accuracy - want.accuracy) < 1e-9);
    }
}

TEST_CASE("claims files") {
    CHECK(load_claims(testing::fixtures() / "claims/climate_feedback.jsonl", tax(), Source::climate_feedback).size() ==
          170);
    CHECK(parse_claims("", tax()).empty());
    CHECK(parse_claims("\n\n", tax()).empty());
    try {
        parse_claims("{\"claim_id\":\"a\",\"text\":\"x\"}\n{\"claim_id\":\"b\"}\n", tax());
        FAIL("expected MalformedRecord");
    } catch (const MalformedRecord& e) {
        CHECK(e.line() == 2);
    }
    try {
        parse_claims("{\"claim_id\":\"a\",\"text\":\"x\",\"gold_fine_verdict\":\"kinda\"}\n", tax());
        FAIL("expected UnknownLabel");
    } catch (const UnknownLabel& e) {
        CHECK(e.line() == 1u);
    }
    CHECK_THROWS_AS(parse_claims("not json\n", tax()), MalformedRecord);
    CHECK_THROWS_AS(parse_claims("{\"claim_id\":\"a\",\"text\":\"x\"}\n{\"claim_id\":\"a\",\"text\":\"y\"}\n", tax()),
                    MalformedRecord);

    auto recs = parse_claims(R"({"claim_id":"s1","text":"It's the sun","source":"skeptical_science","needs_context_prefix":true,"gold_fine_verdict":"Incorrect"})"
                             "\n",
                             tax());
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].source == Source::skeptical_science);
    CHECK(recs[0].gold_fine_verdict->token == "incorrect");
    CHECK(claim_prompt_text(recs[0]).rfind("This claim is made in a climate-change context: ", 0) == 0);
    testing::TempDir dir("claims");
    save_claims(dir / "out.jsonl", recs);
    auto back = load_claims(dir / "out.jsonl", tax());
    CHECK(back[0].to_json() == recs[0].to_json());
}

TEST_CASE("bootstrap labels") {
    std::vector<ClaimRecord> recs(3);
    recs[0] = {"ice", "We are heading into an ice age", Source::skeptical_science, {}, {}, "Warming continues.", false};
    recs[1] = {"sun", "It's the sun", Source::skeptical_science, {}, {}, "Solar output is flat.", true};
    recs[2] = {"odd", "Something odd", Source::skeptical_science, {}, {}, "Unclear.", false};
    backend::ScriptedBackend b({{"labeler", {"ice age"}, "Given the explanation, [[incorrect]]."},
                                {"labeler", {"the sun"}, "[[misleading]]"}},
                               "I cannot say.");
    auto res = bootstrap_labels(recs, b, tax(), 2);
    CHECK(res.records[0].gold_fine_verdict->token == "incorrect");
    CHECK(res.records[1].gold_fine_verdict->token == "misleading");
    CHECK_FALSE(res.records[2].gold_fine_verdict);
    REQUIRE(res.flagged.size() == 1);
    CHECK(res.flagged[0].claim_id == "odd");
    CHECK(bootstrap_prompt(recs[0], tax()).find("without using any further information") != std::string::npos);

    recs[1].explanation.reset();
    const auto calls = b.call_count();
    CHECK_THROWS_AS(bootstrap_labels(recs, b, tax()), ConfigError);
    CHECK(b.call_count() == calls);
}

TEST_CASE("report panels") {
    std::vector<debate::DebateTranscript> ts;
    Predictions golds;
    const char* labels[] = {"correct", "incorrect", "misleading", "mostly_accurate"};
    for (int i = 0; i < 8; ++i) {
        ts.push_back(finished("c" + std::to_string(i), labels[i % 4]));
        golds["c" + std::to_string(i)] = L(labels[i % 4]);
    }
    auto perfect = report(ts, golds, tax());
    CHECK(perfect.rows.size() == 6);
    for (const auto& r : perfect.rows) CHECK(format_percent(r.metrics.accuracy) == "100.00");
    const auto text = perfect.to_text();
    CHECK(text.find("excl. NEI") != std::string::npos);
    CHECK(text.find("incl. NEI") != std::string::npos);
    CHECK(perfect.to_json()["rows"].size() == 6);

    ts[0].final_verdict = L("nei");
    ts[1].final_verdict = L("nei");
    auto with_nei = report(ts, golds, tax(), {{Level::binary}, {false, true}, false});
    REQUIRE(with_nei.rows.size() == 2);
    CHECK(with_nei.rows[0].metrics.n_claims < with_nei.rows[1].metrics.n_claims);

    CHECK_THROWS_AS(report({}, golds, tax()), EmptyEvaluation);
    golds.erase("c3");
    CHECK_THROWS_AS(report(ts, golds, tax()), MissingGold);
}

}  // TEST_SUITE

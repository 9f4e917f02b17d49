#include "doctest.h"
#include "factdebate/taxonomy.hpp"
#include "factdebate/errors.hpp"

using namespace factdebate;
using namespace factdebate::taxonomy;

namespace {

const Taxonomy& tax() { return Taxonomy::default_taxonomy(); }

nlohmann::json default_doc() { return tax().to_json(); }

}  // namespace

TEST_SUITE("taxonomy") {

TEST_CASE("default vocabulary") {
    CHECK(tax().find("mostly_accurate"));
    CHECK(tax().find("nei"));
    CHECK(tax().find("follow_up_question"));
    CHECK(tax().label(canonicalize("not enough information")).token == "nei");
    auto finals = tax().final_labels();
    CHECK(std::none_of(finals.begin(), finals.end(), [](const auto& l) { return l.is_follow_up(); }));
    CHECK(tax().level_labels(Level::binary).size() == 3);
}

TEST_CASE("binary images of the graded labels") {
    CHECK(tax().consolidate(tax().label("mostly_accurate"), Level::binary).token == "correct");
    CHECK(tax().consolidate(tax().label("imprecise"), Level::binary).token == "incorrect");
    CHECK(tax().consolidate(tax().label("correct"), Level::binary).token == "correct");
    CHECK(tax().consolidate(tax().nei(), Level::five).token == "nei");
    CHECK(tax().consolidate(tax().label("misleading"), Level::fine).token == "misleading");
}

TEST_CASE("follow-up is not consolidated") {
    CHECK_THROWS_AS(tax().consolidate(tax().follow_up(), Level::binary), NotAFinalVerdict);
}

TEST_CASE("coarsening passes through every intermediate level") {
    for (const auto& l : tax().final_labels()) {
        const auto seven = tax().consolidate(l, Level::seven);
        const auto five = tax().consolidate(l, Level::five);
        CHECK(tax().consolidate(seven, Level::five) == five);
        CHECK(tax().consolidate(five, Level::binary) == tax().consolidate(l, Level::binary));
        CHECK(tax().consolidate(seven, Level::binary) == tax().consolidate(l, Level::binary));
    }
}

TEST_CASE("polarity follows the binary image") {
    CHECK(tax().polarity(tax().label("lacks_context")) == Polarity::incorrect);
    CHECK(tax().polarity(tax().label("mostly_accurate")) == Polarity::correct);
    CHECK(tax().polarity(tax().nei()) == Polarity::nei);
}

TEST_CASE("config missing a binary image names the label") {
    auto doc = default_doc();
    auto& binary = doc["levels"]["binary"];
    for (auto it = binary.begin(); it != binary.end(); ++it) {
        if ((*it)["token"] == "lacks_context") {
            binary.erase(it);
            break;
        }
    }
    try {
        Taxonomy::from_json(doc);
        FAIL("mutated config accepted");
    } catch (const TaxonomyError& e) {
        CHECK(e.label() == "lacks_context");
    }
}

TEST_CASE("round trip through json") {
    auto again = Taxonomy::from_json(default_doc());
    CHECK(again.to_json() == default_doc());
}

TEST_CASE("canonicalize") {
    CHECK(canonicalize("  Mostly\\_Accurate ") == "mostly_accurate");
    CHECK(canonicalize("mostly   accurate") == "mostly_accurate");
    CHECK(canonicalize("Follow-up question") == "follow_up_question");
    const auto once = canonicalize(" Lacks -  Context");
    CHECK(canonicalize(once) == once);
    CHECK(is_valid_token("mostly_accurate"));
    CHECK_FALSE(is_valid_token("Mostly"));
    CHECK_FALSE(is_valid_token("_x"));
}

TEST_CASE("parse_verdict takes the last known bracket") {
    CHECK(parse_verdict("the claim is [[mostly\\_accurate]] but lacks context", tax()).token == "mostly_accurate");
    CHECK(parse_verdict("is [[incorrect]], as sources say... is [[mostly accurate]].", tax()).token ==
          "mostly_accurate");
    CHECK(parse_verdict("[[correct]] then [[NEI]]", tax()).token == "nei");
    CHECK_THROWS_AS(parse_verdict("no brackets here", tax()), UnparseableVerdict);
    CHECK_THROWS_AS(parse_verdict("[[banana]]", tax()), UnknownLabel);
    CHECK(parse_verdict("[[banana]] [[correct]] [[kiwi]]", tax()).token == "correct");
    CHECK(format_verdict(tax().label("mostly_accurate")) == "[[mostly_accurate]]");
}

TEST_CASE("try_parse_verdict reports the unknown token") {
    auto r = try_parse_verdict("[[Totally Wrong]]", tax());
    CHECK(r.status == VerdictParse::Status::unknown_label);
    CHECK(r.unknown_token == "totally_wrong");
    CHECK(try_parse_verdict("plain", tax()).status == VerdictParse::Status::unparseable);
}

TEST_CASE("level names") {
    for (auto l : kAllLevels) CHECK(level_from_string(to_string(l)) == l);
    CHECK_THROWS(level_from_string("octal"));
}

}  // TEST_SUITE

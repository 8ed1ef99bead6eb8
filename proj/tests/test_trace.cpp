#include "doctest.h"
#include "egolab/trace.hpp"
#include "egolab/vocab.hpp"
#include "trace_corpus.hpp"

using namespace egolab;

namespace {

Vocabulary& vocab() {
    static Vocabulary v;
    return v;
}

std::vector<int> wellformed_two_clause() {
    Vocabulary& v = vocab();
    return {Vocabulary::kOpenPlan, v.step_marker(1), v.action(0, 0), v.object(0),
            v.step_marker(2), v.action(2, 0), v.object(1), Vocabulary::kClosePlan,
            Vocabulary::kOpenVerify, v.word_consistent(), Vocabulary::kCloseVerify,
            Vocabulary::kOpenAnswer, v.letter(0), Vocabulary::kCloseAnswer};
}

}  // namespace

TEST_CASE("parse well-formed trajectory") {
    auto r = parse_trajectory(wellformed_two_clause(), vocab());
    REQUIRE(r.ok());
    CHECK(r.trajectory->clauses.size() == 2);
    CHECK(r.trajectory->answer_token == vocab().letter(0));
    CHECK(r.trajectory->clauses[0].index == 1);
    CHECK(r.trajectory->clauses[1].index == 2);
}

TEST_CASE("parse error categories") {
    auto t = wellformed_two_clause();

    SUBCASE("missing close answer") {
        t.pop_back();
        auto r = parse_trajectory(t, vocab());
        REQUIRE(!r.ok());
        CHECK(r.error->category == FormatErrorCat::kMissingTag);
    }
    SUBCASE("verify before plan") {
        std::vector<int> swapped = {Vocabulary::kOpenVerify, vocab().word_consistent(),
                                    Vocabulary::kCloseVerify, Vocabulary::kOpenPlan,
                                    vocab().step_marker(1), vocab().action(0, 0),
                                    Vocabulary::kClosePlan, Vocabulary::kOpenAnswer,
                                    vocab().letter(1), Vocabulary::kCloseAnswer};
        auto r = parse_trajectory(swapped, vocab());
        REQUIRE(!r.ok());
        CHECK(r.error->category == FormatErrorCat::kTagOrder);
    }
    SUBCASE("empty verify block") {
        std::vector<int> t2 = wellformed_two_clause();
        t2.erase(t2.begin() + 9);  // drop the verify body word
        auto r = parse_trajectory(t2, vocab());
        REQUIRE(!r.ok());
        CHECK(r.error->category == FormatErrorCat::kEmptyBlock);
    }
    SUBCASE("two answers") {
        std::vector<int> t2 = wellformed_two_clause();
        t2.insert(t2.end() - 1, vocab().letter(1));
        auto r = parse_trajectory(t2, vocab());
        REQUIRE(!r.ok());
        CHECK(r.error->category == FormatErrorCat::kMultipleAnswers);
    }
    SUBCASE("trailing tokens") {
        t.push_back(vocab().object(3));
        auto r = parse_trajectory(t, vocab());
        REQUIRE(!r.ok());
        CHECK(r.error->category == FormatErrorCat::kTrailingTokens);
    }
    SUBCASE("non-letter answer") {
        std::vector<int> t2 = wellformed_two_clause();
        t2[12] = vocab().object(0);
        auto r = parse_trajectory(t2, vocab());
        REQUIRE(!r.ok());
        CHECK(r.error->category == FormatErrorCat::kBadAnswer);
    }
}

TEST_CASE("segment clauses") {
    Vocabulary& v = vocab();
    // "1. A 2. B 3. C"
    std::vector<int> plan = {v.step_marker(1), v.object(0), v.step_marker(2),
                             v.object(1), v.step_marker(3), v.object(2)};
    auto cs = segment_clauses(plan, 0, static_cast<int>(plan.size()), v);
    REQUIRE(cs.size() == 3);
    CHECK(cs[0].begin == 1);
    CHECK(cs[0].end == 2);
    CHECK(cs[2].begin == 5);

    // no separators -> one clause spanning everything
    std::vector<int> flat = {v.object(0), v.object(1)};
    auto cs2 = segment_clauses(flat, 0, 2, v);
    REQUIRE(cs2.size() == 1);
    CHECK(cs2[0].begin == 0);
    CHECK(cs2[0].end == 2);

    // "1. 2. B": empty first segment dropped
    std::vector<int> gap = {v.step_marker(1), v.step_marker(2), v.object(1)};
    auto cs3 = segment_clauses(gap, 0, 3, v);
    REQUIRE(cs3.size() == 1);
    CHECK(cs3[0].begin == 2);
}

TEST_CASE("format reward basics") {
    CHECK(format_reward(wellformed_two_clause(), vocab()) == 1.0);

    // missing verify block
    std::vector<int> no_verify = {Vocabulary::kOpenPlan, vocab().step_marker(1),
                                  vocab().action(0, 0), Vocabulary::kClosePlan,
                                  Vocabulary::kOpenAnswer, vocab().letter(0),
                                  Vocabulary::kCloseAnswer};
    CHECK(format_reward(no_verify, vocab()) == 0.0);
    // ... but the reduced no-verify mode accepts it
    CHECK(format_reward(no_verify, vocab(), FormatMode::kNoVerify) == 1.0);

    // well-formed structure but zero clauses (marker-only plan)
    std::vector<int> zero_clause = {Vocabulary::kOpenPlan, vocab().step_marker(1),
                                    Vocabulary::kClosePlan, Vocabulary::kOpenVerify,
                                    vocab().word_consistent(), Vocabulary::kCloseVerify,
                                    Vocabulary::kOpenAnswer, vocab().letter(2),
                                    Vocabulary::kCloseAnswer};
    CHECK(format_reward(zero_clause, vocab()) == 0.0);
}

TEST_CASE("render-lex round trip") {
    Rng rng(123);
    for (int i = 0; i < 200; ++i) {
        auto t = egolab_test::make_wellformed(rng, vocab());
        auto back = vocab().lex(vocab().render(t));
        CHECK(back == t);
    }
}

TEST_CASE("clause reconstruction property") {
    Rng rng(77);
    for (int i = 0; i < 200; ++i) {
        auto t = egolab_test::make_wellformed(rng, vocab());
        auto r = parse_trajectory(t, vocab());
        REQUIRE(r.ok());
        // Clause spans plus separators tile the plan body exactly.
        int pos = r.trajectory->plan_begin;
        for (const auto& c : r.trajectory->clauses) {
            CHECK(c.end > c.begin);  // never empty
            while (pos < c.begin) {
                CHECK(vocab().is_step_marker(t[static_cast<size_t>(pos)]));
                ++pos;
            }
            pos = c.end;
        }
        while (pos < r.trajectory->plan_end) {
            CHECK(vocab().is_step_marker(t[static_cast<size_t>(pos)]));
            ++pos;
        }
    }
}

TEST_CASE("format reward agrees with regex oracle on mutated corpus") {
    Rng rng(2024);
    int disagreements = 0;
    for (int i = 0; i < 1000; ++i) {
        auto t = egolab_test::make_wellformed(rng, vocab());
        t = egolab_test::mutate(std::move(t), rng, vocab());
        const double r = format_reward(t, vocab());
        const bool oracle = egolab_test::regex_format_oracle(t, vocab());
        CHECK((r == 0.0 || r == 1.0));
        if ((r == 1.0) != oracle) ++disagreements;
    }
    CHECK(disagreements == 0);
}

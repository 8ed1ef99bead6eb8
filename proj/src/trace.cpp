#include "egolab/trace.hpp"

#include <algorithm>

namespace egolab {

namespace {

struct TagPlan {
    std::vector<int> tags;  // expected tag sequence for the mode
    bool has_plan;
    bool has_verify;
};

TagPlan expected_tags(FormatMode mode) {
    switch (mode) {
        case FormatMode::kNoPlan:
            return {{Vocabulary::kOpenVerify, Vocabulary::kCloseVerify,
                     Vocabulary::kOpenAnswer, Vocabulary::kCloseAnswer},
                    false,
                    true};
        case FormatMode::kNoVerify:
            return {{Vocabulary::kOpenPlan, Vocabulary::kClosePlan, Vocabulary::kOpenAnswer,
                     Vocabulary::kCloseAnswer},
                    true,
                    false};
        case FormatMode::kFull:
        default:
            return {{Vocabulary::kOpenPlan, Vocabulary::kClosePlan, Vocabulary::kOpenVerify,
                     Vocabulary::kCloseVerify, Vocabulary::kOpenAnswer,
                     Vocabulary::kCloseAnswer},
                    true,
                    true};
    }
}

ParseResult fail(FormatErrorCat cat, std::string detail) {
    ParseResult r;
    r.error = FormatError{cat, std::move(detail)};
    return r;
}

}  // namespace

ParseResult parse_trajectory(const std::vector<int>& tokens, const Vocabulary& vocab,
                             FormatMode mode) {
    const TagPlan plan = expected_tags(mode);

    // Locate every tag occurrence first; structure errors are categorized
    // from the tag skeleton before the bodies are inspected.
    std::vector<std::pair<int, int>> tag_pos;  // (position, tag id)
    for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
        if (Vocabulary::is_tag(tokens[i])) tag_pos.emplace_back(i, tokens[i]);
    }

    for (int want : plan.tags) {
        int count = 0;
        for (auto& [p, t] : tag_pos)
            if (t == want) ++count;
        if (count == 0)
            return fail(FormatErrorCat::kMissingTag, vocab.name(want));
        if (count > 1) {
            if (want == Vocabulary::kOpenAnswer || want == Vocabulary::kCloseAnswer)
                return fail(FormatErrorCat::kMultipleAnswers, vocab.name(want));
            return fail(FormatErrorCat::kTagOrder, "duplicate " + vocab.name(want));
        }
    }
    // Tags outside the mode's set count as order violations.
    for (auto& [p, t] : tag_pos) {
        if (std::find(plan.tags.begin(), plan.tags.end(), t) == plan.tags.end())
            return fail(FormatErrorCat::kTagOrder, "unexpected " + vocab.name(t));
    }
    for (size_t i = 0; i < tag_pos.size(); ++i) {
        if (tag_pos[i].second != plan.tags[i])
            return fail(FormatErrorCat::kTagOrder,
                        "found " + vocab.name(tag_pos[i].second) + " out of order");
    }

    // The sequence must start at the first tag and end at the last, and
    // consecutive blocks must be adjacent (no tokens between a closing tag
    // and the next opening tag).
    if (tag_pos.front().first != 0)
        return fail(FormatErrorCat::kTagOrder, "tokens before opening tag");
    if (tag_pos.back().first != static_cast<int>(tokens.size()) - 1)
        return fail(FormatErrorCat::kTrailingTokens, "tokens after closing tag");
    for (size_t i = 1; i + 1 < tag_pos.size(); i += 2) {
        if (tag_pos[i + 1].first != tag_pos[i].first + 1)
            return fail(FormatErrorCat::kTagOrder, "tokens between blocks");
    }

    Trajectory tr;
    tr.tokens = tokens;

    size_t ti = 0;
    if (plan.has_plan) {
        tr.plan_begin = tag_pos[ti].first + 1;
        tr.plan_end = tag_pos[ti + 1].first;
        if (tr.plan_end <= tr.plan_begin)
            return fail(FormatErrorCat::kEmptyBlock, "ego_plan");
        ti += 2;
    }
    if (plan.has_verify) {
        tr.verify_begin = tag_pos[ti].first + 1;
        tr.verify_end = tag_pos[ti + 1].first;
        if (tr.verify_end <= tr.verify_begin)
            return fail(FormatErrorCat::kEmptyBlock, "exo_verify");
        ti += 2;
    }
    const int ans_begin = tag_pos[ti].first + 1;
    const int ans_end = tag_pos[ti + 1].first;
    if (ans_end <= ans_begin) return fail(FormatErrorCat::kEmptyBlock, "answer");
    if (ans_end - ans_begin > 1)
        return fail(FormatErrorCat::kMultipleAnswers, "answer body");
    if (!vocab.is_letter(tokens[static_cast<size_t>(ans_begin)]))
        return fail(FormatErrorCat::kBadAnswer, vocab.name(tokens[static_cast<size_t>(ans_begin)]));
    tr.answer_token = tokens[static_cast<size_t>(ans_begin)];

    if (plan.has_plan)
        tr.clauses = segment_clauses(tokens, tr.plan_begin, tr.plan_end, vocab);

    ParseResult r;
    r.trajectory = std::move(tr);
    return r;
}

std::vector<PlanClause> segment_clauses(const std::vector<int>& tokens, int begin, int end,
                                        const Vocabulary& vocab) {
    std::vector<PlanClause> clauses;
    int seg_begin = begin;
    auto flush = [&](int seg_end) {
        if (seg_end > seg_begin) {
            PlanClause c;
            c.index = static_cast<int>(clauses.size()) + 1;
            c.begin = seg_begin;
            c.end = seg_end;
            clauses.push_back(c);
        }
    };
    for (int i = begin; i < end; ++i) {
        if (vocab.is_step_marker(tokens[static_cast<size_t>(i)])) {
            flush(i);
            seg_begin = i + 1;
        }
    }
    flush(end);
    return clauses;
}

double format_reward(const std::vector<int>& tokens, const Vocabulary& vocab,
                     FormatMode mode) {
    ParseResult r = parse_trajectory(tokens, vocab, mode);
    if (!r.ok()) return 0.0;
    if (mode != FormatMode::kNoPlan && r.trajectory->clauses.empty()) return 0.0;
    return 1.0;
}

const char* format_error_name(FormatErrorCat cat) {
    switch (cat) {
        case FormatErrorCat::kMissingTag: return "missing_tag";
        case FormatErrorCat::kTagOrder: return "tag_order";
        case FormatErrorCat::kEmptyBlock: return "empty_block";
        case FormatErrorCat::kMultipleAnswers: return "multiple_answers";
        case FormatErrorCat::kBadAnswer: return "bad_answer";
        case FormatErrorCat::kTrailingTokens: return "trailing_tokens";
    }
    return "unknown";
}

}  // namespace egolab

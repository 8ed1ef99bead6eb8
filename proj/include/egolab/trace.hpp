#pragma once

#include <optional>
#include <string>
#include <vector>

#include "egolab/vocab.hpp"

namespace egolab {

// Which blocks a well-formed trajectory must carry. The reduced modes keep
// the remaining blocks' structure unchanged.
enum class FormatMode { kFull, kNoPlan, kNoVerify };

enum class FormatErrorCat {
    kMissingTag,
    kTagOrder,
    kEmptyBlock,
    kMultipleAnswers,
    kBadAnswer,
    kTrailingTokens,
};

struct FormatError {
    FormatErrorCat category;
    std::string detail;
};

struct PlanClause {
    int index = 0;  // 1-based position among clauses
    int begin = 0;  // token span within the trajectory, half-open
    int end = 0;
};

struct Trajectory {
    std::vector<int> tokens;
    std::vector<PlanClause> clauses;
    int plan_begin = 0, plan_end = 0;      // plan body span (tags excluded)
    int verify_begin = 0, verify_end = 0;  // verify body span
    int answer_token = -1;                 // option letter token id
    std::vector<double> token_logprobs;    // filled by the policy, same length as tokens
};

struct ParseResult {
    std::optional<Trajectory> trajectory;
    std::optional<FormatError> error;
    bool ok() const { return trajectory.has_value(); }
};

ParseResult parse_trajectory(const std::vector<int>& tokens, const Vocabulary& vocab,
                             FormatMode mode = FormatMode::kFull);

// Clause spans within [begin, end); split at step-marker separators, empty
// segments dropped. Spans are absolute token positions.
std::vector<PlanClause> segment_clauses(const std::vector<int>& tokens, int begin, int end,
                                        const Vocabulary& vocab);

// 1 iff the sequence parses and (in modes with a plan block) yields >= 1 clause.
double format_reward(const std::vector<int>& tokens, const Vocabulary& vocab,
                     FormatMode mode = FormatMode::kFull);

const char* format_error_name(FormatErrorCat cat);

}  // namespace egolab

#pragma once

#include <vector>

#include "egolab/array.hpp"

namespace egolab {

struct RewardWeights {
    double w_format = 0.1;
    double w_answer = 0.3;
    double w_ground = 0.3;
    double w_confidence = 0.3;

    void validate() const;
};

struct RewardBreakdown {
    double format = 0.0;
    double answer = 0.0;
    double ground = 0.0;
    double confidence = 0.0;
    double composite = 0.0;
    std::vector<double> clause_ground;  // per clause, pooled
    std::vector<int> clause_argmax;     // per clause, 1-based frame offset
};

enum class GroundPooling { kMax, kMean };

double cosine_vec(const std::vector<double>& a, const Array& b);

struct ClauseGrounding {
    double reward = 0.0;
    int argmax_n = 1;              // 1-based, smallest index on ties
    std::vector<double> cosines;   // one entry per frame offset
};

// Match a predicted clause embedding against the first `window_n` encoded
// future frames.
ClauseGrounding ground_clause(const std::vector<double>& pred,
                              const std::vector<Array>& future_vis, int window_n);

double pool_clause(const ClauseGrounding& c, GroundPooling pooling);

// Mean over clauses of the per-clause pooled value.
double ground_trajectory(const std::vector<ClauseGrounding>& clauses,
                         GroundPooling pooling);

// Teacher-referenced confidence: beta * (logp of teacher verify - logp of the
// policy's own verify), both under the current policy.
double confidence_teacher(double logp_teacher, double logp_policy, double beta);

// Group self-ranking confidence. Ranks by `partial_scores` (composite with the
// confidence term zeroed); every member receives the same value. All-tied
// groups receive 1. Ties for chosen or rejected go to the lowest index.
std::vector<double> confidence_selfrank(const std::vector<double>& partial_scores,
                                        const std::vector<double>& verify_logps,
                                        double beta);

// Weighted sum with format gating: a failed format zeroes the other three
// components before weighting.
RewardBreakdown composite_reward(double format, double answer, double ground,
                                 double confidence, const RewardWeights& w,
                                 bool format_gate = true);

}  // namespace egolab

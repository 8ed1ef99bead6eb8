#include "egolab/rewards.hpp"

#include <cmath>
#include <stdexcept>

namespace egolab {

void RewardWeights::validate() const {
    if (w_format < 0 || w_answer < 0 || w_ground < 0 || w_confidence < 0)
        throw std::invalid_argument("reward weights must be nonnegative");
}

double cosine_vec(const std::vector<double>& a, const Array& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cosine_vec: extent mismatch");
    const int n = static_cast<int>(a.size());
    const double na = std::sqrt(dot(a.data(), a.data(), n));
    const double nb = std::sqrt(dot(b.v.data(), b.v.data(), n));
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    return dot(a.data(), b.v.data(), n) / (na * nb);
}

ClauseGrounding ground_clause(const std::vector<double>& pred,
                              const std::vector<Array>& future_vis, int window_n) {
    if (future_vis.empty()) throw std::invalid_argument("ground_clause: no frames");
    if (window_n < 1 || window_n > static_cast<int>(future_vis.size()))
        throw std::invalid_argument("ground_clause: window out of range");
    ClauseGrounding out;
    out.cosines.reserve(static_cast<size_t>(window_n));
    for (int n = 0; n < window_n; ++n) {
        const double c = cosine_vec(pred, future_vis[static_cast<size_t>(n)]);
        out.cosines.push_back(c);
        if (n == 0 || c > out.reward) {
            out.reward = c;
            out.argmax_n = n + 1;
        }
    }
    return out;
}

double pool_clause(const ClauseGrounding& c, GroundPooling pooling) {
    if (pooling == GroundPooling::kMax) return c.reward;
    double s = 0.0;
    for (double v : c.cosines) s += v;
    return s / static_cast<double>(c.cosines.size());
}

double ground_trajectory(const std::vector<ClauseGrounding>& clauses,
                         GroundPooling pooling) {
    if (clauses.empty()) throw std::invalid_argument("ground_trajectory: zero clauses");
    double s = 0.0;
    for (const auto& c : clauses) s += pool_clause(c, pooling);
    return s / static_cast<double>(clauses.size());
}

double confidence_teacher(double logp_teacher, double logp_policy, double beta) {
    if (beta <= 0.0) throw std::invalid_argument("confidence_teacher: beta must be > 0");
    return beta * (logp_teacher - logp_policy);
}

std::vector<double> confidence_selfrank(const std::vector<double>& partial_scores,
                                        const std::vector<double>& verify_logps,
                                        double beta) {
    const size_t k = partial_scores.size();
    if (k < 2) throw std::invalid_argument("confidence_selfrank: need k >= 2");
    if (verify_logps.size() != k)
        throw std::invalid_argument("confidence_selfrank: length mismatch");
    size_t chosen = 0, rejected = 0;
    for (size_t i = 1; i < k; ++i) {
        if (partial_scores[i] > partial_scores[chosen]) chosen = i;
        if (partial_scores[i] < partial_scores[rejected]) rejected = i;
    }
    double value;
    if (partial_scores[chosen] == partial_scores[rejected])
        value = 1.0;
    else
        value = beta * (verify_logps[chosen] - verify_logps[rejected]);
    return std::vector<double>(k, value);
}

RewardBreakdown composite_reward(double format, double answer, double ground,
                                 double confidence, const RewardWeights& w,
                                 bool format_gate) {
    w.validate();
    RewardBreakdown b;
    b.format = format;
    if (format_gate && format == 0.0) {
        b.answer = 0.0;
        b.ground = 0.0;
        b.confidence = 0.0;
    } else {
        b.answer = answer;
        b.ground = ground;
        b.confidence = confidence;
    }
    b.composite = w.w_format * b.format + w.w_answer * b.answer + w.w_ground * b.ground +
                  w.w_confidence * b.confidence;
    return b;
}

}  // namespace egolab

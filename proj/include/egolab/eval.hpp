#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "egolab/config.hpp"
#include "egolab/policy.hpp"
#include "egolab/train.hpp"

namespace egolab {

// --- held-out evaluation ---

struct EvalReport {
    std::string dataset_id;
    double accuracy = 0.0;
    double format_rate = 0.0;
    std::vector<double> outcomes;  // per episode, 1 correct / 0 wrong-or-malformed
};

// Greedy decode + parse + answer match; malformed decodes count as wrong so
// accuracy stays comparable across variants with different compliance rates.
EvalReport evaluate(const PolicyParams& p, const std::vector<EpisodeSample>& episodes,
                    const Vocabulary& vocab, FormatMode mode = FormatMode::kFull,
                    int max_len = 48);

// Exocentric suite: greedy decode must produce exactly one answer block citing
// the gold letter.
EvalReport evaluate_exo(const PolicyParams& p, const std::vector<ExoSample>& tasks,
                        const Vocabulary& vocab, int max_len = 8);

// --- paired percentile bootstrap ---

struct BootstrapCi {
    double delta = 0.0;  // mean(b - a)
    double lower = 0.0;
    double upper = 0.0;
};

// Resamples episode indices with replacement; interval endpoints are order
// statistics of the resampled means at ranks floor(q * iterations), clamped.
BootstrapCi bootstrap_ci(const std::vector<double>& a, const std::vector<double>& b,
                         int iterations = 10000, double level = 0.95, uint64_t seed = 1);

// --- temporal-grounding analysis ---

struct HeatmapRecord {
    uint64_t episode_id = 0;
    bool ok = false;                          // false when the greedy decode is malformed
    double outcome = 0.0;                     // answer correctness of the same decode
    std::vector<std::vector<double>> matrix;  // K clauses x N frame offsets, cosines
    std::vector<int> argmax;                  // per clause, 1-based, smallest-index ties
};

HeatmapRecord grounding_heatmap(const PolicyParams& p, const EpisodeSample& episode,
                                const Vocabulary& vocab, int window_n,
                                FormatMode mode = FormatMode::kFull, int max_len = 48);

// Row = clause, column = frame offset; header row of offsets.
std::string heatmap_csv(const HeatmapRecord& rec);

struct ClausePositionStats {
    int positions = 0;            // largest clause count among usable records
    std::vector<int> counts;      // clauses observed at each position
    std::vector<double> mean;     // pooled clause grounding per position
    std::vector<double> q1, median, q3;
    std::vector<double> mean_argmax;  // mean 1-based argmax offset per position
    // Spearman rank correlation between per-episode mean clause grounding and
    // answer correctness; absent when either side has no variance.
    std::optional<double> reward_outcome_corr;
};

// Per-position distribution of pooled clause grounding across >= 30 usable
// heatmaps, plus the grounding/correctness rank correlation.
ClausePositionStats clause_position_stats(const std::vector<HeatmapRecord>& heatmaps,
                                          GroundPooling pooling);

// Spearman rank correlation with average ranks on ties; absent when either
// input is constant.
std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y);

// --- ablation matrix ---

// Supported ids: full, format_answer, acmg_only, confidence_only, mean_pooling,
// n4, n8, n16, n32, no_teacher_warmup, no_ego_plan, no_exo_verify, no_exo_reg,
// frozen_encoder.
const std::vector<std::string>& known_variants();
// Applies the variant's overrides to the config; throws on unknown ids.
void apply_variant(Config& cfg, const std::string& id);

struct RunData {
    std::vector<EpisodeSample> ego_train, ego_heldout;
    std::vector<ExoSample> exo_train, exo_heldout;
};
// Disjoint deterministic seed ranges per split, derived from the config seed.
RunData make_run_data(const Config& cfg, uint64_t seed);

struct VariantOutcome {
    std::string id;
    std::vector<uint64_t> seeds;
    std::vector<double> ego_acc, exo_acc;          // per seed, post-RL
    std::vector<double> sft_ego_acc, sft_exo_acc;  // per seed, at the SFT handoff
    // Held-out per-episode outcomes concatenated across seeds in seed order;
    // paired across variants because the held-out sets are shared.
    std::vector<double> ego_outcomes, exo_outcomes;
    std::vector<PolicyParams> policies;  // final parameters, one per seed
};

struct AblationTable {
    std::vector<VariantOutcome> rows;
    // Paired bootstrap of each row against the first row on the ego suite.
    std::vector<BootstrapCi> ego_vs_first;
};

// Trains every variant with identical seeds and step budget, evaluates on the
// shared held-out suites, and attaches bootstrap CIs against the first
// variant. SFT checkpoints are shared across variants with the same format
// requirements.
AblationTable run_ablation(const Config& base, const std::vector<std::string>& variant_ids,
                           const std::vector<uint64_t>& seeds, const Vocabulary& vocab,
                           std::ostream* log = nullptr);

// Aligned text table: accuracies averaged over pooled outcomes plus the CI
// columns against the first row.
std::string ablation_table_text(const AblationTable& table);

}  // namespace egolab

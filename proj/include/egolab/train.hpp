#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "egolab/policy.hpp"
#include "egolab/rewards.hpp"
#include "egolab/trace.hpp"
#include "egolab/world.hpp"

namespace egolab {

struct TrainConfig {
    int k = 8;                       // rollout group size
    int window_n = 16;               // anticipation window
    RewardWeights weights;
    double beta_confidence = 0.1;
    double beta_kl = 0.02;
    double lambda_exo = 0.05;
    int exo_interval = 200;
    int teacher_warmup_steps = 200;
    double lambda_ground = 0.1;
    double sft_lr = 0.3;
    double rl_lr = 0.01;
    double epsilon_adv = 1e-4;
    double temperature = 1.0;
    int max_len = 48;
    int grpo_steps = 500;
    int sft_epochs = 8;
    int sft_batch = 8;
    int exo_batch = 8;
    int sft_episodes = 2000;
    // Fraction of ego SFT traces rendered from a non-gold option, modeling
    // imperfect teacher rationales the RL stage must ground away.
    double sft_distractor_rate = 0.3;
    int exo_episodes = 4000;
    GroundPooling pooling = GroundPooling::kMax;
    FormatMode format_mode = FormatMode::kFull;
    bool exo_reg = true;
    bool freeze_encoder = false;
    double sft_format_gate = 0.9;

    void validate() const;
};

// --- gradient plumbing ---

// Gradients aligned with the visit_params traversal.
struct GradAccum {
    std::vector<Array> g;
};
GradAccum zero_grads(const PolicyParams& p);
void accumulate_grads(GradAccum& acc, const Graph& g, const PolicyRefs& pr);
double grad_global_norm(const GradAccum& acc);
// Clip to the given global norm, then one SGD step. freeze_encoder drops the
// frame-encoder entries.
void sgd_update(PolicyParams& p, const GradAccum& acc, double lr, double clip,
                bool freeze_encoder = false);

// --- stage I ---

struct SftItem {
    std::vector<Array> frames;
    std::vector<int> query;
    std::vector<int> target;
};
SftItem sft_item_from_episode(const EpisodeSample& ep, const Vocabulary& vocab,
                              FormatMode mode = FormatMode::kFull);
SftItem sft_item_from_exo(const ExoSample& ex, const Vocabulary& vocab);

// Mean token-level cross-entropy over the batch plus one clipped SGD update.
double sft_step(PolicyParams& p, const std::vector<const SftItem*>& batch, double lr);

struct SftResult {
    PolicyParams reference;      // frozen copy at handoff
    std::vector<double> losses;  // one per step
    double format_rate = 0.0;    // greedy format compliance on a sample
    bool gate_passed = false;
};
// One pass over the merged ego + exo corpus in a seed-shuffled order.
SftResult run_sft(PolicyParams& p, const std::vector<EpisodeSample>& ego,
                  const std::vector<ExoSample>& exo, const TrainConfig& cfg,
                  const Vocabulary& vocab, uint64_t seed, std::ostream* log = nullptr);

// --- stage II ---

std::vector<double> group_advantages(const std::vector<double>& rewards, double epsilon);

struct RolloutRecord {
    SampleResult sample;
    ParseResult parsed;
    RewardBreakdown reward;
    double advantage = 0.0;
    double verify_logp = 0.0;             // sum over the verify span
    std::vector<ClauseGrounding> grounding;
    std::vector<int> clause_last_rows;    // trajectory index of each clause's last token
};

struct RolloutGroup {
    const EpisodeSample* episode = nullptr;
    std::vector<RolloutRecord> rollouts;
    double reward_mean = 0.0;
    double reward_std = 0.0;
};

RolloutGroup collect_group(const PolicyParams& p, const EpisodeSample& ep,
                           const TrainConfig& cfg, const Vocabulary& vocab,
                           uint64_t group_seed, bool teacher_phase);

struct StepMetrics {
    int step = 0;
    bool teacher_phase = false;
    double format_mean = 0.0, answer_mean = 0.0, ground_mean = 0.0, conf_mean = 0.0;
    double composite_mean = 0.0, composite_std = 0.0;
    double adv_mean = 0.0, adv_std = 0.0;
    double kl_hat = 0.0;
    double pg_loss = 0.0, aux_loss = 0.0, total_loss = 0.0;
    double grad_norm = 0.0;
    bool exo_ran = false;
    double exo_loss = 0.0;
};

struct GrpoLossParts {
    Graph::Ref loss = -1;
    double pg_value = 0.0;
    double kl_hat = 0.0;   // includes the constant reference shift
    double aux_value = 0.0;
    double total = 0.0;
};
// Tape assembly of the GRPO objective for a collected group: mean of
// -advantage * logprob, the k3 KL surrogate against the given per-token
// reference logprobs (zero value and gradient at the reference), and the
// smoothed-max grounding loss (log-sum-exp at temperature 0.1, shifted so
// all-zero similarities score 0).
GrpoLossParts build_grpo_loss(Graph& g, const PolicyRefs& pr, const PolicyDims& dims,
                              const RolloutGroup& grp, const TrainConfig& cfg,
                              const std::vector<std::vector<double>>& ref_logps);

// One GRPO update from an already-collected group: policy-gradient term with
// constant advantages, KL penalty against the frozen reference, and the
// smoothed-max grounding loss. Returns the filled metrics (except exo fields).
StepMetrics grpo_update(PolicyParams& p, const PolicyParams& ref, const RolloutGroup& grp,
                        const TrainConfig& cfg);

// Interleaved exocentric cross-entropy update; returns the loss contribution.
double exo_step(PolicyParams& p, const std::vector<const ExoSample*>& batch,
                const TrainConfig& cfg, const Vocabulary& vocab);

// Thrown when a loss or gradient goes non-finite; carries the step for the
// caller's diagnostic snapshot.
struct TrainAbort : std::runtime_error {
    int step;
    TrainAbort(int s, const std::string& what) : std::runtime_error(what), step(s) {}
};

std::string format_metrics(const StepMetrics& m);

struct GrpoResult {
    std::vector<StepMetrics> metrics;
};
GrpoResult train_grpo(PolicyParams& p, const PolicyParams& ref,
                      const std::vector<EpisodeSample>& episodes,
                      const std::vector<ExoSample>& exo, const TrainConfig& cfg,
                      const Vocabulary& vocab, uint64_t seed,
                      std::ostream* metrics_out = nullptr);

}  // namespace egolab

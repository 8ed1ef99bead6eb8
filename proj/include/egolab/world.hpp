#pragma once

#include <cstdint>
#include <vector>

#include "egolab/array.hpp"
#include "egolab/trace.hpp"
#include "egolab/vocab.hpp"

namespace egolab {

// Generator knobs for the synthetic egocentric worlds. Everything downstream
// is a pure function of (seed, spec).
struct WorldSpec {
    int d_lat = 16;              // latent frame dimension
    double sigma_frame = 0.05;   // per-frame Gaussian noise scale
    int k_min = 3;               // plan length range; k_max <= 5 stage categories
    int k_max = 5;
    int frames_per_step_min = 3;
    int frames_per_step_max = 4;
    int option_count = 4;
    int context_frames = 8;
    int n_max_future = 32;       // generated once so any window N <= 32 works
    int exo_frames = 2;

    void validate() const;
};

struct EpisodeSample {
    uint64_t id = 0;
    std::vector<Array> context_frames;       // scene preview up to timestamp t
    std::vector<Array> future_frames;        // n_max_future latents after t
    std::vector<int> query;                  // query head + lettered option digests
    std::vector<int> gold_plan;              // plan body tokens (markers included)
    std::vector<int> gold_alignment;         // per clause, 1-based first-frame index
    std::vector<std::vector<int>> options;   // digest per option letter
    int gold_answer = 0;                     // option letter index
    std::vector<int> teacher_verify;         // scripted reference verify body
    std::vector<int> stage_labels;           // category per gold clause
};

struct ExoSample {
    uint64_t id = 0;
    std::vector<Array> frames;   // unordered observer frames
    Array pooled;                // mean of frame latents
    std::vector<int> question;   // question head + lettered object options
    int gold_answer = 0;
};

// Affine frame encoder, D_lat -> D_vis with GELU; trainable, shared with the
// policy parameters.
struct FrameEncoderParams {
    Array w;  // (d_vis, d_lat)
    Array b;  // (d_vis,)
};

EpisodeSample generate_episode(uint64_t seed, const WorldSpec& spec);
ExoSample generate_exo_task(uint64_t seed, const WorldSpec& spec);

// The object token named by the gold option; exo answers emit the object
// itself, so correctness is content-bound rather than tied to option order.
int exo_gold_object(const ExoSample& ex);

// Deterministic latent embedding of one (action, object) step, unit-scale.
Array step_latent(int action_token, int object_token, int d_lat);
// Deterministic object-only latent used by exocentric tasks.
Array object_latent(int object_index, int d_lat);

std::vector<Array> encode_frames(const std::vector<Array>& frames,
                                 const FrameEncoderParams& enc);
Array encode_frame(const Array& frame, const FrameEncoderParams& enc);

// Template verification citing the gold stage sequence and gold answer.
std::vector<int> scripted_teacher(const EpisodeSample& episode, const Vocabulary& vocab);

double answer_reward(int predicted_letter_index, int gold_letter_index);

// Gold token sequence for SFT targets; the reduced modes drop the matching
// block while keeping the rest intact.
std::vector<int> gold_trajectory(const EpisodeSample& episode, const Vocabulary& vocab,
                                 FormatMode mode = FormatMode::kFull);

// A well-formed but ungrounded trace: the plan, verify letter, and answer all
// follow the given non-gold option. Models imperfect teacher supervision in
// the SFT corpus; the RL stage has to learn to prefer frame-grounded plans.
std::vector<int> distractor_trajectory(const EpisodeSample& episode, int option_index,
                                       const Vocabulary& vocab,
                                       FormatMode mode = FormatMode::kFull);

}  // namespace egolab

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "egolab/graph.hpp"
#include "egolab/rng.hpp"
#include "egolab/world.hpp"

namespace egolab {

struct PolicyDims {
    int vocab = 0;       // set from Vocabulary::size()
    int d_model = 64;
    int layers = 2;
    int heads = 4;
    int d_ff = 256;
    int d_vis = 32;
    int d_lat = 16;
    int d_head = 128;    // anticipation head hidden width
    int max_pos = 96;

    void validate() const;
};

// Pre-LN transformer block. Weight matrices are stored (in, out) and applied
// as x * W.
struct BlockParams {
    Array ln1_g, ln1_b;
    Array wq, wk, wv, wo;  // (d_model, d_model)
    Array ln2_g, ln2_b;
    Array w1, b1;          // (d_model, d_ff), (d_ff,)
    Array w2, b2;          // (d_ff, d_model), (d_model,)
};

// linear -> GELU -> LayerNorm -> linear, final layer zero at init so the
// predicted visual embedding starts at the origin.
struct AnticipationHeadParams {
    Array w1, b1;      // (d_model, d_head), (d_head,)
    Array ln_g, ln_b;  // (d_head,)
    Array w2, b2;      // (d_head, d_vis), (d_vis,)
};

struct PolicyParams {
    PolicyDims dims;
    Array tok_emb;           // (vocab, d_model)
    Array pos_emb;           // (max_pos, d_model)
    FrameEncoderParams enc;  // shared with the world-side encoder
    Array frame_w, frame_b;  // (d_vis, d_model), (d_model,)
    std::vector<BlockParams> blocks;
    Array out_w;             // (d_model, vocab)
    AnticipationHeadParams head;
};

// Canonical traversal over every trainable array; init, SGD updates,
// checkpoints and graph registration all share this order.
void visit_params(PolicyParams& p, const std::function<void(Array&)>& f);
size_t param_count(const PolicyParams& p);

PolicyParams zeros_policy(const PolicyDims& dims);
PolicyParams init_policy(const PolicyDims& dims, uint64_t seed);

// Bit-exact binary checkpoints.
void save_policy(const PolicyParams& p, const std::string& path);
PolicyParams load_policy(const std::string& path);

// --- tape path (training) ---

struct PolicyRefs {
    std::vector<Graph::Ref> all;  // visit_params order
    Graph::Ref tok_emb, pos_emb, enc_w, enc_b, frame_w, frame_b, out_w;
    struct Block {
        Graph::Ref ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, w1, b1, w2, b2;
    };
    std::vector<Block> blocks;
    struct Head {
        Graph::Ref w1, b1, ln_g, ln_b, w2, b2;
    } head;
};
PolicyRefs register_policy(Graph& g, const PolicyParams& p);
// Name the entries of a visit_params-ordered ref list.
PolicyRefs map_policy_refs(std::vector<Graph::Ref> all, int layers);

struct ForwardRefs {
    Graph::Ref hidden = -1;     // (T, d_model) final block output
    Graph::Ref logits = -1;     // (T, vocab)
    Graph::Ref traj_logp = -1;  // (|traj|,) per-token log-probabilities
    int prefix_len = 0;         // frame count + query length
};
// Teacher-forced forward over [frames, query, traj]. traj may be empty, in
// which case traj_logp stays -1.
ForwardRefs policy_forward(Graph& g, const PolicyRefs& pr, const PolicyDims& dims,
                           const std::vector<Array>& frames, const std::vector<int>& query,
                           const std::vector<int>& traj);

// Predicted visual embeddings for the hidden states at the given absolute row
// indices of `hidden`; returns (|rows|, d_vis).
Graph::Ref anticipation_graph(Graph& g, const PolicyRefs& pr, Graph::Ref hidden,
                              const std::vector<int>& rows);

// Encode raw latents with the trainable encoder on tape; (N, d_vis).
Graph::Ref encode_frames_graph(Graph& g, const PolicyRefs& pr,
                               const std::vector<Array>& frames);

// --- fast path (no tape) ---
// Mirrors the tape arithmetic operation for operation so that scores agree to
// rounding error; pinned by test against policy_forward.

struct ScoreResult {
    std::vector<double> logprobs;              // per trajectory token
    std::vector<std::vector<double>> hidden;   // final hidden at each traj position
    bool truncated = false;                    // sampling hit max_len
};

ScoreResult score_tokens(const PolicyParams& p, const std::vector<Array>& frames,
                         const std::vector<int>& query, const std::vector<int>& traj);

struct SampleResult {
    std::vector<int> tokens;
    std::vector<double> logprobs;             // recorded at temperature 1
    std::vector<std::vector<double>> hidden;  // final hidden at each token position
    bool truncated = false;
};

// Ancestral sampling at the given temperature; temperature <= 0 decodes
// greedily (lowest index wins ties). Generation stops after </answer> or
// max_len tokens.
SampleResult sample_trajectory(const PolicyParams& p, const std::vector<Array>& frames,
                               const std::vector<int>& query, double temperature, Rng& rng,
                               int max_len = 48);

// Anticipation head applied to one hidden state outside the tape.
std::vector<double> anticipation_apply(const PolicyParams& p,
                                       const std::vector<double>& hidden);

}  // namespace egolab

#pragma once

#include <functional>
#include <vector>

#include "egolab/array.hpp"

namespace egolab {

// Recording tape for reverse-mode differentiation. Ops append nodes in
// creation order, which is already a topological order; backward() walks it
// once in reverse. A Graph is owned by a single rollout worker and never
// shared while recording.
class Graph {
public:
    using Ref = int;

    Ref input(Array value, bool is_param = false);

    // --- linear algebra ---
    Ref matmul(Ref a, Ref b);        // a (m,k) x b (k,n)
    Ref matmul_nt(Ref a, Ref b);     // a (m,k) x b^T, b is (n,k)
    Ref add(Ref a, Ref b);           // same shape
    Ref add_rowvec(Ref x, Ref bias); // bias broadcast across rows
    Ref mul(Ref a, Ref b);           // elementwise
    Ref scale(Ref x, double c);

    // --- nonlinearities / normalization ---
    Ref gelu(Ref x);                                       // exact erf form
    Ref exp(Ref x);                                        // elementwise
    Ref layernorm(Ref x, Ref gain, Ref bias, double eps = 1e-5);

    // --- attention plumbing ---
    Ref causal_softmax(Ref scores);  // square (T,T); row i masked beyond col i
    Ref slice_cols(Ref x, int c0, int c1);
    Ref concat_cols(const std::vector<Ref>& parts);
    Ref slice_rows(Ref x, int r0, int r1);
    Ref concat_rows(const std::vector<Ref>& parts);
    Ref gather_rows(Ref table, std::vector<int> ids);

    // --- losses / reductions ---
    // -log softmax(logits[r])[targets[r]] per row, returned as a vector.
    Ref softmax_cross_entropy(Ref logits, std::vector<int> targets);
    // log softmax(logits[r])[targets[r]] per row.
    Ref logprob_pick(Ref logits, std::vector<int> targets);
    Ref sum(Ref x);
    Ref mean(Ref x);
    Ref cosine(Ref u, Ref v);                 // zero-norm input maps to 0
    // dot(u,v) / ((|u|+eps)(|v|+eps)): keeps a usable gradient at the origin,
    // where plain cosine is degenerate.
    Ref cosine_smooth(Ref u, Ref v, double eps = 1e-6);
    Ref logsumexp_scaled(Ref x, double tau);  // tau * log sum exp(x/tau)

    void backward(Ref loss);

    const Array& value(Ref r) const { return nodes_[static_cast<size_t>(r)].val; }
    const Array& grad(Ref r) const { return grads_[static_cast<size_t>(r)]; }
    size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Array val;
        std::function<void(Graph&, Ref)> back;  // null for leaves
        bool is_param = false;
    };
    std::vector<Node> nodes_;
    std::vector<Array> grads_;

    Ref push(Array val, std::function<void(Graph&, Ref)> back);
    Array& g(Ref r) { return grads_[static_cast<size_t>(r)]; }
};

double gelu_scalar(double x);
double gelu_grad_scalar(double x);

// Central finite differences over every coordinate of every parameter array.
// Returns max over coordinates of |analytic - numeric| / max(1, |numeric|).
// The builder must construct the loss from the given parameter leaves alone.
double grad_check(
    const std::function<Graph::Ref(Graph&, const std::vector<Graph::Ref>&)>& build_loss,
    std::vector<Array> params, double step);

}  // namespace egolab

#include "egolab/policy.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "egolab/vocab.hpp"

namespace egolab {

void PolicyDims::validate() const {
    if (vocab <= 0) throw std::invalid_argument("dims: vocab must be set");
    if (d_model <= 0 || layers <= 0 || heads <= 0 || d_ff <= 0 || d_vis <= 0 ||
        d_lat <= 0 || d_head <= 0 || max_pos <= 0)
        throw std::invalid_argument("dims: extents must be positive");
    if (d_model % heads != 0) throw std::invalid_argument("dims: heads must divide d_model");
}

void visit_params(PolicyParams& p, const std::function<void(Array&)>& f) {
    f(p.tok_emb);
    f(p.pos_emb);
    f(p.enc.w);
    f(p.enc.b);
    f(p.frame_w);
    f(p.frame_b);
    for (auto& b : p.blocks) {
        f(b.ln1_g);
        f(b.ln1_b);
        f(b.wq);
        f(b.wk);
        f(b.wv);
        f(b.wo);
        f(b.ln2_g);
        f(b.ln2_b);
        f(b.w1);
        f(b.b1);
        f(b.w2);
        f(b.b2);
    }
    f(p.out_w);
    f(p.head.w1);
    f(p.head.b1);
    f(p.head.ln_g);
    f(p.head.ln_b);
    f(p.head.w2);
    f(p.head.b2);
}

size_t param_count(const PolicyParams& p) {
    size_t n = 0;
    visit_params(const_cast<PolicyParams&>(p), [&](Array& a) { n += a.size(); });
    return n;
}

PolicyParams zeros_policy(const PolicyDims& dims) {
    dims.validate();
    PolicyParams p;
    p.dims = dims;
    p.tok_emb = Array::zeros(dims.vocab, dims.d_model);
    p.pos_emb = Array::zeros(dims.max_pos, dims.d_model);
    p.enc.w = Array::zeros(dims.d_vis, dims.d_lat);
    p.enc.b = Array::zeros(dims.d_vis);
    p.frame_w = Array::zeros(dims.d_vis, dims.d_model);
    p.frame_b = Array::zeros(dims.d_model);
    p.blocks.resize(static_cast<size_t>(dims.layers));
    for (auto& b : p.blocks) {
        b.ln1_g = Array::zeros(dims.d_model);
        b.ln1_b = Array::zeros(dims.d_model);
        b.wq = Array::zeros(dims.d_model, dims.d_model);
        b.wk = Array::zeros(dims.d_model, dims.d_model);
        b.wv = Array::zeros(dims.d_model, dims.d_model);
        b.wo = Array::zeros(dims.d_model, dims.d_model);
        b.ln2_g = Array::zeros(dims.d_model);
        b.ln2_b = Array::zeros(dims.d_model);
        b.w1 = Array::zeros(dims.d_model, dims.d_ff);
        b.b1 = Array::zeros(dims.d_ff);
        b.w2 = Array::zeros(dims.d_ff, dims.d_model);
        b.b2 = Array::zeros(dims.d_model);
    }
    p.out_w = Array::zeros(dims.d_model, dims.vocab);
    p.head.w1 = Array::zeros(dims.d_model, dims.d_head);
    p.head.b1 = Array::zeros(dims.d_head);
    p.head.ln_g = Array::zeros(dims.d_head);
    p.head.ln_b = Array::zeros(dims.d_head);
    p.head.w2 = Array::zeros(dims.d_head, dims.d_vis);
    p.head.b2 = Array::zeros(dims.d_vis);
    return p;
}

namespace {
void fill_gaussian(Array& a, Rng& rng, double std_dev) {
    for (double& v : a.v) v = std_dev * rng.gaussian();
}
void fill_ones(Array& a) {
    for (double& v : a.v) v = 1.0;
}
}  // namespace

PolicyParams init_policy(const PolicyDims& dims, uint64_t seed) {
    PolicyParams p = zeros_policy(dims);
    Rng rng(Rng::mix(seed, 0x706f6c6963ull));
    const double s = 0.02;
    fill_gaussian(p.tok_emb, rng, s);
    fill_gaussian(p.pos_emb, rng, s);
    fill_gaussian(p.enc.w, rng, s);
    fill_gaussian(p.frame_w, rng, s);
    for (auto& b : p.blocks) {
        fill_ones(b.ln1_g);
        fill_gaussian(b.wq, rng, s);
        fill_gaussian(b.wk, rng, s);
        fill_gaussian(b.wv, rng, s);
        fill_gaussian(b.wo, rng, s);
        fill_ones(b.ln2_g);
        fill_gaussian(b.w1, rng, s);
        fill_gaussian(b.w2, rng, s);
    }
    fill_gaussian(p.out_w, rng, s);
    fill_gaussian(p.head.w1, rng, s);
    fill_ones(p.head.ln_g);
    // head final layer stays zero so predictions start at the origin
    return p;
}

// --- checkpoints ---

namespace {
constexpr uint32_t kMagic = 0x45474c50u;
constexpr uint32_t kVersion = 1;

void write_i32(std::ostream& os, int32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
int32_t read_i32(std::istream& is) {
    int32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
}  // namespace

void save_policy(const PolicyParams& p, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("save_policy: cannot open " + path);
    write_i32(os, static_cast<int32_t>(kMagic));
    write_i32(os, static_cast<int32_t>(kVersion));
    const PolicyDims& d = p.dims;
    for (int v : {d.vocab, d.d_model, d.layers, d.heads, d.d_ff, d.d_vis, d.d_lat,
                  d.d_head, d.max_pos})
        write_i32(os, v);
    visit_params(const_cast<PolicyParams&>(p), [&](Array& a) {
        write_i32(os, a.rank());
        for (int s : a.shape) write_i32(os, s);
        os.write(reinterpret_cast<const char*>(a.v.data()),
                 static_cast<std::streamsize>(a.v.size() * sizeof(double)));
    });
    if (!os) throw std::runtime_error("save_policy: write failed for " + path);
}

PolicyParams load_policy(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_policy: cannot open " + path);
    if (static_cast<uint32_t>(read_i32(is)) != kMagic)
        throw std::runtime_error("load_policy: bad magic in " + path);
    if (static_cast<uint32_t>(read_i32(is)) != kVersion)
        throw std::runtime_error("load_policy: unsupported version in " + path);
    PolicyDims d;
    d.vocab = read_i32(is);
    d.d_model = read_i32(is);
    d.layers = read_i32(is);
    d.heads = read_i32(is);
    d.d_ff = read_i32(is);
    d.d_vis = read_i32(is);
    d.d_lat = read_i32(is);
    d.d_head = read_i32(is);
    d.max_pos = read_i32(is);
    PolicyParams p = zeros_policy(d);
    visit_params(p, [&](Array& a) {
        const int rank = read_i32(is);
        if (rank != a.rank()) throw std::runtime_error("load_policy: rank mismatch");
        for (int i = 0; i < rank; ++i)
            if (read_i32(is) != a.shape[static_cast<size_t>(i)])
                throw std::runtime_error("load_policy: shape mismatch");
        is.read(reinterpret_cast<char*>(a.v.data()),
                static_cast<std::streamsize>(a.v.size() * sizeof(double)));
    });
    if (!is) throw std::runtime_error("load_policy: truncated file " + path);
    return p;
}

// --- tape path ---

PolicyRefs register_policy(Graph& g, const PolicyParams& p) {
    std::vector<Graph::Ref> all;
    visit_params(const_cast<PolicyParams&>(p),
                 [&](Array& a) { all.push_back(g.input(a, true)); });
    return map_policy_refs(std::move(all), static_cast<int>(p.blocks.size()));
}

PolicyRefs map_policy_refs(std::vector<Graph::Ref> all, int layers) {
    PolicyRefs r;
    r.all = std::move(all);
    size_t i = 0;
    auto next = [&]() { return r.all[i++]; };
    r.tok_emb = next();
    r.pos_emb = next();
    r.enc_w = next();
    r.enc_b = next();
    r.frame_w = next();
    r.frame_b = next();
    r.blocks.resize(static_cast<size_t>(layers));
    for (auto& b : r.blocks) {
        b.ln1_g = next();
        b.ln1_b = next();
        b.wq = next();
        b.wk = next();
        b.wv = next();
        b.wo = next();
        b.ln2_g = next();
        b.ln2_b = next();
        b.w1 = next();
        b.b1 = next();
        b.w2 = next();
        b.b2 = next();
    }
    r.out_w = next();
    r.head.w1 = next();
    r.head.b1 = next();
    r.head.ln_g = next();
    r.head.ln_b = next();
    r.head.w2 = next();
    r.head.b2 = next();
    if (i != r.all.size()) throw std::logic_error("register_policy: traversal drift");
    return r;
}

Graph::Ref encode_frames_graph(Graph& g, const PolicyRefs& pr,
                               const std::vector<Array>& frames) {
    if (frames.empty()) throw std::invalid_argument("encode_frames_graph: no frames");
    const int d_lat = static_cast<int>(frames[0].size());
    Array F = Array::zeros(static_cast<int>(frames.size()), d_lat);
    for (size_t i = 0; i < frames.size(); ++i) {
        if (static_cast<int>(frames[i].size()) != d_lat)
            throw std::invalid_argument("encode_frames_graph: ragged frames");
        for (int j = 0; j < d_lat; ++j) F.at(static_cast<int>(i), j) = frames[i].at(j);
    }
    Graph::Ref fr = g.input(std::move(F));
    return g.gelu(g.add_rowvec(g.matmul_nt(fr, pr.enc_w), pr.enc_b));
}

ForwardRefs policy_forward(Graph& g, const PolicyRefs& pr, const PolicyDims& dims,
                           const std::vector<Array>& frames, const std::vector<int>& query,
                           const std::vector<int>& traj) {
    if (query.empty()) throw std::invalid_argument("policy_forward: empty query");
    const int C = static_cast<int>(frames.size());
    const int T = C + static_cast<int>(query.size() + traj.size());
    if (T > dims.max_pos)
        throw std::invalid_argument("policy_forward: sequence exceeds max positions");

    std::vector<int> toks = query;
    toks.insert(toks.end(), traj.begin(), traj.end());
    Graph::Ref tx = g.gather_rows(pr.tok_emb, toks);

    Graph::Ref x;
    if (C > 0) {
        Graph::Ref ev = encode_frames_graph(g, pr, frames);
        Graph::Ref fx = g.add_rowvec(g.matmul(ev, pr.frame_w), pr.frame_b);
        x = g.concat_rows({fx, tx});
    } else {
        x = tx;
    }
    std::vector<int> pos_ids(static_cast<size_t>(T));
    std::iota(pos_ids.begin(), pos_ids.end(), 0);
    x = g.add(x, g.gather_rows(pr.pos_emb, pos_ids));

    const int dh = dims.d_model / dims.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (const auto& b : pr.blocks) {
        Graph::Ref a = g.layernorm(x, b.ln1_g, b.ln1_b);
        Graph::Ref q = g.matmul(a, b.wq);
        Graph::Ref k = g.matmul(a, b.wk);
        Graph::Ref v = g.matmul(a, b.wv);
        std::vector<Graph::Ref> heads;
        for (int h = 0; h < dims.heads; ++h) {
            const int c0 = h * dh, c1 = (h + 1) * dh;
            Graph::Ref qh = g.slice_cols(q, c0, c1);
            Graph::Ref kh = g.slice_cols(k, c0, c1);
            Graph::Ref vh = g.slice_cols(v, c0, c1);
            Graph::Ref pmat = g.causal_softmax(g.scale(g.matmul_nt(qh, kh), inv_sqrt));
            heads.push_back(g.matmul(pmat, vh));
        }
        x = g.add(x, g.matmul(g.concat_cols(heads), b.wo));
        Graph::Ref n2 = g.layernorm(x, b.ln2_g, b.ln2_b);
        Graph::Ref f = g.gelu(g.add_rowvec(g.matmul(n2, b.w1), b.b1));
        x = g.add(x, g.add_rowvec(g.matmul(f, b.w2), b.b2));
    }

    ForwardRefs out;
    out.hidden = x;
    out.logits = g.matmul(x, pr.out_w);
    out.prefix_len = C + static_cast<int>(query.size());
    if (!traj.empty()) {
        const int p0 = out.prefix_len;
        Graph::Ref rows =
            g.slice_rows(out.logits, p0 - 1, p0 - 1 + static_cast<int>(traj.size()));
        out.traj_logp = g.logprob_pick(rows, traj);
    }
    return out;
}

Graph::Ref anticipation_graph(Graph& g, const PolicyRefs& pr, Graph::Ref hidden,
                              const std::vector<int>& rows) {
    Graph::Ref h = g.gather_rows(hidden, rows);
    Graph::Ref z = g.gelu(g.add_rowvec(g.matmul(h, pr.head.w1), pr.head.b1));
    Graph::Ref n = g.layernorm(z, pr.head.ln_g, pr.head.ln_b);
    return g.add_rowvec(g.matmul(n, pr.head.w2), pr.head.b2);
}

// --- fast path ---

namespace {

// y = x * W with the same accumulation order as the tape matmul.
void matvec(const std::vector<double>& x, const Array& W, std::vector<double>& y) {
    const int in = W.rows(), out = W.cols();
    y.assign(static_cast<size_t>(out), 0.0);
    for (int p = 0; p < in; ++p) {
        const double xv = x[static_cast<size_t>(p)];
        if (xv == 0.0) continue;
        const double* wrow = &W.v[static_cast<size_t>(p) * out];
        for (int j = 0; j < out; ++j) y[static_cast<size_t>(j)] += xv * wrow[j];
    }
}

void ln_vec(const std::vector<double>& x, const Array& gain, const Array& bias,
            std::vector<double>& out, double eps = 1e-5) {
    const int c = static_cast<int>(x.size());
    out.resize(x.size());
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += x[static_cast<size_t>(j)];
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
        const double d = x[static_cast<size_t>(j)] - mu;
        var += d * d;
    }
    var /= c;
    const double is = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < c; ++j) {
        const double h = (x[static_cast<size_t>(j)] - mu) * is;
        out[static_cast<size_t>(j)] = gain.at(j) * h + bias.at(j);
    }
}

// log softmax with the max-shift used by the tape's pick losses.
void log_softmax(const std::vector<double>& logits, std::vector<double>& out) {
    const int c = static_cast<int>(logits.size());
    out.resize(logits.size());
    double mx = logits[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, logits[static_cast<size_t>(j)]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(logits[static_cast<size_t>(j)] - mx);
    const double logz = mx + std::log(z);
    for (int j = 0; j < c; ++j) out[static_cast<size_t>(j)] = logits[static_cast<size_t>(j)] - logz;
}

// Incremental decoder with cached per-layer keys and values. Arithmetic
// mirrors policy_forward operation for operation.
class Decoder {
public:
    explicit Decoder(const PolicyParams& p) : p_(p) {
        kc_.resize(p.blocks.size());
        vc_.resize(p.blocks.size());
    }

    void push_frame(const Array& latent) {
        const PolicyDims& d = p_.dims;
        if (static_cast<int>(latent.size()) != d.d_lat)
            throw std::invalid_argument("Decoder: frame extent mismatch");
        std::vector<double> e(static_cast<size_t>(d.d_vis));
        for (int j = 0; j < d.d_vis; ++j)
            e[static_cast<size_t>(j)] = gelu_scalar(
                dot(&p_.enc.w.v[static_cast<size_t>(j) * d.d_lat], latent.v.data(), d.d_lat) +
                p_.enc.b.at(j));
        std::vector<double> x;
        matvec(e, p_.frame_w, x);
        for (int j = 0; j < d.d_model; ++j) x[static_cast<size_t>(j)] += p_.frame_b.at(j);
        step(std::move(x));
    }

    void push_token(int tok) {
        const PolicyDims& d = p_.dims;
        if (tok < 0 || tok >= d.vocab) throw std::out_of_range("Decoder: token id");
        std::vector<double> x(static_cast<size_t>(d.d_model));
        for (int j = 0; j < d.d_model; ++j)
            x[static_cast<size_t>(j)] = p_.tok_emb.at(tok, j);
        step(std::move(x));
    }

    const std::vector<double>& hidden() const { return hidden_; }
    const std::vector<double>& logits() const { return logits_; }
    int pos() const { return pos_; }

private:
    const PolicyParams& p_;
    std::vector<std::vector<double>> kc_, vc_;  // per layer, pos * d_model
    std::vector<double> hidden_, logits_;
    int pos_ = 0;

    void step(std::vector<double> x) {
        const PolicyDims& d = p_.dims;
        if (pos_ >= d.max_pos) throw std::runtime_error("Decoder: position overflow");
        for (int j = 0; j < d.d_model; ++j) x[static_cast<size_t>(j)] += p_.pos_emb.at(pos_, j);

        const int dh = d.d_model / d.heads;
        const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
        std::vector<double> a, q, k, v, o_in(static_cast<size_t>(d.d_model)), o, n2, f1, f2;
        for (size_t l = 0; l < p_.blocks.size(); ++l) {
            const BlockParams& b = p_.blocks[l];
            ln_vec(x, b.ln1_g, b.ln1_b, a);
            matvec(a, b.wq, q);
            matvec(a, b.wk, k);
            matvec(a, b.wv, v);
            kc_[l].insert(kc_[l].end(), k.begin(), k.end());
            vc_[l].insert(vc_[l].end(), v.begin(), v.end());
            const int rows = pos_ + 1;
            for (int h = 0; h < d.heads; ++h) {
                const int c0 = h * dh;
                std::vector<double> sc(static_cast<size_t>(rows));
                double mx = -1e300;
                for (int s = 0; s < rows; ++s) {
                    const double sv =
                        dot(&q[static_cast<size_t>(c0)],
                            &kc_[l][static_cast<size_t>(s) * d.d_model + c0], dh) *
                        inv_sqrt;
                    sc[static_cast<size_t>(s)] = sv;
                    mx = std::max(mx, sv);
                }
                double z = 0.0;
                for (int s = 0; s < rows; ++s) {
                    sc[static_cast<size_t>(s)] = std::exp(sc[static_cast<size_t>(s)] - mx);
                    z += sc[static_cast<size_t>(s)];
                }
                for (int j = 0; j < dh; ++j) o_in[static_cast<size_t>(c0 + j)] = 0.0;
                for (int s = 0; s < rows; ++s) {
                    const double w = sc[static_cast<size_t>(s)] / z;
                    const double* vrow = &vc_[l][static_cast<size_t>(s) * d.d_model + c0];
                    for (int j = 0; j < dh; ++j)
                        o_in[static_cast<size_t>(c0 + j)] += w * vrow[j];
                }
            }
            matvec(o_in, b.wo, o);
            for (int j = 0; j < d.d_model; ++j) x[static_cast<size_t>(j)] += o[static_cast<size_t>(j)];
            ln_vec(x, b.ln2_g, b.ln2_b, n2);
            matvec(n2, b.w1, f1);
            for (int j = 0; j < d.d_ff; ++j)
                f1[static_cast<size_t>(j)] = gelu_scalar(f1[static_cast<size_t>(j)] + b.b1.at(j));
            matvec(f1, b.w2, f2);
            for (int j = 0; j < d.d_model; ++j)
                x[static_cast<size_t>(j)] += f2[static_cast<size_t>(j)] + b.b2.at(j);
        }
        hidden_ = std::move(x);
        matvec(hidden_, p_.out_w, logits_);
        ++pos_;
    }
};

void push_prefix(Decoder& dec, const std::vector<Array>& frames,
                 const std::vector<int>& query) {
    if (query.empty()) throw std::invalid_argument("policy: empty query");
    for (const Array& f : frames) dec.push_frame(f);
    for (int t : query) dec.push_token(t);
}

}  // namespace

ScoreResult score_tokens(const PolicyParams& p, const std::vector<Array>& frames,
                         const std::vector<int>& query, const std::vector<int>& traj) {
    Decoder dec(p);
    push_prefix(dec, frames, query);
    ScoreResult r;
    std::vector<double> lp;
    for (int tok : traj) {
        log_softmax(dec.logits(), lp);
        r.logprobs.push_back(lp[static_cast<size_t>(tok)]);
        dec.push_token(tok);
        r.hidden.push_back(dec.hidden());
    }
    return r;
}

SampleResult sample_trajectory(const PolicyParams& p, const std::vector<Array>& frames,
                               const std::vector<int>& query, double temperature, Rng& rng,
                               int max_len) {
    Decoder dec(p);
    push_prefix(dec, frames, query);
    SampleResult r;
    std::vector<double> lp;
    const int cap = std::min(max_len, p.dims.max_pos - dec.pos());
    for (int step = 0; step < cap; ++step) {
        const std::vector<double>& logits = dec.logits();
        const int V = static_cast<int>(logits.size());
        int tok = 0;
        if (temperature <= 0.0) {
            for (int j = 1; j < V; ++j)
                if (logits[static_cast<size_t>(j)] > logits[static_cast<size_t>(tok)]) tok = j;
        } else {
            double mx = logits[0];
            for (int j = 1; j < V; ++j) mx = std::max(mx, logits[static_cast<size_t>(j)]);
            std::vector<double> w(static_cast<size_t>(V));
            double z = 0.0;
            for (int j = 0; j < V; ++j) {
                w[static_cast<size_t>(j)] = std::exp((logits[static_cast<size_t>(j)] - mx) / temperature);
                z += w[static_cast<size_t>(j)];
            }
            double u = rng.uniform() * z;
            tok = V - 1;
            for (int j = 0; j < V; ++j) {
                u -= w[static_cast<size_t>(j)];
                if (u < 0.0) {
                    tok = j;
                    break;
                }
            }
        }
        log_softmax(logits, lp);
        r.logprobs.push_back(lp[static_cast<size_t>(tok)]);
        r.tokens.push_back(tok);
        dec.push_token(tok);
        r.hidden.push_back(dec.hidden());
        if (tok == Vocabulary::kCloseAnswer) return r;
    }
    r.truncated = true;
    return r;
}

std::vector<double> anticipation_apply(const PolicyParams& p,
                                       const std::vector<double>& hidden) {
    std::vector<double> z, n, out;
    matvec(hidden, p.head.w1, z);
    for (int j = 0; j < p.dims.d_head; ++j)
        z[static_cast<size_t>(j)] = gelu_scalar(z[static_cast<size_t>(j)] + p.head.b1.at(j));
    ln_vec(z, p.head.ln_g, p.head.ln_b, n);
    matvec(n, p.head.w2, out);
    for (int j = 0; j < p.dims.d_vis; ++j) out[static_cast<size_t>(j)] += p.head.b2.at(j);
    return out;
}

}  // namespace egolab

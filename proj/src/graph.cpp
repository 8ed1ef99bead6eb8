#include "egolab/graph.hpp"

#include <cmath>
#include <stdexcept>

namespace egolab {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
}  // namespace

double gelu_scalar(double x) {
    return x * 0.5 * (1.0 + std::erf(x * kInvSqrt2));
}

double gelu_grad_scalar(double x) {
    const double phi = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return phi + x * pdf;
}

Graph::Ref Graph::push(Array val, std::function<void(Graph&, Ref)> back) {
    val.check_finite("graph op");
    nodes_.push_back(Node{std::move(val), std::move(back), false});
    return static_cast<Ref>(nodes_.size() - 1);
}

Graph::Ref Graph::input(Array value, bool is_param) {
    value.check_finite("graph input");
    nodes_.push_back(Node{std::move(value), nullptr, is_param});
    return static_cast<Ref>(nodes_.size() - 1);
}

Graph::Ref Graph::matmul(Ref a, Ref b) {
    Array out;
    matmul_into(value(a), value(b), out);
    return push(std::move(out), [a, b](Graph& gr, Ref self) {
        const Array& A = gr.value(a);
        const Array& B = gr.value(b);
        const Array& go = gr.g(self);
        Array& ga = gr.g(a);
        Array& gb = gr.g(b);
        const int m = A.rows(), k = A.cols(), n = B.cols();
        // dA = dOut * B^T
        for (int i = 0; i < m; ++i)
            for (int p = 0; p < k; ++p) {
                double s = 0.0;
                for (int j = 0; j < n; ++j) s += go.at(i, j) * B.at(p, j);
                ga.at(i, p) += s;
            }
        // dB = A^T * dOut
        for (int p = 0; p < k; ++p)
            for (int i = 0; i < m; ++i) {
                const double av = A.at(i, p);
                if (av == 0.0) continue;
                for (int j = 0; j < n; ++j) gb.at(p, j) += av * go.at(i, j);
            }
    });
}

Graph::Ref Graph::matmul_nt(Ref a, Ref b) {
    const Array& A = value(a);
    const Array& B = value(b);
    const int m = A.rows(), k = A.cols(), n = B.rows();
    if (B.cols() != k)
        throw std::invalid_argument("matmul_nt: inner extents " + A.shape_str() + " vs " +
                                    B.shape_str());
    Array out = Array::zeros(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            out.at(i, j) = dot(&A.v[static_cast<size_t>(i) * k], &B.v[static_cast<size_t>(j) * k], k);
    return push(std::move(out), [a, b, m, k, n](Graph& gr, Ref self) {
        const Array& A = gr.value(a);
        const Array& B = gr.value(b);
        const Array& go = gr.g(self);
        Array& ga = gr.g(a);
        Array& gb = gr.g(b);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                const double gij = go.at(i, j);
                if (gij == 0.0) continue;
                for (int p = 0; p < k; ++p) {
                    ga.at(i, p) += gij * B.at(j, p);
                    gb.at(j, p) += gij * A.at(i, p);
                }
            }
    });
}

Graph::Ref Graph::add(Ref a, Ref b) {
    const Array& A = value(a);
    const Array& B = value(b);
    if (!A.same_shape(B)) throw std::invalid_argument("add: shape mismatch");
    Array out = A;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += B.v[i];
    return push(std::move(out), [a, b](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        Array& ga = gr.g(a);
        Array& gb = gr.g(b);
        for (size_t i = 0; i < go.v.size(); ++i) {
            ga.v[i] += go.v[i];
            gb.v[i] += go.v[i];
        }
    });
}

Graph::Ref Graph::add_rowvec(Ref x, Ref bias) {
    const Array& X = value(x);
    const Array& B = value(bias);
    const int r = X.rows(), c = X.cols();
    if (B.size() != static_cast<size_t>(c))
        throw std::invalid_argument("add_rowvec: bias extent mismatch");
    Array out = X;
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) out.at(i, j) += B.at(j);
    return push(std::move(out), [x, bias, r, c](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        Array& gx = gr.g(x);
        Array& gb = gr.g(bias);
        for (size_t i = 0; i < go.v.size(); ++i) gx.v[i] += go.v[i];
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < c; ++j) gb.at(j) += go.at(i, j);
    });
}

Graph::Ref Graph::mul(Ref a, Ref b) {
    const Array& A = value(a);
    const Array& B = value(b);
    if (!A.same_shape(B)) throw std::invalid_argument("mul: shape mismatch");
    Array out = A;
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= B.v[i];
    return push(std::move(out), [a, b](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        const Array& A = gr.value(a);
        const Array& B = gr.value(b);
        Array& ga = gr.g(a);
        Array& gb = gr.g(b);
        for (size_t i = 0; i < go.v.size(); ++i) {
            ga.v[i] += go.v[i] * B.v[i];
            gb.v[i] += go.v[i] * A.v[i];
        }
    });
}

Graph::Ref Graph::scale(Ref x, double c) {
    Array out = value(x);
    for (double& v : out.v) v *= c;
    return push(std::move(out), [x, c](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        Array& gx = gr.g(x);
        for (size_t i = 0; i < go.v.size(); ++i) gx.v[i] += c * go.v[i];
    });
}

Graph::Ref Graph::gelu(Ref x) {
    Array out = value(x);
    for (double& v : out.v) v = gelu_scalar(v);
    return push(std::move(out), [x](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        const Array& X = gr.value(x);
        Array& gx = gr.g(x);
        for (size_t i = 0; i < go.v.size(); ++i)
            gx.v[i] += go.v[i] * gelu_grad_scalar(X.v[i]);
    });
}

Graph::Ref Graph::exp(Ref x) {
    Array out = value(x);
    for (double& v : out.v) v = std::exp(v);
    return push(std::move(out), [x](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        const Array& Y = gr.value(self);
        Array& gx = gr.g(x);
        for (size_t i = 0; i < go.v.size(); ++i) gx.v[i] += go.v[i] * Y.v[i];
    });
}

Graph::Ref Graph::layernorm(Ref x, Ref gain, Ref bias, double eps) {
    const Array& X = value(x);
    const int r = X.rows(), c = X.cols();
    if (value(gain).size() != static_cast<size_t>(c) ||
        value(bias).size() != static_cast<size_t>(c))
        throw std::invalid_argument("layernorm: gain/bias extent mismatch");
    Array out = X;
    Array xhat = Array::zeros(r, c);
    std::vector<double> inv_std(static_cast<size_t>(r));
    const Array& G = value(gain);
    const Array& Bv = value(bias);
    for (int i = 0; i < r; ++i) {
        double mu = 0.0;
        for (int j = 0; j < c; ++j) mu += X.at(i, j);
        mu /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = X.at(i, j) - mu;
            var += d * d;
        }
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<size_t>(i)] = is;
        for (int j = 0; j < c; ++j) {
            const double h = (X.at(i, j) - mu) * is;
            xhat.at(i, j) = h;
            out.at(i, j) = G.at(j) * h + Bv.at(j);
        }
    }
    return push(std::move(out),
                [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std), r,
                 c](Graph& gr, Ref self) {
                    const Array& go = gr.g(self);
                    const Array& G = gr.value(gain);
                    Array& gx = gr.g(x);
                    Array& gg = gr.g(gain);
                    Array& gb = gr.g(bias);
                    for (int i = 0; i < r; ++i) {
                        double sum_gy = 0.0, sum_gyh = 0.0;
                        for (int j = 0; j < c; ++j) {
                            const double gy = go.at(i, j) * G.at(j);
                            sum_gy += gy;
                            sum_gyh += gy * xhat.at(i, j);
                            gg.at(j) += go.at(i, j) * xhat.at(i, j);
                            gb.at(j) += go.at(i, j);
                        }
                        const double is = inv_std[static_cast<size_t>(i)];
                        for (int j = 0; j < c; ++j) {
                            const double gy = go.at(i, j) * G.at(j);
                            gx.at(i, j) +=
                                is * (gy - sum_gy / c - xhat.at(i, j) * sum_gyh / c);
                        }
                    }
                });
}

Graph::Ref Graph::causal_softmax(Ref scores) {
    const Array& S = value(scores);
    const int r = S.rows(), c = S.cols();
    Array probs = Array::zeros(r, c);
    for (int i = 0; i < r; ++i) {
        const int lim = std::min(i, c - 1);
        double mx = S.at(i, 0);
        for (int j = 1; j <= lim; ++j) mx = std::max(mx, S.at(i, j));
        double z = 0.0;
        for (int j = 0; j <= lim; ++j) {
            const double e = std::exp(S.at(i, j) - mx);
            probs.at(i, j) = e;
            z += e;
        }
        for (int j = 0; j <= lim; ++j) probs.at(i, j) /= z;
    }
    Array out = probs;
    return push(std::move(out), [scores, probs = std::move(probs), r, c](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        Array& gs = gr.g(scores);
        for (int i = 0; i < r; ++i) {
            const int lim = std::min(i, c - 1);
            double acc = 0.0;
            for (int j = 0; j <= lim; ++j) acc += go.at(i, j) * probs.at(i, j);
            for (int j = 0; j <= lim; ++j)
                gs.at(i, j) += probs.at(i, j) * (go.at(i, j) - acc);
        }
    });
}

Graph::Ref Graph::slice_cols(Ref x, int c0, int c1) {
    const Array& X = value(x);
    const int r = X.rows(), c = X.cols();
    if (c0 < 0 || c1 > c || c0 >= c1) throw std::invalid_argument("slice_cols: bad range");
    Array out = Array::zeros(r, c1 - c0);
    for (int i = 0; i < r; ++i)
        for (int j = c0; j < c1; ++j) out.at(i, j - c0) = X.at(i, j);
    return push(std::move(out), [x, c0, c1, r](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        Array& gx = gr.g(x);
        for (int i = 0; i < r; ++i)
            for (int j = c0; j < c1; ++j) gx.at(i, j) += go.at(i, j - c0);
    });
}

Graph::Ref Graph::concat_cols(const std::vector<Ref>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
    const int r = value(parts[0]).rows();
    int c = 0;
    for (Ref p : parts) {
        if (value(p).rows() != r) throw std::invalid_argument("concat_cols: row mismatch");
        c += value(p).cols();
    }
    Array out = Array::zeros(r, c);
    int off = 0;
    for (Ref p : parts) {
        const Array& P = value(p);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < P.cols(); ++j) out.at(i, off + j) = P.at(i, j);
        off += P.cols();
    }
    return push(std::move(out), [parts, r](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        int off = 0;
        for (Ref p : parts) {
            Array& gp = gr.g(p);
            const int pc = gr.value(p).cols();
            for (int i = 0; i < r; ++i)
                for (int j = 0; j < pc; ++j) gp.at(i, j) += go.at(i, off + j);
            off += pc;
        }
    });
}

Graph::Ref Graph::slice_rows(Ref x, int r0, int r1) {
    const Array& X = value(x);
    const int r = X.rows(), c = X.cols();
    if (r0 < 0 || r1 > r || r0 >= r1) throw std::invalid_argument("slice_rows: bad range");
    Array out = Array::zeros(r1 - r0, c);
    for (int i = r0; i < r1; ++i)
        for (int j = 0; j < c; ++j) out.at(i - r0, j) = X.at(i, j);
    return push(std::move(out), [x, r0, r1, c](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        Array& gx = gr.g(x);
        for (int i = r0; i < r1; ++i)
            for (int j = 0; j < c; ++j) gx.at(i, j) += go.at(i - r0, j);
    });
}

Graph::Ref Graph::concat_rows(const std::vector<Ref>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
    const int c = value(parts[0]).cols();
    int r = 0;
    for (Ref p : parts) {
        if (value(p).cols() != c) throw std::invalid_argument("concat_rows: col mismatch");
        r += value(p).rows();
    }
    Array out = Array::zeros(r, c);
    int off = 0;
    for (Ref p : parts) {
        const Array& P = value(p);
        for (int i = 0; i < P.rows(); ++i)
            for (int j = 0; j < c; ++j) out.at(off + i, j) = P.at(i, j);
        off += P.rows();
    }
    return push(std::move(out), [parts, c](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        int off = 0;
        for (Ref p : parts) {
            Array& gp = gr.g(p);
            const int pr = gr.value(p).rows();
            for (int i = 0; i < pr; ++i)
                for (int j = 0; j < c; ++j) gp.at(i, j) += go.at(off + i, j);
            off += pr;
        }
    });
}

Graph::Ref Graph::gather_rows(Ref table, std::vector<int> ids) {
    const Array& T = value(table);
    const int c = T.cols();
    Array out = Array::zeros(static_cast<int>(ids.size()), c);
    for (size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || ids[i] >= T.rows())
            throw std::out_of_range("gather_rows: id out of range");
        for (int j = 0; j < c; ++j) out.at(static_cast<int>(i), j) = T.at(ids[i], j);
    }
    return push(std::move(out), [table, ids = std::move(ids), c](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        Array& gt = gr.g(table);
        for (size_t i = 0; i < ids.size(); ++i)
            for (int j = 0; j < c; ++j)
                gt.at(ids[i], j) += go.at(static_cast<int>(i), j);
    });
}

namespace {
// Shared forward for the two softmax-pick losses: per-row log softmax at the
// target index, with stored probabilities for the backward pass.
struct PickForward {
    Array logp;   // (r,) log softmax at target
    Array probs;  // (r,c)
};
PickForward softmax_pick(const Array& L, const std::vector<int>& targets) {
    const int r = L.rows(), c = L.cols();
    if (targets.size() != static_cast<size_t>(r))
        throw std::invalid_argument("softmax pick: target count mismatch");
    PickForward f;
    f.logp = Array::zeros(r);
    f.probs = Array::zeros(r, c);
    for (int i = 0; i < r; ++i) {
        const int t = targets[static_cast<size_t>(i)];
        if (t < 0 || t >= c) throw std::out_of_range("softmax pick: index out of range");
        double mx = L.at(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, L.at(i, j));
        double z = 0.0;
        for (int j = 0; j < c; ++j) z += std::exp(L.at(i, j) - mx);
        const double logz = mx + std::log(z);
        f.logp.at(i) = L.at(i, t) - logz;
        for (int j = 0; j < c; ++j) f.probs.at(i, j) = std::exp(L.at(i, j) - logz);
    }
    return f;
}
}  // namespace

Graph::Ref Graph::softmax_cross_entropy(Ref logits, std::vector<int> targets) {
    PickForward f = softmax_pick(value(logits), targets);
    Array out = f.logp;
    for (double& v : out.v) v = -v;
    return push(std::move(out), [logits, targets = std::move(targets),
                                 probs = std::move(f.probs)](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        Array& gl = gr.g(logits);
        const int r = probs.rows(), c = probs.cols();
        for (int i = 0; i < r; ++i) {
            const double gi = go.at(i);
            if (gi == 0.0) continue;
            for (int j = 0; j < c; ++j) gl.at(i, j) += gi * probs.at(i, j);
            gl.at(i, targets[static_cast<size_t>(i)]) -= gi;
        }
    });
}

Graph::Ref Graph::logprob_pick(Ref logits, std::vector<int> targets) {
    PickForward f = softmax_pick(value(logits), targets);
    return push(std::move(f.logp), [logits, targets = std::move(targets),
                                    probs = std::move(f.probs)](Graph& gr, Ref self) {
        const Array& go = gr.g(self);
        Array& gl = gr.g(logits);
        const int r = probs.rows(), c = probs.cols();
        for (int i = 0; i < r; ++i) {
            const double gi = go.at(i);
            if (gi == 0.0) continue;
            for (int j = 0; j < c; ++j) gl.at(i, j) -= gi * probs.at(i, j);
            gl.at(i, targets[static_cast<size_t>(i)]) += gi;
        }
    });
}

Graph::Ref Graph::sum(Ref x) {
    double s = 0.0;
    for (double v : value(x).v) s += v;
    return push(Array::scalar(s), [x](Graph& gr, Ref self) {
        const double go = gr.g(self).v[0];
        for (double& v : gr.g(x).v) v += go;
    });
}

Graph::Ref Graph::mean(Ref x) {
    const size_t n = value(x).size();
    if (n == 0) throw std::invalid_argument("mean: empty");
    double s = 0.0;
    for (double v : value(x).v) s += v;
    return push(Array::scalar(s / static_cast<double>(n)), [x, n](Graph& gr, Ref self) {
        const double go = gr.g(self).v[0] / static_cast<double>(n);
        for (double& v : gr.g(x).v) v += go;
    });
}

Graph::Ref Graph::cosine(Ref u, Ref v) {
    const Array& U = value(u);
    const Array& V = value(v);
    if (U.size() != V.size()) throw std::invalid_argument("cosine: extent mismatch");
    const int n = static_cast<int>(U.size());
    const double nu = std::sqrt(dot(U.v.data(), U.v.data(), n));
    const double nv = std::sqrt(dot(V.v.data(), V.v.data(), n));
    if (nu < 1e-12 || nv < 1e-12) {
        // Degenerate direction: value 0 with no gradient.
        return push(Array::scalar(0.0), [](Graph&, Ref) {});
    }
    const double d = dot(U.v.data(), V.v.data(), n);
    const double cos = d / (nu * nv);
    return push(Array::scalar(cos), [u, v, nu, nv, cos, n](Graph& gr, Ref self) {
        const double go = gr.g(self).v[0];
        const Array& U = gr.value(u);
        const Array& V = gr.value(v);
        Array& gu = gr.g(u);
        Array& gv = gr.g(v);
        for (int i = 0; i < n; ++i) {
            gu.v[static_cast<size_t>(i)] +=
                go * (V.v[static_cast<size_t>(i)] / (nu * nv) -
                      cos * U.v[static_cast<size_t>(i)] / (nu * nu));
            gv.v[static_cast<size_t>(i)] +=
                go * (U.v[static_cast<size_t>(i)] / (nu * nv) -
                      cos * V.v[static_cast<size_t>(i)] / (nv * nv));
        }
    });
}

Graph::Ref Graph::cosine_smooth(Ref u, Ref v, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("cosine_smooth: eps must be > 0");
    const Array& U = value(u);
    const Array& V = value(v);
    if (U.size() != V.size()) throw std::invalid_argument("cosine_smooth: extent mismatch");
    const int n = static_cast<int>(U.size());
    const double nu = std::sqrt(dot(U.v.data(), U.v.data(), n));
    const double nv = std::sqrt(dot(V.v.data(), V.v.data(), n));
    const double d = dot(U.v.data(), V.v.data(), n);
    const double den = (nu + eps) * (nv + eps);
    const double c = d / den;
    return push(Array::scalar(c), [u, v, nu, nv, d, den, eps, n](Graph& gr, Ref self) {
        const double go = gr.g(self).v[0];
        const Array& U = gr.value(u);
        const Array& V = gr.value(v);
        Array& gu = gr.g(u);
        Array& gv = gr.g(v);
        // d/du of d/den; the norm-derivative term vanishes as the norm -> 0
        const double du_norm = nu > 1e-30 ? d / (nu * den * (nu + eps)) : 0.0;
        const double dv_norm = nv > 1e-30 ? d / (nv * den * (nv + eps)) : 0.0;
        for (int i = 0; i < n; ++i) {
            gu.v[static_cast<size_t>(i)] +=
                go * (V.v[static_cast<size_t>(i)] / den -
                      du_norm * U.v[static_cast<size_t>(i)]);
            gv.v[static_cast<size_t>(i)] +=
                go * (U.v[static_cast<size_t>(i)] / den -
                      dv_norm * V.v[static_cast<size_t>(i)]);
        }
    });
}

Graph::Ref Graph::logsumexp_scaled(Ref x, double tau) {
    if (tau <= 0.0) throw std::invalid_argument("logsumexp_scaled: tau must be > 0");
    const Array& X = value(x);
    const int n = static_cast<int>(X.size());
    if (n == 0) throw std::invalid_argument("logsumexp_scaled: empty");
    double mx = X.v[0];
    for (double v : X.v) mx = std::max(mx, v);
    double z = 0.0;
    for (double v : X.v) z += std::exp((v - mx) / tau);
    const double out = mx + tau * std::log(z);
    Array w = Array::zeros(n);  // softmax weights at temperature tau
    for (int i = 0; i < n; ++i)
        w.at(i) = std::exp((X.at(i) - mx) / tau) / z;
    return push(Array::scalar(out), [x, w = std::move(w), n](Graph& gr, Ref self) {
        const double go = gr.g(self).v[0];
        Array& gx = gr.g(x);
        for (int i = 0; i < n; ++i) gx.v[static_cast<size_t>(i)] += go * w.at(i);
    });
}

void Graph::backward(Ref loss) {
    if (value(loss).size() != 1)
        throw std::invalid_argument("backward: loss must be scalar");
    grads_.clear();
    grads_.resize(nodes_.size());
    for (size_t i = 0; i < nodes_.size(); ++i) {
        grads_[i].shape = nodes_[i].val.shape;
        grads_[i].v.assign(nodes_[i].val.v.size(), 0.0);
    }
    grads_[static_cast<size_t>(loss)].v[0] = 1.0;
    for (Ref i = loss; i >= 0; --i) {
        if (nodes_[static_cast<size_t>(i)].back) nodes_[static_cast<size_t>(i)].back(*this, i);
    }
}

double grad_check(
    const std::function<Graph::Ref(Graph&, const std::vector<Graph::Ref>&)>& build_loss,
    std::vector<Array> params, double step) {
    if (step <= 0.0 || step > 1e-2) throw std::invalid_argument("grad_check: bad step");

    auto eval = [&](const std::vector<Array>& ps, std::vector<Array>* grads_out) {
        Graph g;
        std::vector<Graph::Ref> refs;
        refs.reserve(ps.size());
        for (const Array& p : ps) refs.push_back(g.input(p, true));
        Graph::Ref loss = build_loss(g, refs);
        const double lv = g.value(loss).v[0];
        if (grads_out) {
            g.backward(loss);
            grads_out->clear();
            for (Graph::Ref r : refs) grads_out->push_back(g.grad(r));
        }
        return lv;
    };

    std::vector<Array> analytic;
    eval(params, &analytic);

    double max_err = 0.0;
    for (size_t p = 0; p < params.size(); ++p) {
        for (size_t i = 0; i < params[p].v.size(); ++i) {
            const double orig = params[p].v[i];
            params[p].v[i] = orig + step;
            const double lp = eval(params, nullptr);
            params[p].v[i] = orig - step;
            const double lm = eval(params, nullptr);
            params[p].v[i] = orig;
            const double numeric = (lp - lm) / (2.0 * step);
            const double err =
                std::abs(analytic[p].v[i] - numeric) / std::max(1.0, std::abs(numeric));
            max_err = std::max(max_err, err);
        }
    }
    return max_err;
}

}  // namespace egolab

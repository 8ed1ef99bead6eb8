#include "egolab/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "egolab/rng.hpp"

namespace egolab {

namespace {
constexpr uint64_t kShuffleStream = 0x73667400;
constexpr uint64_t kEpisodePickStream = 0x67727001;
constexpr uint64_t kGroupStream = 0x67727002;
constexpr uint64_t kExoPickStream = 0x67727003;
constexpr uint64_t kDistractStream = 0x73667401;
constexpr double kAuxCosEps = 1e-6;
constexpr double kAuxTau = 0.1;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

template <typename T>
void shuffle_indices(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i)
        std::swap(v[i - 1], v[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);
}
}  // namespace

void TrainConfig::validate() const {
    if (k < 2) throw std::invalid_argument("config: k must be >= 2");
    if (window_n < 1) throw std::invalid_argument("config: window_n must be >= 1");
    if (sft_lr <= 0 || rl_lr <= 0) throw std::invalid_argument("config: rates must be > 0");
    if (beta_confidence <= 0) throw std::invalid_argument("config: beta_confidence must be > 0");
    if (epsilon_adv <= 0) throw std::invalid_argument("config: epsilon_adv must be > 0");
    if (temperature <= 0) throw std::invalid_argument("config: temperature must be > 0");
    if (exo_interval < 1 || max_len < 4 || grpo_steps < 0 || teacher_warmup_steps < 0)
        throw std::invalid_argument("config: bad schedule field");
    if (sft_batch < 1 || exo_batch < 1 || sft_epochs < 1)
        throw std::invalid_argument("config: bad batch field");
    if (sft_distractor_rate < 0.0 || sft_distractor_rate >= 1.0)
        throw std::invalid_argument("config: sft_distractor_rate must be in [0, 1)");
    weights.validate();
}

GradAccum zero_grads(const PolicyParams& p) {
    GradAccum acc;
    visit_params(const_cast<PolicyParams&>(p), [&](Array& a) {
        Array z = a;
        std::fill(z.v.begin(), z.v.end(), 0.0);
        acc.g.push_back(std::move(z));
    });
    return acc;
}

void accumulate_grads(GradAccum& acc, const Graph& g, const PolicyRefs& pr) {
    if (acc.g.size() != pr.all.size())
        throw std::invalid_argument("accumulate_grads: layout mismatch");
    for (size_t i = 0; i < pr.all.size(); ++i) {
        const Array& src = g.grad(pr.all[i]);
        Array& dst = acc.g[i];
        for (size_t j = 0; j < dst.v.size(); ++j) dst.v[j] += src.v[j];
    }
}

double grad_global_norm(const GradAccum& acc) {
    double s = 0.0;
    for (const Array& a : acc.g)
        for (double v : a.v) s += v * v;
    return std::sqrt(s);
}

void sgd_update(PolicyParams& p, const GradAccum& acc, double lr, double clip,
                bool freeze_encoder) {
    const double norm = grad_global_norm(acc);
    if (!std::isfinite(norm)) throw std::runtime_error("sgd_update: non-finite gradient");
    const double scale = (clip > 0 && norm > clip) ? clip / norm : 1.0;
    size_t i = 0;
    visit_params(p, [&](Array& a) {
        const Array& g = acc.g[i++];
        if (freeze_encoder && (&a == &p.enc.w || &a == &p.enc.b)) return;
        for (size_t j = 0; j < a.v.size(); ++j) a.v[j] -= lr * scale * g.v[j];
    });
}

// --- stage I ---

SftItem sft_item_from_episode(const EpisodeSample& ep, const Vocabulary& vocab,
                              FormatMode mode) {
    SftItem it;
    it.frames = ep.context_frames;
    it.query = ep.query;
    it.target = gold_trajectory(ep, vocab, mode);
    return it;
}

SftItem sft_item_from_exo(const ExoSample& ex, const Vocabulary& vocab) {
    SftItem it;
    it.frames = {ex.pooled};
    it.query = ex.question;
    it.target = {Vocabulary::kOpenAnswer, exo_gold_object(ex), Vocabulary::kCloseAnswer};
    return it;
}

double sft_step(PolicyParams& p, const std::vector<const SftItem*>& batch, double lr) {
    if (batch.empty()) throw std::invalid_argument("sft_step: empty batch");
    size_t total_tokens = 0;
    for (const SftItem* it : batch) total_tokens += it->target.size();
    if (total_tokens == 0) throw std::invalid_argument("sft_step: no target tokens");

    GradAccum acc = zero_grads(p);
    double loss = 0.0;
    for (const SftItem* it : batch) {
        Graph g;
        PolicyRefs pr = register_policy(g, p);
        ForwardRefs fwd = policy_forward(g, pr, p.dims, it->frames, it->query, it->target);
        Graph::Ref item_loss =
            g.scale(g.sum(fwd.traj_logp), -1.0 / static_cast<double>(total_tokens));
        loss += g.value(item_loss).v[0];
        g.backward(item_loss);
        accumulate_grads(acc, g, pr);
    }
    if (!std::isfinite(loss)) throw std::runtime_error("sft_step: non-finite loss");
    sgd_update(p, acc, lr, 1.0);
    return loss;
}

SftResult run_sft(PolicyParams& p, const std::vector<EpisodeSample>& ego,
                  const std::vector<ExoSample>& exo, const TrainConfig& cfg,
                  const Vocabulary& vocab, uint64_t seed, std::ostream* log) {
    cfg.validate();
    std::vector<SftItem> items;
    items.reserve(ego.size() + exo.size());
    // A slice of the ego corpus carries ungrounded teacher traces: plan,
    // verify letter, and answer all follow one non-gold option.
    Rng distract_rng(Rng::mix(seed, kDistractStream));
    for (const auto& e : ego) {
        SftItem it = sft_item_from_episode(e, vocab, cfg.format_mode);
        if (distract_rng.uniform() < cfg.sft_distractor_rate) {
            int opt = distract_rng.uniform_int(static_cast<int>(e.options.size()) - 1);
            if (opt >= e.gold_answer) ++opt;
            it.target = distractor_trajectory(e, opt, vocab, cfg.format_mode);
        }
        items.push_back(std::move(it));
    }
    for (const auto& x : exo) items.push_back(sft_item_from_exo(x, vocab));
    if (items.empty()) throw std::invalid_argument("run_sft: empty corpus");

    SftResult res;
    Rng shuffle_rng(Rng::mix(seed, kShuffleStream));
    int step = 0;
    for (int epoch = 0; epoch < cfg.sft_epochs; ++epoch) {
        std::vector<size_t> order(items.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        shuffle_indices(order, shuffle_rng);
        for (size_t off = 0; off < order.size(); off += static_cast<size_t>(cfg.sft_batch)) {
            std::vector<const SftItem*> batch;
            for (size_t j = off; j < std::min(order.size(), off + cfg.sft_batch); ++j)
                batch.push_back(&items[order[j]]);
            const double loss = sft_step(p, batch, cfg.sft_lr);
            res.losses.push_back(loss);
            if (log) (*log) << "sft step=" << step << " loss=" << fmt(loss) << "\n";
            ++step;
        }
    }

    // greedy format compliance on a slice of the ego corpus
    const size_t probe = std::min<size_t>(ego.size(), 100);
    int ok = 0;
    Rng unused(0);
    for (size_t i = 0; i < probe; ++i) {
        auto s = sample_trajectory(p, ego[i].context_frames, ego[i].query, 0.0, unused,
                                   cfg.max_len);
        if (format_reward(s.tokens, vocab, cfg.format_mode) == 1.0) ++ok;
    }
    res.format_rate = probe ? static_cast<double>(ok) / static_cast<double>(probe) : 0.0;
    res.gate_passed = res.format_rate >= cfg.sft_format_gate;
    if (log)
        (*log) << "sft gate format_rate=" << fmt(res.format_rate) << " verdict="
               << (res.gate_passed ? "pass" : "fail") << "\n";
    res.reference = p;
    return res;
}

// --- stage II ---

std::vector<double> group_advantages(const std::vector<double>& rewards, double epsilon) {
    const size_t k = rewards.size();
    if (k < 2) throw std::invalid_argument("group_advantages: need k >= 2");
    // all-equal groups must map to exactly zero, immune to summation rounding
    if (std::equal(rewards.begin() + 1, rewards.end(), rewards.begin()))
        return std::vector<double>(k, 0.0);
    double mu = 0.0;
    for (double r : rewards) mu += r;
    mu /= static_cast<double>(k);
    double var = 0.0;
    for (double r : rewards) var += (r - mu) * (r - mu);
    var /= static_cast<double>(k);
    const double sd = std::sqrt(var);
    std::vector<double> adv(k);
    for (size_t i = 0; i < k; ++i) adv[i] = (rewards[i] - mu) / (sd + epsilon);
    return adv;
}

RolloutGroup collect_group(const PolicyParams& p, const EpisodeSample& ep,
                           const TrainConfig& cfg, const Vocabulary& vocab,
                           uint64_t group_seed, bool teacher_phase) {
    cfg.validate();
    if (cfg.window_n > static_cast<int>(ep.future_frames.size()))
        throw std::invalid_argument("collect_group: window exceeds future frames");

    std::vector<Array> future_vis;
    for (int n = 0; n < cfg.window_n; ++n)
        future_vis.push_back(encode_frame(ep.future_frames[static_cast<size_t>(n)], p.enc));

    RolloutGroup grp;
    grp.episode = &ep;
    for (int i = 0; i < cfg.k; ++i) {
        RolloutRecord rec;
        Rng rng(Rng::mix(group_seed, static_cast<uint64_t>(i)));
        rec.sample = sample_trajectory(p, ep.context_frames, ep.query, cfg.temperature, rng,
                                       cfg.max_len);
        rec.parsed = parse_trajectory(rec.sample.tokens, vocab, cfg.format_mode);
        const double format = format_reward(rec.sample.tokens, vocab, cfg.format_mode);

        double answer = 0.0, ground = 0.0;
        if (format == 1.0) {
            const Trajectory& traj = *rec.parsed.trajectory;
            answer = answer_reward(vocab.letter_index(traj.answer_token), ep.gold_answer);
            for (const PlanClause& c : traj.clauses) {
                rec.clause_last_rows.push_back(c.end - 1);
                auto pred = anticipation_apply(
                    p, rec.sample.hidden[static_cast<size_t>(c.end - 1)]);
                rec.grounding.push_back(ground_clause(pred, future_vis, cfg.window_n));
            }
            if (!rec.grounding.empty())
                ground = ground_trajectory(rec.grounding, cfg.pooling);
            for (int t = traj.verify_begin; t < traj.verify_end; ++t)
                rec.verify_logp += rec.sample.logprobs[static_cast<size_t>(t)];
        }
        rec.reward = composite_reward(format, answer, ground, 0.0, cfg.weights);
        for (const auto& cg : rec.grounding) {
            rec.reward.clause_ground.push_back(pool_clause(cg, cfg.pooling));
            rec.reward.clause_argmax.push_back(cg.argmax_n);
        }
        grp.rollouts.push_back(std::move(rec));
    }

    // confidence component, phase dependent
    std::vector<double> conf(static_cast<size_t>(cfg.k), 0.0);
    if (teacher_phase) {
        for (int i = 0; i < cfg.k; ++i) {
            RolloutRecord& rec = grp.rollouts[static_cast<size_t>(i)];
            if (rec.reward.format != 1.0) continue;
            const Trajectory& traj = *rec.parsed.trajectory;
            if (traj.verify_end <= traj.verify_begin) continue;
            std::vector<int> forced(rec.sample.tokens.begin(),
                                    rec.sample.tokens.begin() + traj.verify_begin);
            const size_t base = forced.size();
            forced.insert(forced.end(), ep.teacher_verify.begin(), ep.teacher_verify.end());
            auto sc = score_tokens(p, ep.context_frames, ep.query, forced);
            double teacher_lp = 0.0;
            for (size_t t = base; t < forced.size(); ++t) teacher_lp += sc.logprobs[t];
            conf[static_cast<size_t>(i)] =
                confidence_teacher(teacher_lp, rec.verify_logp, cfg.beta_confidence);
        }
    } else {
        std::vector<double> partial, vlp;
        for (const auto& rec : grp.rollouts) {
            partial.push_back(rec.reward.composite);
            vlp.push_back(rec.verify_logp);
        }
        conf = confidence_selfrank(partial, vlp, cfg.beta_confidence);
    }

    std::vector<double> composites;
    for (int i = 0; i < cfg.k; ++i) {
        RolloutRecord& rec = grp.rollouts[static_cast<size_t>(i)];
        RewardBreakdown b =
            composite_reward(rec.reward.format, rec.reward.answer, rec.reward.ground,
                             conf[static_cast<size_t>(i)], cfg.weights);
        b.clause_ground = rec.reward.clause_ground;
        b.clause_argmax = rec.reward.clause_argmax;
        rec.reward = b;
        composites.push_back(b.composite);
    }

    double mu = 0.0;
    for (double r : composites) mu += r;
    mu /= static_cast<double>(cfg.k);
    double var = 0.0;
    for (double r : composites) var += (r - mu) * (r - mu);
    grp.reward_mean = mu;
    grp.reward_std = std::sqrt(var / static_cast<double>(cfg.k));
    auto adv = group_advantages(composites, cfg.epsilon_adv);
    for (int i = 0; i < cfg.k; ++i)
        grp.rollouts[static_cast<size_t>(i)].advantage = adv[static_cast<size_t>(i)];
    return grp;
}

GrpoLossParts build_grpo_loss(Graph& g, const PolicyRefs& pr, const PolicyDims& dims,
                              const RolloutGroup& grp, const TrainConfig& cfg,
                              const std::vector<std::vector<double>>& ref_logps) {
    const EpisodeSample& ep = *grp.episode;
    const int k = static_cast<int>(grp.rollouts.size());
    if (ref_logps.size() != grp.rollouts.size())
        throw std::invalid_argument("build_grpo_loss: reference logprob count mismatch");

    Graph::Ref fut_vis = encode_frames_graph(
        g, pr,
        std::vector<Array>(ep.future_frames.begin(),
                           ep.future_frames.begin() + cfg.window_n));
    // shift so the smoothed max of an all-zero similarity row is exactly 0
    const double lse_shift = kAuxTau * std::log(static_cast<double>(cfg.window_n));

    Graph::Ref pg = -1, kl = -1, aux_sum = -1;
    int clause_count = 0;
    for (int i = 0; i < k; ++i) {
        const RolloutRecord& rec = grp.rollouts[static_cast<size_t>(i)];
        const std::vector<double>& ref_lp = ref_logps[static_cast<size_t>(i)];
        if (ref_lp.size() != rec.sample.tokens.size())
            throw std::invalid_argument("build_grpo_loss: reference logprob length mismatch");
        ForwardRefs fwd =
            policy_forward(g, pr, dims, ep.context_frames, ep.query, rec.sample.tokens);
        Graph::Ref lp = g.sum(fwd.traj_logp);

        Graph::Ref pg_i = g.scale(lp, -rec.advantage / static_cast<double>(k));
        pg = (pg < 0) ? pg_i : g.add(pg, pg_i);

        // k3 surrogate per token: exp(r) - r - 1 with r = logref - logpi.
        // Nonnegative, exactly zero (value and gradient) at the reference, so
        // the penalty anchors without pushing sampled sequences down.
        Array ref_arr = g.value(fwd.traj_logp);
        std::copy(ref_lp.begin(), ref_lp.end(), ref_arr.v.begin());
        Graph::Ref r = g.add(g.input(std::move(ref_arr)), g.scale(fwd.traj_logp, -1.0));
        Graph::Ref k3 = g.add(g.sum(g.exp(r)),
                              g.add(g.scale(g.sum(r), -1.0),
                                    g.input(Array::scalar(-static_cast<double>(
                                        rec.sample.tokens.size())))));
        Graph::Ref kl_i = g.scale(k3, 1.0 / static_cast<double>(k));
        kl = (kl < 0) ? kl_i : g.add(kl, kl_i);

        if (!rec.clause_last_rows.empty()) {
            std::vector<int> rows;
            for (int r : rec.clause_last_rows) rows.push_back(fwd.prefix_len + r);
            Graph::Ref preds = anticipation_graph(g, pr, fwd.hidden, rows);
            for (size_t c = 0; c < rows.size(); ++c) {
                Graph::Ref pred = g.slice_rows(preds, static_cast<int>(c),
                                               static_cast<int>(c) + 1);
                std::vector<Graph::Ref> cos;
                for (int n = 0; n < cfg.window_n; ++n)
                    cos.push_back(g.cosine_smooth(
                        pred, g.slice_rows(fut_vis, n, n + 1), kAuxCosEps));
                Graph::Ref sim = g.logsumexp_scaled(g.concat_rows(cos), kAuxTau);
                Graph::Ref miss = g.add(g.input(Array::scalar(1.0 + lse_shift)),
                                        g.scale(sim, -1.0));
                aux_sum = (aux_sum < 0) ? miss : g.add(aux_sum, miss);
                ++clause_count;
            }
        }
    }

    GrpoLossParts parts;
    Graph::Ref loss = pg;
    parts.pg_value = g.value(pg).v[0];
    parts.kl_hat = g.value(kl).v[0];
    loss = g.add(loss, g.scale(kl, cfg.beta_kl));
    if (aux_sum >= 0 && cfg.lambda_ground > 0) {
        Graph::Ref aux =
            g.scale(aux_sum, cfg.lambda_ground / static_cast<double>(clause_count));
        parts.aux_value = g.value(aux).v[0];
        loss = g.add(loss, aux);
    }
    parts.loss = loss;
    parts.total = parts.pg_value + cfg.beta_kl * parts.kl_hat + parts.aux_value;
    return parts;
}

StepMetrics grpo_update(PolicyParams& p, const PolicyParams& ref, const RolloutGroup& grp,
                        const TrainConfig& cfg) {
    const EpisodeSample& ep = *grp.episode;
    const int k = static_cast<int>(grp.rollouts.size());

    std::vector<std::vector<double>> ref_logps;
    for (const auto& rec : grp.rollouts) {
        auto rs = score_tokens(ref, ep.context_frames, ep.query, rec.sample.tokens);
        ref_logps.push_back(rs.logprobs);
    }

    Graph g;
    PolicyRefs pr = register_policy(g, p);
    GrpoLossParts parts = build_grpo_loss(g, pr, p.dims, grp, cfg, ref_logps);

    StepMetrics m;
    for (const auto& rec : grp.rollouts) {
        m.format_mean += rec.reward.format / k;
        m.answer_mean += rec.reward.answer / k;
        m.ground_mean += rec.reward.ground / k;
        m.conf_mean += rec.reward.confidence / k;
        m.composite_mean += rec.reward.composite / k;
        m.adv_mean += rec.advantage / k;
    }
    m.composite_std = grp.reward_std;
    for (const auto& rec : grp.rollouts)
        m.adv_std += (rec.advantage - m.adv_mean) * (rec.advantage - m.adv_mean) / k;
    m.adv_std = std::sqrt(m.adv_std);
    m.pg_loss = parts.pg_value;
    m.kl_hat = parts.kl_hat;
    m.aux_loss = parts.aux_value;
    m.total_loss = parts.total;
    if (!std::isfinite(m.total_loss))
        throw TrainAbort(m.step, "grpo_update: non-finite loss");

    g.backward(parts.loss);
    GradAccum acc = zero_grads(p);
    accumulate_grads(acc, g, pr);
    m.grad_norm = grad_global_norm(acc);
    sgd_update(p, acc, cfg.rl_lr, 1.0, cfg.freeze_encoder);
    return m;
}

double exo_step(PolicyParams& p, const std::vector<const ExoSample*>& batch,
                const TrainConfig& cfg, const Vocabulary& vocab) {
    if (batch.empty()) throw std::invalid_argument("exo_step: empty batch");
    if (cfg.lambda_exo == 0.0) return 0.0;
    GradAccum acc = zero_grads(p);
    double loss = 0.0;
    const double scale = cfg.lambda_exo / static_cast<double>(batch.size());
    for (const ExoSample* ex : batch) {
        Graph g;
        PolicyRefs pr = register_policy(g, p);
        std::vector<Array> frames = {ex->pooled};
        const int gold = exo_gold_object(*ex);
        std::vector<int> traj = {Vocabulary::kOpenAnswer, gold, Vocabulary::kCloseAnswer};
        ForwardRefs fwd = policy_forward(g, pr, p.dims, frames, ex->question, traj);
        // cross-entropy on the answer token alone
        Graph::Ref ce = g.softmax_cross_entropy(
            g.slice_rows(fwd.logits, fwd.prefix_len, fwd.prefix_len + 1), {gold});
        Graph::Ref item = g.scale(g.sum(ce), scale);
        loss += g.value(item).v[0];
        g.backward(item);
        accumulate_grads(acc, g, pr);
    }
    if (!std::isfinite(loss)) throw std::runtime_error("exo_step: non-finite loss");
    sgd_update(p, acc, cfg.rl_lr, 1.0, cfg.freeze_encoder);
    return loss;
}

std::string format_metrics(const StepMetrics& m) {
    std::string s;
    s += "step=" + std::to_string(m.step);
    s += " phase=";
    s += m.teacher_phase ? "teacher" : "selfrank";
    s += " format=" + fmt(m.format_mean);
    s += " answer=" + fmt(m.answer_mean);
    s += " ground=" + fmt(m.ground_mean);
    s += " conf=" + fmt(m.conf_mean);
    s += " comp_mean=" + fmt(m.composite_mean);
    s += " comp_std=" + fmt(m.composite_std);
    s += " adv_mean=" + fmt(m.adv_mean);
    s += " adv_std=" + fmt(m.adv_std);
    s += " kl=" + fmt(m.kl_hat);
    s += " pg=" + fmt(m.pg_loss);
    s += " aux=" + fmt(m.aux_loss);
    s += " total=" + fmt(m.total_loss);
    s += " gnorm=" + fmt(m.grad_norm);
    s += " exo=" + std::to_string(m.exo_ran ? 1 : 0);
    s += " exo_loss=" + fmt(m.exo_loss);
    return s;
}

GrpoResult train_grpo(PolicyParams& p, const PolicyParams& ref,
                      const std::vector<EpisodeSample>& episodes,
                      const std::vector<ExoSample>& exo, const TrainConfig& cfg,
                      const Vocabulary& vocab, uint64_t seed,
                      std::ostream* metrics_out) {
    cfg.validate();
    if (episodes.empty()) throw std::invalid_argument("train_grpo: no episodes");
    GrpoResult res;
    Rng pick(Rng::mix(seed, kEpisodePickStream));
    Rng exo_pick(Rng::mix(seed, kExoPickStream));
    for (int step = 0; step < cfg.grpo_steps; ++step) {
        const bool teacher_phase = step < cfg.teacher_warmup_steps;
        const EpisodeSample& ep =
            episodes[static_cast<size_t>(pick.uniform_int(static_cast<int>(episodes.size())))];
        RolloutGroup grp =
            collect_group(p, ep, cfg, vocab,
                          Rng::mix(seed, kGroupStream + static_cast<uint64_t>(step) * 2654435761ull),
                          teacher_phase);
        StepMetrics m;
        try {
            m = grpo_update(p, ref, grp, cfg);
        } catch (TrainAbort& e) {
            e.step = step;
            throw;
        }
        m.step = step;
        m.teacher_phase = teacher_phase;
        if (cfg.exo_reg && !exo.empty() && step % cfg.exo_interval == 0) {
            std::vector<const ExoSample*> batch;
            for (int i = 0; i < cfg.exo_batch; ++i)
                batch.push_back(
                    &exo[static_cast<size_t>(exo_pick.uniform_int(static_cast<int>(exo.size())))]);
            m.exo_ran = true;
            m.exo_loss = exo_step(p, batch, cfg, vocab);
        }
        if (metrics_out) (*metrics_out) << format_metrics(m) << "\n";
        res.metrics.push_back(m);
    }
    return res;
}

}  // namespace egolab

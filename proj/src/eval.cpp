#include "egolab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>
#include <stdexcept>

#include "egolab/dataset.hpp"
#include "egolab/rng.hpp"

namespace egolab {

namespace {

SampleResult greedy_decode(const PolicyParams& p, const std::vector<Array>& frames,
                           const std::vector<int>& query, int max_len) {
    Rng unused(0);  // greedy decoding never draws from it
    return sample_trajectory(p, frames, query, /*temperature=*/0.0, unused, max_len);
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Linear-interpolated quantile on a sorted copy (the h = (n-1)p convention).
double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double h = q * static_cast<double>(v.size() - 1);
    const size_t lo = static_cast<size_t>(std::floor(h));
    const size_t hi = static_cast<size_t>(std::ceil(h));
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> average_ranks(const std::vector<double>& x) {
    const size_t n = x.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n, 0.0);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average
        for (size_t t = i; t <= j; ++t) ranks[order[t]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

EvalReport evaluate(const PolicyParams& p, const std::vector<EpisodeSample>& episodes,
                    const Vocabulary& vocab, FormatMode mode, int max_len) {
    if (episodes.empty()) throw std::invalid_argument("evaluate: empty dataset");
    EvalReport rep;
    rep.dataset_id = "ego";
    int well_formed = 0;
    for (const EpisodeSample& ep : episodes) {
        const SampleResult s = greedy_decode(p, ep.context_frames, ep.query, max_len);
        const ParseResult parsed = parse_trajectory(s.tokens, vocab, mode);
        double outcome = 0.0;
        if (format_reward(s.tokens, vocab, mode) == 1.0) {
            ++well_formed;
            outcome = answer_reward(vocab.letter_index(parsed.trajectory->answer_token),
                                    ep.gold_answer);
        }
        rep.outcomes.push_back(outcome);
    }
    rep.accuracy = mean_of(rep.outcomes);
    rep.format_rate = static_cast<double>(well_formed) / static_cast<double>(episodes.size());
    return rep;
}

EvalReport evaluate_exo(const PolicyParams& p, const std::vector<ExoSample>& tasks,
                        const Vocabulary& vocab, int max_len) {
    if (tasks.empty()) throw std::invalid_argument("evaluate_exo: empty dataset");
    EvalReport rep;
    rep.dataset_id = "exo";
    int well_formed = 0;
    for (const ExoSample& ex : tasks) {
        // exo items condition on the pooled scene latent, mirroring training
        const SampleResult s = greedy_decode(p, {ex.pooled}, ex.question, max_len);
        const bool ok = s.tokens.size() == 3 && s.tokens[0] == Vocabulary::kOpenAnswer &&
                        vocab.is_object(s.tokens[1]) && s.tokens[2] == Vocabulary::kCloseAnswer;
        if (ok) ++well_formed;
        const double outcome = ok && s.tokens[1] == exo_gold_object(ex) ? 1.0 : 0.0;
        rep.outcomes.push_back(outcome);
    }
    rep.accuracy = mean_of(rep.outcomes);
    rep.format_rate = static_cast<double>(well_formed) / static_cast<double>(tasks.size());
    return rep;
}

BootstrapCi bootstrap_ci(const std::vector<double>& a, const std::vector<double>& b,
                         int iterations, double level, uint64_t seed) {
    if (a.size() != b.size()) throw std::invalid_argument("bootstrap_ci: length mismatch");
    const size_t n = a.size();
    if (n < 2) throw std::invalid_argument("bootstrap_ci: need >= 2 paired outcomes");
    if (iterations < 1 || level <= 0.0 || level >= 1.0)
        throw std::invalid_argument("bootstrap_ci: bad iterations or level");

    std::vector<double> diff(n);
    for (size_t i = 0; i < n; ++i) diff[i] = b[i] - a[i];

    BootstrapCi out;
    out.delta = mean_of(diff);

    Rng rng(Rng::mix(seed, 0xb007571ull));
    std::vector<double> means(static_cast<size_t>(iterations));
    for (int it = 0; it < iterations; ++it) {
        double s = 0.0;
        for (size_t i = 0; i < n; ++i) s += diff[static_cast<size_t>(rng.uniform_int(
            static_cast<int>(n)))];
        means[static_cast<size_t>(it)] = s / static_cast<double>(n);
    }
    std::sort(means.begin(), means.end());
    const double alpha = 0.5 * (1.0 - level);
    auto rank = [&](double q) {
        size_t r = static_cast<size_t>(std::floor(q * static_cast<double>(iterations)));
        return std::min(r, static_cast<size_t>(iterations - 1));
    };
    out.lower = means[rank(alpha)];
    out.upper = means[rank(1.0 - alpha)];
    return out;
}

HeatmapRecord grounding_heatmap(const PolicyParams& p, const EpisodeSample& episode,
                                const Vocabulary& vocab, int window_n, FormatMode mode,
                                int max_len) {
    if (window_n < 1 || window_n > static_cast<int>(episode.future_frames.size()))
        throw std::invalid_argument("grounding_heatmap: window out of range");

    HeatmapRecord rec;
    rec.episode_id = episode.id;
    const SampleResult s = greedy_decode(p, episode.context_frames, episode.query, max_len);
    if (format_reward(s.tokens, vocab, mode) != 1.0) return rec;  // flagged-empty record

    const ParseResult parsed = parse_trajectory(s.tokens, vocab, mode);
    const Trajectory& traj = *parsed.trajectory;
    rec.ok = true;
    rec.outcome = answer_reward(vocab.letter_index(traj.answer_token), episode.gold_answer);

    std::vector<Array> future_vis;
    for (int n = 0; n < window_n; ++n)
        future_vis.push_back(encode_frame(episode.future_frames[static_cast<size_t>(n)], p.enc));
    for (const PlanClause& c : traj.clauses) {
        const auto pred =
            anticipation_apply(p, s.hidden[static_cast<size_t>(c.end - 1)]);
        ClauseGrounding cg = ground_clause(pred, future_vis, window_n);
        rec.argmax.push_back(cg.argmax_n);
        rec.matrix.push_back(std::move(cg.cosines));
    }
    return rec;
}

std::string heatmap_csv(const HeatmapRecord& rec) {
    std::string out = "clause";
    char buf[64];
    const size_t cols = rec.matrix.empty() ? 0 : rec.matrix[0].size();
    for (size_t n = 1; n <= cols; ++n) {
        std::snprintf(buf, sizeof(buf), ",f%zu", n);
        out += buf;
    }
    out += "\n";
    for (size_t k = 0; k < rec.matrix.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%zu", k + 1);
        out += buf;
        for (double v : rec.matrix[k]) {
            std::snprintf(buf, sizeof(buf), ",%.10g", v);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

std::optional<double> spearman(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("spearman: need >= 2 points");
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    const double mx = mean_of(rx), my = mean_of(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

ClausePositionStats clause_position_stats(const std::vector<HeatmapRecord>& heatmaps,
                                          GroundPooling pooling) {
    std::vector<const HeatmapRecord*> usable;
    for (const HeatmapRecord& h : heatmaps)
        if (h.ok && !h.matrix.empty()) usable.push_back(&h);
    if (usable.size() < 30)
        throw std::invalid_argument("clause_position_stats: need >= 30 well-formed episodes");

    ClausePositionStats st;
    for (const HeatmapRecord* h : usable)
        st.positions = std::max(st.positions, static_cast<int>(h->matrix.size()));

    std::vector<std::vector<double>> per_pos(static_cast<size_t>(st.positions));
    std::vector<std::vector<double>> per_pos_argmax(static_cast<size_t>(st.positions));
    std::vector<double> episode_mean, episode_outcome;
    for (const HeatmapRecord* h : usable) {
        double total = 0.0;
        for (size_t k = 0; k < h->matrix.size(); ++k) {
            const std::vector<double>& row = h->matrix[k];
            const double pooled = pooling == GroundPooling::kMax
                                      ? *std::max_element(row.begin(), row.end())
                                      : mean_of(row);
            per_pos[k].push_back(pooled);
            per_pos_argmax[k].push_back(static_cast<double>(h->argmax[k]));
            total += pooled;
        }
        episode_mean.push_back(total / static_cast<double>(h->matrix.size()));
        episode_outcome.push_back(h->outcome);
    }
    for (int k = 0; k < st.positions; ++k) {
        const std::vector<double>& v = per_pos[static_cast<size_t>(k)];
        st.counts.push_back(static_cast<int>(v.size()));
        st.mean.push_back(mean_of(v));
        st.q1.push_back(quantile(v, 0.25));
        st.median.push_back(quantile(v, 0.5));
        st.q3.push_back(quantile(v, 0.75));
        st.mean_argmax.push_back(mean_of(per_pos_argmax[static_cast<size_t>(k)]));
    }
    st.reward_outcome_corr = spearman(episode_mean, episode_outcome);
    return st;
}

// --- ablation matrix ---

const std::vector<std::string>& known_variants() {
    static const std::vector<std::string> ids = {
        "full",         "format_answer",     "acmg_only",    "confidence_only",
        "mean_pooling", "n4",                "n8",           "n16",
        "n32",          "no_teacher_warmup", "no_ego_plan",  "no_exo_verify",
        "no_exo_reg",   "frozen_encoder"};
    return ids;
}

void apply_variant(Config& cfg, const std::string& id) {
    TrainConfig& t = cfg.train;
    if (id == "full") {
        // base configuration as-is
    } else if (id == "format_answer") {
        t.weights.w_ground = 0.0;
        t.weights.w_confidence = 0.0;
    } else if (id == "acmg_only") {
        t.weights.w_confidence = 0.0;
    } else if (id == "confidence_only") {
        t.weights.w_ground = 0.0;
    } else if (id == "mean_pooling") {
        t.pooling = GroundPooling::kMean;
    } else if (id == "n4" || id == "n8" || id == "n16" || id == "n32") {
        t.window_n = std::stoi(id.substr(1));
    } else if (id == "no_teacher_warmup") {
        t.teacher_warmup_steps = 0;
    } else if (id == "no_ego_plan") {
        t.format_mode = FormatMode::kNoPlan;
    } else if (id == "no_exo_verify") {
        t.format_mode = FormatMode::kNoVerify;
    } else if (id == "no_exo_reg") {
        t.exo_reg = false;
    } else if (id == "frozen_encoder") {
        t.freeze_encoder = true;
    } else {
        throw std::invalid_argument("apply_variant: unknown variant id: " + id);
    }
}

RunData make_run_data(const Config& cfg, uint64_t seed) {
    // Non-overlapping id ranges per split; each split can grow to 2^28
    // episodes before colliding with the next one.
    const uint64_t base = seed << 32;
    const uint64_t span = uint64_t{1} << 28;
    RunData rd;
    rd.ego_train = generate_episodes(base, cfg.train.sft_episodes, cfg.world);
    rd.exo_train = generate_exo_tasks(base + span, cfg.train.exo_episodes, cfg.world);
    rd.ego_heldout = generate_episodes(base + 2 * span, cfg.eval_episodes, cfg.world);
    rd.exo_heldout = generate_exo_tasks(base + 3 * span, cfg.eval_episodes, cfg.world);
    return rd;
}

namespace {

struct SftEntry {
    PolicyParams policy;     // at the gate
    PolicyParams reference;  // frozen KL anchor
    double ego_acc = 0.0;
    double exo_acc = 0.0;
};

}  // namespace

AblationTable run_ablation(const Config& base, const std::vector<std::string>& variant_ids,
                           const std::vector<uint64_t>& seeds, const Vocabulary& vocab,
                           std::ostream* log) {
    if (variant_ids.empty() || seeds.empty())
        throw std::invalid_argument("run_ablation: empty variant or seed set");
    base.validate();

    PolicyDims dims;
    dims.vocab = vocab.size();
    dims.d_lat = base.world.d_lat;

    std::map<uint64_t, RunData> data;  // per seed; identical across variants
    std::map<std::pair<uint64_t, int>, SftEntry> sft;  // keyed by (seed, format mode)

    auto run_data_for = [&](uint64_t seed) -> const RunData& {
        auto it = data.find(seed);
        if (it == data.end()) it = data.emplace(seed, make_run_data(base, seed)).first;
        return it->second;
    };
    auto sft_for = [&](uint64_t seed, FormatMode mode) -> const SftEntry& {
        const auto key = std::make_pair(seed, static_cast<int>(mode));
        auto it = sft.find(key);
        if (it != sft.end()) return it->second;

        const RunData& rd = run_data_for(seed);
        TrainConfig scfg = base.train;
        scfg.format_mode = mode;
        SftEntry e;
        e.policy = init_policy(dims, seed);
        SftResult sr = run_sft(e.policy, rd.ego_train, rd.exo_train, scfg, vocab,
                               Rng::mix(seed, 0x5f74ull), log);
        e.reference = sr.reference;
        e.ego_acc = evaluate(e.policy, rd.ego_heldout, vocab, mode, base.train.max_len).accuracy;
        e.exo_acc = evaluate_exo(e.policy, rd.exo_heldout, vocab).accuracy;
        if (log)
            *log << "[sft] seed=" << seed << " mode=" << static_cast<int>(mode)
                 << " format_rate=" << sr.format_rate << " ego=" << e.ego_acc
                 << " exo=" << e.exo_acc << "\n";
        return sft.emplace(key, std::move(e)).first->second;
    };

    AblationTable table;
    for (const std::string& id : variant_ids) {
        Config vcfg = base;
        apply_variant(vcfg, id);
        vcfg.validate();

        VariantOutcome row;
        row.id = id;
        for (uint64_t seed : seeds) {
            const RunData& rd = run_data_for(seed);
            const SftEntry& s = sft_for(seed, vcfg.train.format_mode);
            row.seeds.push_back(seed);
            row.sft_ego_acc.push_back(s.ego_acc);
            row.sft_exo_acc.push_back(s.exo_acc);

            PolicyParams p = s.policy;
            train_grpo(p, s.reference, rd.ego_train, rd.exo_train, vcfg.train, vocab,
                       Rng::mix(seed, 0x677270ull), nullptr);

            const EvalReport ego = evaluate(p, rd.ego_heldout, vocab, vcfg.train.format_mode,
                                            vcfg.train.max_len);
            const EvalReport exo = evaluate_exo(p, rd.exo_heldout, vocab);
            row.ego_acc.push_back(ego.accuracy);
            row.exo_acc.push_back(exo.accuracy);
            row.ego_outcomes.insert(row.ego_outcomes.end(), ego.outcomes.begin(),
                                    ego.outcomes.end());
            row.exo_outcomes.insert(row.exo_outcomes.end(), exo.outcomes.begin(),
                                    exo.outcomes.end());
            row.policies.push_back(std::move(p));
            if (log)
                *log << "[ablate] variant=" << id << " seed=" << seed
                     << " ego=" << ego.accuracy << " exo=" << exo.accuracy << "\n";
        }
        table.rows.push_back(std::move(row));
    }
    for (const VariantOutcome& row : table.rows)
        table.ego_vs_first.push_back(bootstrap_ci(table.rows[0].ego_outcomes,
                                                  row.ego_outcomes, 10000, 0.95, 0xab1a7eull));
    return table;
}

std::string ablation_table_text(const AblationTable& table) {
    char buf[160];
    std::string out;
    std::snprintf(buf, sizeof(buf), "%-18s %8s %8s %9s %9s %9s\n", "variant", "ego_acc",
                  "exo_acc", "d_ego", "ci_lo", "ci_hi");
    out += buf;
    for (size_t i = 0; i < table.rows.size(); ++i) {
        const VariantOutcome& r = table.rows[i];
        const BootstrapCi& ci = table.ego_vs_first[i];
        std::snprintf(buf, sizeof(buf), "%-18s %8.4f %8.4f %+9.4f %+9.4f %+9.4f\n",
                      r.id.c_str(), mean_of(r.ego_outcomes), mean_of(r.exo_outcomes), ci.delta,
                      ci.lower, ci.upper);
        out += buf;
    }
    return out;
}

}  // namespace egolab

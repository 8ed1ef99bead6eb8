// Acceptance gate, part 2: the training-scale criteria. Runs the ablation
// matrix (shared SFT per seed, 500 RL steps per variant) on five seeds and
// checks the directional claims on the shared held-out suites. Prints one
// verdict line per criterion; exits nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>
#include <vector>

#include "egolab/eval.hpp"

using namespace egolab;

namespace {

int failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void verdict(int id, bool ok, const std::string& what, double secs) {
    std::printf("criterion %2d: %s  (%.0fs)  %s\n", id, ok ? "PASS" : "FAIL", secs,
                what.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

const Vocabulary& vocab() {
    static const Vocabulary v;
    return v;
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0
                     : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

const VariantOutcome& row(const AblationTable& t, const std::string& id) {
    for (const auto& r : t.rows)
        if (r.id == id) return r;
    throw std::runtime_error("missing variant row: " + id);
}

}  // namespace

int main() {
    const auto t_all = std::chrono::steady_clock::now();
    Config base;  // shipped defaults: 500 RL steps, 1000 held-out episodes
    const std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
    const std::vector<std::string> variants = {"full",       "format_answer",
                                              "acmg_only",  "confidence_only",
                                              "no_exo_reg", "n4",
                                              "n32"};

    AblationTable table = run_ablation(base, variants, seeds, vocab(), &std::cerr);
    std::printf("%s", ablation_table_text(table).c_str());
    std::fflush(stdout);

    const VariantOutcome& full = row(table, "full");
    const VariantOutcome& fmt_ans = row(table, "format_answer");
    const VariantOutcome& acmg = row(table, "acmg_only");
    const VariantOutcome& conf = row(table, "confidence_only");
    const VariantOutcome& noreg = row(table, "no_exo_reg");
    const VariantOutcome& n4 = row(table, "n4");
    const VariantOutcome& n32 = row(table, "n32");
    const double t_train = seconds_since(t_all);

    // 7: composite beats format+answer with CI excluding zero; the single-
    // dense-reward variants land between the two on the pooled ego suite.
    {
        const BootstrapCi ci =
            bootstrap_ci(fmt_ans.ego_outcomes, full.ego_outcomes, 10000, 0.95, 7);
        const double lo = mean_of(fmt_ans.ego_outcomes), hi = mean_of(full.ego_outcomes);
        const double am = mean_of(acmg.ego_outcomes), cm = mean_of(conf.ego_outcomes);
        const bool separated = ci.lower > 0.0;
        const bool between = lo <= am && am <= hi && lo <= cm && cm <= hi;
        std::ostringstream what;
        what << "full=" << hi << " vs format_answer=" << lo << " delta=" << ci.delta
             << " ci=[" << ci.lower << "," << ci.upper << "]; acmg_only=" << am
             << " confidence_only=" << cm;
        verdict(7, separated && between, what.str(), t_train);
    }

    // 8: seed-averaged mean argmax offset per clause position is nondecreasing
    // with Spearman(position, offset) >= 0.8, over >= 200 held-out episodes.
    {
        const auto t0 = std::chrono::steady_clock::now();
        const int episodes = 200;
        // per position: per-seed mean offsets, then the seed average
        std::vector<std::vector<double>> seed_means;
        for (size_t s = 0; s < seeds.size(); ++s) {
            const RunData rd = make_run_data(base, seeds[s]);
            std::vector<double> sums, counts;
            for (int i = 0; i < episodes; ++i) {
                const HeatmapRecord rec =
                    grounding_heatmap(full.policies[s], rd.ego_heldout[static_cast<size_t>(i)],
                                      vocab(), base.train.window_n, base.train.format_mode,
                                      base.train.max_len);
                if (!rec.ok) continue;
                for (size_t k = 0; k < rec.argmax.size(); ++k) {
                    if (sums.size() <= k) {
                        sums.resize(k + 1, 0.0);
                        counts.resize(k + 1, 0.0);
                    }
                    sums[k] += static_cast<double>(rec.argmax[k]);
                    counts[k] += 1.0;
                }
            }
            std::vector<double> means;
            for (size_t k = 0; k < sums.size(); ++k)
                if (counts[k] > 0) means.push_back(sums[k] / counts[k]);
            seed_means.push_back(std::move(means));
        }
        size_t positions = seed_means[0].size();
        for (const auto& m : seed_means) positions = std::min(positions, m.size());
        std::vector<double> avg(positions, 0.0), pos(positions);
        for (size_t k = 0; k < positions; ++k) {
            pos[k] = static_cast<double>(k + 1);
            for (const auto& m : seed_means) avg[k] += m[k] / static_cast<double>(seeds.size());
        }
        bool nondecreasing = positions >= 2;
        for (size_t k = 0; k + 1 < positions; ++k)
            if (avg[k + 1] < avg[k]) nondecreasing = false;
        const auto rho = positions >= 2 ? spearman(pos, avg) : std::nullopt;
        std::ostringstream what;
        what << "mean argmax offsets by clause position:";
        for (double v : avg) what << " " << v;
        what << "; spearman=" << (rho ? *rho : std::nan(""));
        verdict(8, nondecreasing && rho && *rho >= 0.8, what.str(), seconds_since(t0));
    }

    // 9: dropping the exocentric updates degrades the exo suite relative to
    // its SFT value; keeping them recovers it with CI excluding zero.
    {
        const double sft_exo = mean_of(noreg.sft_exo_acc);
        const double drop = mean_of(noreg.exo_outcomes);
        const BootstrapCi ci =
            bootstrap_ci(noreg.exo_outcomes, full.exo_outcomes, 10000, 0.95, 9);
        const bool degraded = drop < sft_exo;
        const bool recovered = ci.lower > 0.0;
        std::ostringstream what;
        what << "exo accuracy: sft=" << sft_exo << " no_reg=" << drop
             << " with_reg=" << mean_of(full.exo_outcomes) << " delta=" << ci.delta
             << " ci=[" << ci.lower << "," << ci.upper << "]";
        verdict(9, degraded && recovered, what.str(), t_train);
    }

    // 10: N=16 (the default window) beats N=4 with CI excluding zero; the
    // N=16 vs N=32 ordering is reported without a CI requirement.
    {
        const BootstrapCi ci = bootstrap_ci(n4.ego_outcomes, full.ego_outcomes, 10000, 0.95, 10);
        std::ostringstream what;
        what << "ego accuracy: n4=" << mean_of(n4.ego_outcomes)
             << " n16=" << mean_of(full.ego_outcomes) << " n32=" << mean_of(n32.ego_outcomes)
             << " (n16-n4) ci=[" << ci.lower << "," << ci.upper << "]";
        verdict(10, ci.lower > 0.0, what.str(), t_train);
    }

    std::printf("total runtime %.0fs\n", seconds_since(t_all));
    if (failures) std::printf("%d criterion(s) FAILED\n", failures);
    else std::printf("all training criteria passed\n");
    return failures ? 1 : 0;
}

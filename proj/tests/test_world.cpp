#include <cmath>
#include <set>

#include "doctest.h"
#include "egolab/graph.hpp"
#include "egolab/trace.hpp"
#include "egolab/world.hpp"

using namespace egolab;

namespace {
const Vocabulary& vocab() {
    static const Vocabulary v;
    return v;
}

bool same_frames(const std::vector<Array>& a, const std::vector<Array>& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].v != b[i].v) return false;
    return true;
}
}  // namespace

TEST_CASE("episode determinism") {
    WorldSpec spec;
    for (uint64_t seed : {1ull, 7ull, 919ull}) {
        auto a = generate_episode(seed, spec);
        auto b = generate_episode(seed, spec);
        CHECK(a.gold_plan == b.gold_plan);
        CHECK(a.query == b.query);
        CHECK(a.gold_answer == b.gold_answer);
        CHECK(same_frames(a.future_frames, b.future_frames));
        CHECK(same_frames(a.context_frames, b.context_frames));
    }
}

TEST_CASE("sigma zero frames equal step latents") {
    WorldSpec spec;
    spec.sigma_frame = 0.0;
    auto ep = generate_episode(42, spec);
    const int K = static_cast<int>(ep.stage_labels.size());
    // clause i's first frame must equal its step latent exactly
    for (int i = 0; i < K; ++i) {
        const int n = ep.gold_alignment[static_cast<size_t>(i)];
        const Array& frame = ep.future_frames[static_cast<size_t>(n - 1)];
        const int act = ep.gold_plan[static_cast<size_t>(3 * i + 1)];
        const int obj = ep.gold_plan[static_cast<size_t>(3 * i + 2)];
        Array lat = step_latent(act, obj, spec.d_lat);
        CHECK(frame.v == lat.v);
    }
}

TEST_CASE("gold alignment schedule") {
    WorldSpec spec;
    spec.k_min = 5;
    spec.k_max = 5;
    spec.frames_per_step_min = 4;
    spec.frames_per_step_max = 4;
    auto ep = generate_episode(3, spec);
    REQUIRE(ep.gold_alignment.size() == 5);
    CHECK(ep.gold_alignment == std::vector<int>{1, 5, 9, 13, 17});
}

TEST_CASE("nearest neighbor recovers alignment at sigma zero") {
    WorldSpec spec;
    spec.sigma_frame = 0.0;
    int checked = 0;
    for (uint64_t seed = 0; seed < 50; ++seed) {
        auto ep = generate_episode(seed, spec);
        const int K = static_cast<int>(ep.stage_labels.size());
        for (int i = 0; i < K; ++i) {
            const int act = ep.gold_plan[static_cast<size_t>(3 * i + 1)];
            const int obj = ep.gold_plan[static_cast<size_t>(3 * i + 2)];
            Array lat = step_latent(act, obj, spec.d_lat);
            // brute-force nearest frame by Euclidean distance
            int best = -1;
            double best_d = 1e300;
            for (size_t n = 0; n < ep.future_frames.size(); ++n) {
                double d2 = 0;
                for (int j = 0; j < spec.d_lat; ++j) {
                    const double d = ep.future_frames[n].at(j) - lat.at(j);
                    d2 += d * d;
                }
                if (d2 < best_d) {
                    best_d = d2;
                    best = static_cast<int>(n) + 1;
                }
            }
            // the matched frame must lie inside clause i's own step window
            const int lo = ep.gold_alignment[static_cast<size_t>(i)];
            const int hi = (i + 1 < K) ? ep.gold_alignment[static_cast<size_t>(i + 1)] - 1
                                       : static_cast<int>(ep.future_frames.size());
            CHECK(best >= lo);
            CHECK(best <= hi);
            ++checked;
        }
    }
    CHECK(checked > 100);
}

TEST_CASE("distractor soundness and stage monotonicity") {
    WorldSpec spec;
    for (uint64_t seed = 0; seed < 200; ++seed) {
        auto ep = generate_episode(seed, spec);
        const auto& gold = ep.options[static_cast<size_t>(ep.gold_answer)];
        int matches = 0;
        for (const auto& opt : ep.options)
            if (opt == gold) ++matches;
        CHECK(matches == 1);
        for (int i = 0; i < static_cast<int>(ep.options.size()); ++i) {
            if (i == ep.gold_answer) continue;
            CHECK(ep.options[static_cast<size_t>(i)] != gold);
        }
        for (size_t i = 1; i < ep.stage_labels.size(); ++i)
            CHECK(ep.stage_labels[i] >= ep.stage_labels[i - 1]);
        // alignment strictly increasing, in range
        for (size_t i = 0; i < ep.gold_alignment.size(); ++i) {
            CHECK(ep.gold_alignment[i] >= 1);
            CHECK(ep.gold_alignment[i] <= spec.n_max_future);
            if (i) CHECK(ep.gold_alignment[i] > ep.gold_alignment[i - 1]);
        }
    }
}

TEST_CASE("teacher output cites answer and parses in context") {
    WorldSpec spec;
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        auto ep = generate_episode(seed, spec);
        bool has_letter = false;
        for (int t : ep.teacher_verify)
            if (t == vocab().letter(ep.gold_answer)) has_letter = true;
        CHECK(has_letter);
        auto full = gold_trajectory(ep, vocab());
        auto r = parse_trajectory(full, vocab());
        CHECK(r.ok());
        CHECK(format_reward(full, vocab()) == 1.0);
    }
    // identical gold plans -> identical teacher outputs
    auto a = generate_episode(5, spec);
    auto b = generate_episode(5, spec);
    CHECK(a.teacher_verify == b.teacher_verify);
}

TEST_CASE("exo task determinism and pooling") {
    WorldSpec spec;
    spec.exo_frames = 2;
    auto a = generate_exo_task(11, spec);
    auto b = generate_exo_task(11, spec);
    CHECK(a.question == b.question);
    CHECK(a.pooled.v == b.pooled.v);
    // pooled equals the hand-average of the two frames
    for (int j = 0; j < spec.d_lat; ++j)
        CHECK(a.pooled.at(j) ==
              doctest::Approx(0.5 * (a.frames[0].at(j) + a.frames[1].at(j))).epsilon(1e-15));
    // exactly one gold option
    CHECK(a.gold_answer >= 0);
    CHECK(a.gold_answer < spec.option_count);
}

TEST_CASE("distractor trajectory follows the chosen option consistently") {
    WorldSpec spec;
    auto ep = generate_episode(21, spec);
    const Vocabulary& v = vocab();
    int opt = ep.gold_answer == 0 ? 1 : 0;
    auto t = distractor_trajectory(ep, opt, v);
    auto pr = parse_trajectory(t, v);
    REQUIRE(pr.ok());
    // answer and verify letters name the distractor option
    CHECK(pr.trajectory->answer_token == v.letter(opt));
    int letters = 0;
    for (int i = pr.trajectory->verify_begin; i < pr.trajectory->verify_end; ++i)
        if (v.is_letter(t[static_cast<size_t>(i)])) {
            CHECK(t[static_cast<size_t>(i)] == v.letter(opt));
            ++letters;
        }
    CHECK(letters >= 1);
    // plan body re-renders the option digest with step markers
    const auto& digest = ep.options[static_cast<size_t>(opt)];
    std::vector<int> body(t.begin() + pr.trajectory->plan_begin,
                          t.begin() + pr.trajectory->plan_end);
    REQUIRE(body.size() == digest.size() + digest.size() / 2);
    for (size_t i = 0; i + 1 < digest.size(); i += 2) {
        CHECK(body[3 * (i / 2)] == v.step_marker(static_cast<int>(i / 2) + 1));
        CHECK(body[3 * (i / 2) + 1] == digest[i]);
        CHECK(body[3 * (i / 2) + 2] == digest[i + 1]);
    }
    CHECK_THROWS(distractor_trajectory(ep, ep.gold_answer, v));
}

TEST_CASE("frame encoder") {
    FrameEncoderParams enc;
    enc.w = Array::zeros(8, 4);
    enc.b = Array::zeros(8);
    Array zero = Array::zeros(4);
    auto v = encode_frame(zero, enc);
    for (double x : v.v) CHECK(x == 0.0);
    CHECK(v.size() == 8);

    // identity-slice encoder reproduces gelu of the latent
    for (int i = 0; i < 4; ++i) enc.w.at(i, i) = 1.0;
    Array f = Array::vec({0.5, -1.0, 2.0, 0.0});
    auto e = encode_frame(f, enc);
    CHECK(e.at(0) == doctest::Approx(gelu_scalar(0.5)));
    CHECK(e.at(1) == doctest::Approx(gelu_scalar(-1.0)));
    CHECK(e.at(2) == doctest::Approx(gelu_scalar(2.0)));

    Array bad = Array::zeros(5);
    CHECK_THROWS(encode_frame(bad, enc));
}

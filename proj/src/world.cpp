#include "egolab/world.hpp"

#include <algorithm>
#include <stdexcept>

#include "egolab/graph.hpp"
#include "egolab/rng.hpp"
#include "egolab/trace.hpp"

namespace egolab {

namespace {

const Vocabulary& vocab() {
    static const Vocabulary v;
    return v;
}

// Stream salts keep episode, exo, and latent-embedding streams independent.
constexpr uint64_t kEpisodeStream = 0x45504953;
constexpr uint64_t kExoStream = 0x45584f54;
constexpr uint64_t kPairLatentStream = 0x504c4154;
constexpr uint64_t kObjLatentStream = 0x4f4c4154;

Array latent_from(uint64_t key, int d_lat) {
    Rng rng(key);
    Array a = Array::zeros(d_lat);
    const double s = 1.0 / std::sqrt(static_cast<double>(d_lat));
    for (double& v : a.v) v = s * rng.gaussian();
    return a;
}

Array noisy(const Array& base, double sigma, Rng& rng) {
    Array f = base;
    for (double& v : f.v) v += sigma * rng.gaussian();
    return f;
}

}  // namespace

void WorldSpec::validate() const {
    if (d_lat < 1) throw std::invalid_argument("WorldSpec: d_lat < 1");
    if (sigma_frame < 0) throw std::invalid_argument("WorldSpec: sigma_frame < 0");
    if (k_min < 1 || k_max < k_min) throw std::invalid_argument("WorldSpec: bad plan length range");
    if (k_max > Vocabulary::kNumCategories)
        throw std::invalid_argument("WorldSpec: k_max exceeds stage categories");
    if (frames_per_step_min < 1 || frames_per_step_max < frames_per_step_min)
        throw std::invalid_argument("WorldSpec: bad frames-per-step range");
    if (k_max * frames_per_step_max > n_max_future)
        throw std::invalid_argument("WorldSpec: n_max_future too small for plan schedule");
    if (option_count < 2 || option_count > Vocabulary::kNumLetters)
        throw std::invalid_argument("WorldSpec: option_count out of range");
    if (context_frames < 1) throw std::invalid_argument("WorldSpec: context_frames < 1");
    if (exo_frames < 1 || exo_frames + option_count - 1 > Vocabulary::kNumObjects)
        throw std::invalid_argument("WorldSpec: exo_frames out of range");
}

Array step_latent(int action_token, int object_token, int d_lat) {
    const uint64_t key = Rng::mix(kPairLatentStream,
                                  (static_cast<uint64_t>(action_token) << 20) |
                                      static_cast<uint64_t>(object_token));
    return latent_from(key, d_lat);
}

Array object_latent(int object_index, int d_lat) {
    return latent_from(Rng::mix(kObjLatentStream, static_cast<uint64_t>(object_index)), d_lat);
}

EpisodeSample generate_episode(uint64_t seed, const WorldSpec& spec) {
    spec.validate();
    const Vocabulary& v = vocab();
    Rng rng(Rng::mix(seed, kEpisodeStream));

    EpisodeSample ep;
    ep.id = seed;

    // Latent procedure: K stages drawn in category order with optional skips.
    const int K = spec.k_min + rng.uniform_int(spec.k_max - spec.k_min + 1);
    std::vector<int> cats(Vocabulary::kNumCategories);
    for (int i = 0; i < Vocabulary::kNumCategories; ++i) cats[static_cast<size_t>(i)] = i;
    for (int i = Vocabulary::kNumCategories - 1; i > 0; --i) {
        const int j = rng.uniform_int(i + 1);
        std::swap(cats[static_cast<size_t>(i)], cats[static_cast<size_t>(j)]);
    }
    cats.resize(static_cast<size_t>(K));
    std::sort(cats.begin(), cats.end());

    std::vector<int> actions, objects;
    for (int i = 0; i < K; ++i) {
        ep.stage_labels.push_back(cats[static_cast<size_t>(i)]);
        actions.push_back(v.action(cats[static_cast<size_t>(i)],
                                   rng.uniform_int(Vocabulary::kActionsPerCategory)));
        objects.push_back(v.object(rng.uniform_int(Vocabulary::kNumObjects)));
    }

    const int fps = spec.frames_per_step_min +
                    rng.uniform_int(spec.frames_per_step_max - spec.frames_per_step_min + 1);
    for (int i = 0; i < K; ++i) ep.gold_alignment.push_back(1 + i * fps);

    // Future frames: step latents plus noise; the final stage persists.
    for (int n = 1; n <= spec.n_max_future; ++n) {
        const int s = std::min(K - 1, (n - 1) / fps);
        ep.future_frames.push_back(noisy(
            step_latent(actions[static_cast<size_t>(s)], objects[static_cast<size_t>(s)],
                        spec.d_lat),
            spec.sigma_frame, rng));
    }

    // Context frames preview the procedure, one step per position.
    for (int j = 0; j < spec.context_frames; ++j) {
        if (j < K) {
            ep.context_frames.push_back(noisy(
                step_latent(actions[static_cast<size_t>(j)], objects[static_cast<size_t>(j)],
                            spec.d_lat),
                spec.sigma_frame, rng));
        } else {
            ep.context_frames.push_back(noisy(Array::zeros(spec.d_lat), spec.sigma_frame, rng));
        }
    }

    // Gold plan body: "1. action object 2. ..."
    for (int i = 0; i < K; ++i) {
        ep.gold_plan.push_back(v.step_marker(i + 1));
        ep.gold_plan.push_back(actions[static_cast<size_t>(i)]);
        ep.gold_plan.push_back(objects[static_cast<size_t>(i)]);
    }

    // Options: gold digest plus three distractor recipes.
    std::vector<int> gold_digest;
    for (int i = 0; i < K; ++i) {
        gold_digest.push_back(actions[static_cast<size_t>(i)]);
        gold_digest.push_back(objects[static_cast<size_t>(i)]);
    }
    std::vector<std::vector<int>> distractors;
    {
        std::vector<int> d = gold_digest;
        if (K >= 2) {
            // wrong order: swap an adjacent step pair
            const int u = rng.uniform_int(K - 1);
            std::swap(d[static_cast<size_t>(2 * u)], d[static_cast<size_t>(2 * u + 2)]);
            std::swap(d[static_cast<size_t>(2 * u + 1)], d[static_cast<size_t>(2 * u + 3)]);
        } else {
            // degenerate single-step plan: substitute a sibling action
            const int cat = ep.stage_labels[0];
            int other = d[0];
            while (other == d[0])
                other = v.action(cat, rng.uniform_int(Vocabulary::kActionsPerCategory));
            d[0] = other;
        }
        distractors.push_back(std::move(d));
    }
    {
        std::vector<int> d = gold_digest;
        if (K >= 2) {
            // missing step
            const int u = rng.uniform_int(K);
            d.erase(d.begin() + 2 * u, d.begin() + 2 * u + 2);
        } else {
            int other = d[1];
            while (other == d[1]) other = v.object(rng.uniform_int(Vocabulary::kNumObjects));
            d[1] = other;
        }
        distractors.push_back(std::move(d));
    }
    {
        // wrong object in one step
        std::vector<int> d = gold_digest;
        const int u = rng.uniform_int(K);
        int other = objects[static_cast<size_t>(u)];
        while (other == objects[static_cast<size_t>(u)])
            other = v.object(rng.uniform_int(Vocabulary::kNumObjects));
        d[static_cast<size_t>(2 * u + 1)] = other;
        distractors.push_back(std::move(d));
    }
    while (static_cast<int>(distractors.size()) > spec.option_count - 1) distractors.pop_back();

    ep.gold_answer = rng.uniform_int(spec.option_count);
    ep.options.resize(static_cast<size_t>(spec.option_count));
    size_t di = 0;
    for (int i = 0; i < spec.option_count; ++i) {
        if (i == ep.gold_answer)
            ep.options[static_cast<size_t>(i)] = gold_digest;
        else
            ep.options[static_cast<size_t>(i)] = distractors[di++];
    }

    ep.query.push_back(v.query_ego());
    for (int i = 0; i < spec.option_count; ++i) {
        ep.query.push_back(v.letter(i));
        for (int t : ep.options[static_cast<size_t>(i)]) ep.query.push_back(t);
    }

    ep.teacher_verify = scripted_teacher(ep, v);
    return ep;
}

std::vector<int> scripted_teacher(const EpisodeSample& episode, const Vocabulary& v) {
    std::vector<int> out;
    out.push_back(v.word_sequence());
    for (int cat : episode.stage_labels) out.push_back(v.category(cat));
    out.push_back(v.letter(episode.gold_answer));
    out.push_back(v.word_consistent());
    return out;
}

ExoSample generate_exo_task(uint64_t seed, const WorldSpec& spec) {
    spec.validate();
    const Vocabulary& v = vocab();
    Rng rng(Rng::mix(seed, kExoStream));

    ExoSample ex;
    ex.id = seed;

    // Distinct objects: the first exo_frames are present, the rest feed
    // distractor options.
    std::vector<int> objs(Vocabulary::kNumObjects);
    for (int i = 0; i < Vocabulary::kNumObjects; ++i) objs[static_cast<size_t>(i)] = i;
    for (int i = Vocabulary::kNumObjects - 1; i > 0; --i) {
        const int j = rng.uniform_int(i + 1);
        std::swap(objs[static_cast<size_t>(i)], objs[static_cast<size_t>(j)]);
    }

    for (int i = 0; i < spec.exo_frames; ++i)
        ex.frames.push_back(noisy(object_latent(objs[static_cast<size_t>(i)], spec.d_lat),
                                  spec.sigma_frame, rng));

    ex.pooled = Array::zeros(spec.d_lat);
    for (const Array& f : ex.frames)
        for (int j = 0; j < spec.d_lat; ++j) ex.pooled.at(j) += f.at(j);
    for (double& x : ex.pooled.v) x /= static_cast<double>(spec.exo_frames);

    const int present = objs[static_cast<size_t>(rng.uniform_int(spec.exo_frames))];
    ex.gold_answer = rng.uniform_int(spec.option_count);
    ex.question.push_back(v.query_exo());
    size_t absent_at = static_cast<size_t>(spec.exo_frames);  // distractor cursor
    for (int i = 0; i < spec.option_count; ++i) {
        ex.question.push_back(v.letter(i));
        if (i == ex.gold_answer)
            ex.question.push_back(v.object(present));
        else
            ex.question.push_back(v.object(objs[absent_at++]));
    }
    return ex;
}

int exo_gold_object(const ExoSample& ex) {
    // question layout: [query, letter0, obj0, letter1, obj1, ...]
    return ex.question.at(static_cast<size_t>(2 * ex.gold_answer + 2));
}

std::vector<Array> encode_frames(const std::vector<Array>& frames,
                                 const FrameEncoderParams& enc) {
    std::vector<Array> out;
    out.reserve(frames.size());
    for (const Array& f : frames) out.push_back(encode_frame(f, enc));
    return out;
}

Array encode_frame(const Array& frame, const FrameEncoderParams& enc) {
    const int d_vis = enc.w.rows();
    const int d_lat = enc.w.cols();
    if (static_cast<int>(frame.size()) != d_lat)
        throw std::invalid_argument("encode_frame: latent dimension mismatch");
    Array out = Array::zeros(d_vis);
    for (int i = 0; i < d_vis; ++i) {
        const double z = dot(&enc.w.v[static_cast<size_t>(i) * d_lat], frame.v.data(), d_lat) +
                         enc.b.at(i);
        out.at(i) = gelu_scalar(z);
    }
    out.check_finite("encode_frame");
    return out;
}

double answer_reward(int predicted_letter_index, int gold_letter_index) {
    return predicted_letter_index == gold_letter_index ? 1.0 : 0.0;
}

std::vector<int> gold_trajectory(const EpisodeSample& episode, const Vocabulary& v,
                                 FormatMode mode) {
    std::vector<int> t;
    if (mode != FormatMode::kNoPlan) {
        t.push_back(Vocabulary::kOpenPlan);
        for (int x : episode.gold_plan) t.push_back(x);
        t.push_back(Vocabulary::kClosePlan);
    }
    if (mode != FormatMode::kNoVerify) {
        t.push_back(Vocabulary::kOpenVerify);
        for (int x : episode.teacher_verify) t.push_back(x);
        t.push_back(Vocabulary::kCloseVerify);
    }
    t.push_back(Vocabulary::kOpenAnswer);
    t.push_back(v.letter(episode.gold_answer));
    t.push_back(Vocabulary::kCloseAnswer);
    return t;
}

std::vector<int> distractor_trajectory(const EpisodeSample& episode, int option_index,
                                       const Vocabulary& v, FormatMode mode) {
    if (option_index < 0 || option_index >= static_cast<int>(episode.options.size()) ||
        option_index == episode.gold_answer)
        throw std::invalid_argument("distractor_trajectory: bad option index");
    const std::vector<int>& digest = episode.options[static_cast<size_t>(option_index)];
    std::vector<int> t;
    if (mode != FormatMode::kNoPlan) {
        t.push_back(Vocabulary::kOpenPlan);
        for (size_t i = 0; i + 1 < digest.size(); i += 2) {
            t.push_back(v.step_marker(static_cast<int>(i / 2) + 1));
            t.push_back(digest[i]);
            t.push_back(digest[i + 1]);
        }
        t.push_back(Vocabulary::kClosePlan);
    }
    if (mode != FormatMode::kNoVerify) {
        t.push_back(Vocabulary::kOpenVerify);
        for (int x : episode.teacher_verify)
            t.push_back(v.is_letter(x) ? v.letter(option_index) : x);
        t.push_back(Vocabulary::kCloseVerify);
    }
    t.push_back(Vocabulary::kOpenAnswer);
    t.push_back(v.letter(option_index));
    t.push_back(Vocabulary::kCloseAnswer);
    return t;
}

}  // namespace egolab

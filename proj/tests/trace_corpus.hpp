#pragma once

// Shared between the trace unit tests and the acceptance suite: a mutated
// trajectory corpus plus an independent regular-expression oracle for the
// binary format reward.

#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "egolab/rng.hpp"
#include "egolab/trace.hpp"
#include "egolab/vocab.hpp"

namespace egolab_test {

inline std::vector<int> make_wellformed(egolab::Rng& rng, const egolab::Vocabulary& vocab) {
    std::vector<int> t;
    t.push_back(egolab::Vocabulary::kOpenPlan);
    const int n_clauses = 1 + rng.uniform_int(4);
    for (int i = 0; i < n_clauses; ++i) {
        t.push_back(vocab.step_marker(i + 1));
        t.push_back(vocab.action(rng.uniform_int(5), rng.uniform_int(3)));
        t.push_back(vocab.object(rng.uniform_int(egolab::Vocabulary::kNumObjects)));
    }
    t.push_back(egolab::Vocabulary::kClosePlan);
    t.push_back(egolab::Vocabulary::kOpenVerify);
    t.push_back(vocab.word_sequence());
    for (int i = 0; i < n_clauses; ++i) t.push_back(vocab.category(rng.uniform_int(5)));
    t.push_back(vocab.word_consistent());
    t.push_back(egolab::Vocabulary::kCloseVerify);
    t.push_back(egolab::Vocabulary::kOpenAnswer);
    t.push_back(vocab.letter(rng.uniform_int(4)));
    t.push_back(egolab::Vocabulary::kCloseAnswer);
    return t;
}

// Random tag deletions, swaps, inserts, truncations; some samples untouched.
inline std::vector<int> mutate(std::vector<int> t, egolab::Rng& rng,
                               const egolab::Vocabulary& vocab) {
    const int kind = rng.uniform_int(8);
    const int n = static_cast<int>(t.size());
    switch (kind) {
        case 0:
            return t;  // keep well-formed
        case 1:        // delete a random token
            t.erase(t.begin() + rng.uniform_int(n));
            return t;
        case 2: {  // swap two tokens
            const int a = rng.uniform_int(n), b = rng.uniform_int(n);
            std::swap(t[static_cast<size_t>(a)], t[static_cast<size_t>(b)]);
            return t;
        }
        case 3:  // insert a random vocabulary token
            t.insert(t.begin() + rng.uniform_int(n + 1),
                     rng.uniform_int(vocab.size()));
            return t;
        case 4:  // truncate
            t.resize(static_cast<size_t>(1 + rng.uniform_int(n - 1)));
            return t;
        case 5:  // duplicate a tag somewhere
            t.insert(t.begin() + rng.uniform_int(n + 1),
                     rng.uniform_int(6));
            return t;
        case 6: {  // strip all clause markers (zero-clause probe)
            std::vector<int> out;
            for (int x : t)
                if (!vocab.is_step_marker(x)) out.push_back(x);
            return out;
        }
        case 7:
        default:  // append trailing tokens
            t.push_back(rng.uniform_int(vocab.size()));
            return t;
    }
}

// Independent oracle over the rendered text form. Structure via regex, then
// the two non-regex rules: >= 1 clause with content, single A-D answer.
inline bool regex_format_oracle(const std::vector<int>& tokens,
                                const egolab::Vocabulary& vocab) {
    std::string text;
    try {
        text = vocab.render(tokens);
    } catch (...) {
        return false;
    }
    static const std::regex whole(
        R"(^<ego_plan> ([^<]+) </ego_plan> <exo_verify> ([^<]+) </exo_verify> <answer> ([^<]+) </answer>$)");
    std::smatch m;
    if (!std::regex_match(text, m, whole)) return false;

    static const std::regex letter(R"(^[A-D]$)");
    if (!std::regex_match(m[3].str(), letter)) return false;

    // Plan must contain at least one word that is not a step marker.
    static const std::regex marker(R"(^[0-9]+\.$)");
    std::istringstream plan(m[1].str());
    std::string w;
    bool has_content = false;
    while (plan >> w) {
        if (!std::regex_match(w, marker)) has_content = true;
    }
    return has_content;
}

}  // namespace egolab_test

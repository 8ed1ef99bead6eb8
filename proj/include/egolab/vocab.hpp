#pragma once

#include <string>
#include <vector>

namespace egolab {

// Token-level synthetic vocabulary. Tags are single reserved ids, so format
// detection is exact. Ids are fixed at construction and stable across runs.
class Vocabulary {
public:
    static constexpr int kOpenPlan = 0;
    static constexpr int kClosePlan = 1;
    static constexpr int kOpenVerify = 2;
    static constexpr int kCloseVerify = 3;
    static constexpr int kOpenAnswer = 4;
    static constexpr int kCloseAnswer = 5;

    static constexpr int kNumStepMarkers = 8;   // "1." .. "8."
    static constexpr int kNumLetters = 4;       // A..D
    static constexpr int kNumCategories = 5;    // stage names
    static constexpr int kActionsPerCategory = 3;
    static constexpr int kNumObjects = 12;

    Vocabulary();

    int size() const { return static_cast<int>(names_.size()); }
    const std::string& name(int id) const { return names_[static_cast<size_t>(id)]; }
    // -1 when the text is not a token.
    int id(const std::string& name) const;

    static bool is_tag(int id) { return id >= kOpenPlan && id <= kCloseAnswer; }

    int step_marker(int step) const { return step_marker0_ + step - 1; }  // 1-based
    bool is_step_marker(int id) const {
        return id >= step_marker0_ && id < step_marker0_ + kNumStepMarkers;
    }

    int letter(int index) const { return letter0_ + index; }  // 0 -> A
    bool is_letter(int id) const { return id >= letter0_ && id < letter0_ + kNumLetters; }
    int letter_index(int id) const { return id - letter0_; }

    int category(int c) const { return category0_ + c; }  // 0 -> move stage
    int action(int category, int k) const {
        return action0_ + category * kActionsPerCategory + k;
    }
    bool is_action(int id) const {
        return id >= action0_ && id < action0_ + kNumCategories * kActionsPerCategory;
    }
    int action_category(int id) const { return (id - action0_) / kActionsPerCategory; }

    int object(int k) const { return object0_ + k; }
    bool is_object(int id) const { return id >= object0_ && id < object0_ + kNumObjects; }

    int query_ego() const { return query_ego_; }
    int query_exo() const { return query_exo_; }
    int word_consistent() const { return word_consistent_; }
    int word_sequence() const { return word_sequence_; }

    // Rendered-text dump helpers: one trajectory per line, tokens separated
    // by single spaces, tags spelled out in full.
    std::string render(const std::vector<int>& tokens) const;
    // Throws std::invalid_argument on unknown words.
    std::vector<int> lex(const std::string& line) const;

private:
    std::vector<std::string> names_;
    int step_marker0_ = 0, letter0_ = 0, category0_ = 0, action0_ = 0, object0_ = 0;
    int query_ego_ = 0, query_exo_ = 0, word_consistent_ = 0, word_sequence_ = 0;
};

}  // namespace egolab

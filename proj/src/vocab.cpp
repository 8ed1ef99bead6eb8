#include "egolab/vocab.hpp"

#include <sstream>
#include <stdexcept>

namespace egolab {

namespace {
const char* kCategoryNames[Vocabulary::kNumCategories] = {
    "move", "locate", "action", "verify", "complete"};

const char* kActionNames[Vocabulary::kNumCategories][Vocabulary::kActionsPerCategory] = {
    {"approach", "walk_to", "enter"},
    {"find", "spot", "scan_for"},
    {"grasp", "cut", "pour"},
    {"check", "inspect", "confirm"},
    {"finish", "store", "wrap_up"},
};

const char* kObjectNames[Vocabulary::kNumObjects] = {
    "knife", "bowl", "pan",   "cup",   "bottle", "sponge",
    "towel", "plate", "spoon", "jar",   "board",  "kettle"};
}  // namespace

Vocabulary::Vocabulary() {
    names_ = {"<ego_plan>", "</ego_plan>", "<exo_verify>",
              "</exo_verify>", "<answer>", "</answer>"};

    step_marker0_ = static_cast<int>(names_.size());
    for (int i = 1; i <= kNumStepMarkers; ++i) names_.push_back(std::to_string(i) + ".");

    letter0_ = static_cast<int>(names_.size());
    for (int i = 0; i < kNumLetters; ++i) names_.push_back(std::string(1, static_cast<char>('A' + i)));

    category0_ = static_cast<int>(names_.size());
    for (int c = 0; c < kNumCategories; ++c) names_.push_back(kCategoryNames[c]);

    action0_ = static_cast<int>(names_.size());
    for (int c = 0; c < kNumCategories; ++c)
        for (int k = 0; k < kActionsPerCategory; ++k) names_.push_back(kActionNames[c][k]);

    object0_ = static_cast<int>(names_.size());
    for (int k = 0; k < kNumObjects; ++k) names_.push_back(kObjectNames[k]);

    query_ego_ = static_cast<int>(names_.size());
    names_.push_back("how_do_i");
    query_exo_ = static_cast<int>(names_.size());
    names_.push_back("which_object");
    word_consistent_ = static_cast<int>(names_.size());
    names_.push_back("consistent");
    word_sequence_ = static_cast<int>(names_.size());
    names_.push_back("sequence");
}

int Vocabulary::id(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<int>(i);
    return -1;
}

std::string Vocabulary::render(const std::vector<int>& tokens) const {
    std::ostringstream os;
    for (size_t i = 0; i < tokens.size(); ++i) {
        if (tokens[i] < 0 || tokens[i] >= size())
            throw std::out_of_range("render: token id out of range");
        if (i) os << ' ';
        os << name(tokens[i]);
    }
    return os.str();
}

std::vector<int> Vocabulary::lex(const std::string& line) const {
    std::vector<int> out;
    std::istringstream is(line);
    std::string word;
    while (is >> word) {
        const int t = id(word);
        if (t < 0) throw std::invalid_argument("lex: unknown token '" + word + "'");
        out.push_back(t);
    }
    return out;
}

}  // namespace egolab

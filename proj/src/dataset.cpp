#include "egolab/dataset.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace egolab {

namespace {
constexpr const char* kEgoSchema = "ego-episodes-v1";
constexpr const char* kExoSchema = "exo-tasks-v1";

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string frames_field(const std::vector<Array>& frames) {
    std::string out;
    for (size_t i = 0; i < frames.size(); ++i) {
        if (i) out += "/";
        for (size_t j = 0; j < frames[i].v.size(); ++j) {
            if (j) out += ",";
            out += fmt_double(frames[i].v[j]);
        }
    }
    return out;
}

std::string frame_field(const Array& a) { return frames_field({a}); }

std::vector<Array> parse_frames(const std::string& s) {
    std::vector<Array> out;
    std::istringstream fs(s);
    std::string frame;
    while (std::getline(fs, frame, '/')) {
        std::vector<double> vals;
        std::istringstream vs(frame);
        std::string tok;
        while (std::getline(vs, tok, ',')) {
            char* end = nullptr;
            vals.push_back(std::strtod(tok.c_str(), &end));
            if (end == tok.c_str()) throw std::runtime_error("dataset: bad decimal");
        }
        out.push_back(Array::vec(std::move(vals)));
    }
    return out;
}

std::string ints_field(const std::vector<int>& v) {
    std::string out;
    for (size_t i = 0; i < v.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(v[i]);
    }
    return out;
}

std::vector<int> parse_ints(const std::string& s) {
    std::vector<int> out;
    if (s.empty()) return out;
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) out.push_back(std::atoi(tok.c_str()));
    return out;
}

std::map<std::string, std::string> parse_record(const std::string& line) {
    std::map<std::string, std::string> out;
    std::istringstream is(line);
    std::string field;
    while (std::getline(is, field, ';')) {
        const size_t eq = field.find('=');
        if (eq == std::string::npos) throw std::runtime_error("dataset: field without '='");
        out[field.substr(0, eq)] = field.substr(eq + 1);
    }
    return out;
}

const std::string& need(const std::map<std::string, std::string>& rec,
                        const std::string& key) {
    auto it = rec.find(key);
    if (it == rec.end()) throw std::runtime_error("dataset: missing field " + key);
    return it->second;
}

std::string spec_line(const WorldSpec& s) {
    std::string out;
    out += "d_lat=" + std::to_string(s.d_lat);
    out += ";sigma_frame=" + fmt_double(s.sigma_frame);
    out += ";k_min=" + std::to_string(s.k_min);
    out += ";k_max=" + std::to_string(s.k_max);
    out += ";frames_per_step_min=" + std::to_string(s.frames_per_step_min);
    out += ";frames_per_step_max=" + std::to_string(s.frames_per_step_max);
    out += ";option_count=" + std::to_string(s.option_count);
    out += ";context_frames=" + std::to_string(s.context_frames);
    out += ";n_max_future=" + std::to_string(s.n_max_future);
    out += ";exo_frames=" + std::to_string(s.exo_frames);
    return out;
}

WorldSpec parse_spec_line(const std::string& line) {
    auto rec = parse_record(line);
    WorldSpec s;
    s.d_lat = std::atoi(need(rec, "d_lat").c_str());
    s.sigma_frame = std::strtod(need(rec, "sigma_frame").c_str(), nullptr);
    s.k_min = std::atoi(need(rec, "k_min").c_str());
    s.k_max = std::atoi(need(rec, "k_max").c_str());
    s.frames_per_step_min = std::atoi(need(rec, "frames_per_step_min").c_str());
    s.frames_per_step_max = std::atoi(need(rec, "frames_per_step_max").c_str());
    s.option_count = std::atoi(need(rec, "option_count").c_str());
    s.context_frames = std::atoi(need(rec, "context_frames").c_str());
    s.n_max_future = std::atoi(need(rec, "n_max_future").c_str());
    s.exo_frames = std::atoi(need(rec, "exo_frames").c_str());
    return s;
}
}  // namespace

void write_ego_dataset(const std::string& path, const std::vector<EpisodeSample>& eps,
                       const WorldSpec& spec, const Vocabulary& vocab) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("dataset: cannot open " + path);
    os << kEgoSchema << "\n" << spec_line(spec) << "\n";
    for (const auto& ep : eps) {
        os << "id=" << ep.id;
        os << ";answer=" << ep.gold_answer;
        os << ";stages=" << ints_field(ep.stage_labels);
        os << ";align=" << ints_field(ep.gold_alignment);
        os << ";plan=" << vocab.render(ep.gold_plan);
        os << ";query=" << vocab.render(ep.query);
        os << ";verify=" << vocab.render(ep.teacher_verify);
        os << ";options=";
        for (size_t i = 0; i < ep.options.size(); ++i) {
            if (i) os << "|";
            os << vocab.render(ep.options[i]);
        }
        os << ";ctx=" << frames_field(ep.context_frames);
        os << ";fut=" << frames_field(ep.future_frames);
        os << "\n";
    }
    if (!os) throw std::runtime_error("dataset: write failed for " + path);
}

std::vector<EpisodeSample> load_ego_dataset(const std::string& path,
                                            const Vocabulary& vocab,
                                            WorldSpec* spec_out) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("dataset: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != kEgoSchema)
        throw std::runtime_error("dataset: bad schema in " + path);
    if (!std::getline(is, line)) throw std::runtime_error("dataset: missing spec line");
    const WorldSpec spec = parse_spec_line(line);
    if (spec_out) *spec_out = spec;

    std::vector<EpisodeSample> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto rec = parse_record(line);
        EpisodeSample ep;
        ep.id = std::strtoull(need(rec, "id").c_str(), nullptr, 10);
        ep.gold_answer = std::atoi(need(rec, "answer").c_str());
        ep.stage_labels = parse_ints(need(rec, "stages"));
        ep.gold_alignment = parse_ints(need(rec, "align"));
        ep.gold_plan = vocab.lex(need(rec, "plan"));
        ep.query = vocab.lex(need(rec, "query"));
        ep.teacher_verify = vocab.lex(need(rec, "verify"));
        std::istringstream opts(need(rec, "options"));
        std::string opt;
        while (std::getline(opts, opt, '|')) ep.options.push_back(vocab.lex(opt));
        ep.context_frames = parse_frames(need(rec, "ctx"));
        ep.future_frames = parse_frames(need(rec, "fut"));
        out.push_back(std::move(ep));
    }
    return out;
}

void write_exo_dataset(const std::string& path, const std::vector<ExoSample>& samples,
                       const WorldSpec& spec, const Vocabulary& vocab) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("dataset: cannot open " + path);
    os << kExoSchema << "\n" << spec_line(spec) << "\n";
    for (const auto& s : samples) {
        os << "id=" << s.id;
        os << ";answer=" << s.gold_answer;
        os << ";question=" << vocab.render(s.question);
        os << ";pooled=" << frame_field(s.pooled);
        os << ";frames=" << frames_field(s.frames);
        os << "\n";
    }
    if (!os) throw std::runtime_error("dataset: write failed for " + path);
}

std::vector<ExoSample> load_exo_dataset(const std::string& path, const Vocabulary& vocab,
                                        WorldSpec* spec_out) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("dataset: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != kExoSchema)
        throw std::runtime_error("dataset: bad schema in " + path);
    if (!std::getline(is, line)) throw std::runtime_error("dataset: missing spec line");
    const WorldSpec spec = parse_spec_line(line);
    if (spec_out) *spec_out = spec;

    std::vector<ExoSample> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto rec = parse_record(line);
        ExoSample s;
        s.id = std::strtoull(need(rec, "id").c_str(), nullptr, 10);
        s.gold_answer = std::atoi(need(rec, "answer").c_str());
        s.question = vocab.lex(need(rec, "question"));
        auto pooled = parse_frames(need(rec, "pooled"));
        if (pooled.size() != 1) throw std::runtime_error("dataset: bad pooled field");
        s.pooled = pooled[0];
        s.frames = parse_frames(need(rec, "frames"));
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<EpisodeSample> generate_episodes(uint64_t seed_base, int count,
                                             const WorldSpec& spec) {
    std::vector<EpisodeSample> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i)
        out.push_back(generate_episode(seed_base + static_cast<uint64_t>(i), spec));
    return out;
}

std::vector<ExoSample> generate_exo_tasks(uint64_t seed_base, int count,
                                          const WorldSpec& spec) {
    std::vector<ExoSample> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i)
        out.push_back(generate_exo_task(seed_base + static_cast<uint64_t>(i), spec));
    return out;
}

}  // namespace egolab

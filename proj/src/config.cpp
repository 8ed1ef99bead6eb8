#include "egolab/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace egolab {

namespace {
std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw std::invalid_argument("config: bad number '" + s + "'");
    return v;
}

int parse_int(const std::string& s) {
    char* end = nullptr;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw std::invalid_argument("config: bad integer '" + s + "'");
    return static_cast<int>(v);
}

uint64_t parse_u64(const std::string& s) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0')
        throw std::invalid_argument("config: bad integer '" + s + "'");
    return v;
}

bool parse_bool(const std::string& s) {
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw std::invalid_argument("config: bad flag '" + s + "'");
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    size_t e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
}

#define DOUBLE_FIELD(key, expr)                                          \
    {key, [](const Config& c) { return fmt_double(c.expr); },            \
     [](Config& c, const std::string& v) { c.expr = parse_double(v); }}
#define INT_FIELD(key, expr)                                             \
    {key, [](const Config& c) { return std::to_string(c.expr); },        \
     [](Config& c, const std::string& v) { c.expr = parse_int(v); }}
#define BOOL_FIELD(key, expr)                                            \
    {key, [](const Config& c) { return std::string(c.expr ? "1" : "0"); },\
     [](Config& c, const std::string& v) { c.expr = parse_bool(v); }}
}  // namespace

const std::vector<ConfigField>& config_fields() {
    static const std::vector<ConfigField> fields = {
        {"seed", [](const Config& c) { return std::to_string(c.seed); },
         [](Config& c, const std::string& v) { c.seed = parse_u64(v); }},
        INT_FIELD("eval_episodes", eval_episodes),
        INT_FIELD("world.d_lat", world.d_lat),
        DOUBLE_FIELD("world.sigma_frame", world.sigma_frame),
        INT_FIELD("world.k_min", world.k_min),
        INT_FIELD("world.k_max", world.k_max),
        INT_FIELD("world.frames_per_step_min", world.frames_per_step_min),
        INT_FIELD("world.frames_per_step_max", world.frames_per_step_max),
        INT_FIELD("world.option_count", world.option_count),
        INT_FIELD("world.context_frames", world.context_frames),
        INT_FIELD("world.n_max_future", world.n_max_future),
        INT_FIELD("world.exo_frames", world.exo_frames),
        INT_FIELD("train.k", train.k),
        INT_FIELD("train.window_n", train.window_n),
        DOUBLE_FIELD("train.sft_distractor_rate", train.sft_distractor_rate),
        DOUBLE_FIELD("train.w_format", train.weights.w_format),
        DOUBLE_FIELD("train.w_answer", train.weights.w_answer),
        DOUBLE_FIELD("train.w_ground", train.weights.w_ground),
        DOUBLE_FIELD("train.w_confidence", train.weights.w_confidence),
        DOUBLE_FIELD("train.beta_confidence", train.beta_confidence),
        DOUBLE_FIELD("train.beta_kl", train.beta_kl),
        DOUBLE_FIELD("train.lambda_exo", train.lambda_exo),
        INT_FIELD("train.exo_interval", train.exo_interval),
        INT_FIELD("train.teacher_warmup_steps", train.teacher_warmup_steps),
        DOUBLE_FIELD("train.lambda_ground", train.lambda_ground),
        DOUBLE_FIELD("train.sft_lr", train.sft_lr),
        DOUBLE_FIELD("train.rl_lr", train.rl_lr),
        DOUBLE_FIELD("train.epsilon_adv", train.epsilon_adv),
        DOUBLE_FIELD("train.temperature", train.temperature),
        INT_FIELD("train.max_len", train.max_len),
        INT_FIELD("train.grpo_steps", train.grpo_steps),
        INT_FIELD("train.sft_epochs", train.sft_epochs),
        INT_FIELD("train.sft_batch", train.sft_batch),
        INT_FIELD("train.exo_batch", train.exo_batch),
        INT_FIELD("train.sft_episodes", train.sft_episodes),
        INT_FIELD("train.exo_episodes", train.exo_episodes),
        {"train.pooling",
         [](const Config& c) {
             return std::string(c.train.pooling == GroundPooling::kMax ? "max" : "mean");
         },
         [](Config& c, const std::string& v) {
             if (v == "max")
                 c.train.pooling = GroundPooling::kMax;
             else if (v == "mean")
                 c.train.pooling = GroundPooling::kMean;
             else
                 throw std::invalid_argument("config: bad pooling '" + v + "'");
         }},
        {"train.format_mode",
         [](const Config& c) {
             switch (c.train.format_mode) {
                 case FormatMode::kNoPlan: return std::string("no_plan");
                 case FormatMode::kNoVerify: return std::string("no_verify");
                 default: return std::string("full");
             }
         },
         [](Config& c, const std::string& v) {
             if (v == "full")
                 c.train.format_mode = FormatMode::kFull;
             else if (v == "no_plan")
                 c.train.format_mode = FormatMode::kNoPlan;
             else if (v == "no_verify")
                 c.train.format_mode = FormatMode::kNoVerify;
             else
                 throw std::invalid_argument("config: bad format_mode '" + v + "'");
         }},
        BOOL_FIELD("train.exo_reg", train.exo_reg),
        BOOL_FIELD("train.freeze_encoder", train.freeze_encoder),
        DOUBLE_FIELD("train.sft_format_gate", train.sft_format_gate),
    };
    return fields;
}

void Config::validate() const {
    if (eval_episodes < 1) throw std::invalid_argument("config: eval_episodes must be >= 1");
    world.validate();
    train.validate();
    if (train.window_n > world.n_max_future)
        throw std::invalid_argument("config: window_n exceeds generated future frames");
}

void config_set(Config& c, const std::string& key, const std::string& value) {
    for (const auto& f : config_fields()) {
        if (f.name == key) {
            f.set(c, value);
            return;
        }
    }
    throw std::invalid_argument("config: unknown key '" + key + "'");
}

Config parse_config_text(const std::string& text) {
    Config c;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: line " + std::to_string(lineno) +
                                        " has no '='");
        config_set(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return c;
}

Config load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config_text(buf.str());
}

std::string serialize_config(const Config& c) {
    std::string out;
    for (const auto& f : config_fields()) {
        out += f.name;
        out += " = ";
        out += f.get(c);
        out += "\n";
    }
    return out;
}

std::string config_hash(const Config& c) {
    const std::string s = serialize_config(c);
    uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace egolab

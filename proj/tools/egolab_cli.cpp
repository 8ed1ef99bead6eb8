// Command-line front end for the pipeline: data generation, supervised
// fine-tuning, GRPO, evaluation, ablations, and heatmap export.
//
// Everything that affects results lives in the hashed config file; flags only
// select commands, paths, seeds, and variant lists. Run directories are
// append-only: reruns refuse to overwrite unless --force is given.
//
// Exit codes:
//   0  success
//   2  config error (unreadable, unparsable, or invalid settings)
//   3  SFT format-compliance gate failure
//   4  numeric abort (non-finite loss during training)
//   5  missing or unwritable inputs/outputs

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "egolab/config.hpp"
#include "egolab/dataset.hpp"
#include "egolab/eval.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace egolab;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitGate = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitIo = 5;

constexpr const char* kVersion = "egolab 1.0";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const Vocabulary& vocab() {
    static const Vocabulary v;
    return v;
}

Config read_config(const std::string& path) {
    try {
        Config c = load_config(path);
        c.validate();
        return c;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

std::string default_out_root() {
    const char* env = std::getenv("EGOLAB_OUT");
    return env && *env ? env : "runs";
}

// runs/<command>-<config hash>-<seed>; append-only unless forced.
fs::path make_run_dir(const std::string& out, const std::string& command, const Config& cfg,
                      uint64_t seed, bool force) {
    const fs::path root = out.empty() ? fs::path(default_out_root()) : fs::path(out);
    const fs::path dir =
        root / (command + "-" + config_hash(cfg) + "-" + std::to_string(seed));
    if (fs::exists(dir) && !force)
        throw IoError("run directory exists (use --force to overwrite): " + dir.string());
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw IoError("cannot create run directory: " + dir.string());
    return dir;
}

std::string timestamp_utc() {
    char buf[32];
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write: " + path.string());
    out << text;
    if (!out) throw IoError("short write: " + path.string());
}

// Timestamps live only here so every other artifact is byte-reproducible.
void write_manifest(const fs::path& dir, const Config& cfg, const std::string& command,
                    const std::vector<uint64_t>& seeds,
                    const std::vector<std::string>& outputs) {
    json m;
    m["command"] = command;
    m["version"] = kVersion;
    m["config"] = serialize_config(cfg);
    m["config_hash"] = config_hash(cfg);
    m["seeds"] = seeds;
    m["outputs"] = outputs;
    m["started"] = timestamp_utc();
    write_text(dir / "manifest.json", m.dump(2) + "\n");
}

void write_finished(const fs::path& dir) {
    write_text(dir / "finished.txt", timestamp_utc() + "\n");
}

RunData load_run_data(const fs::path& data_dir) {
    RunData rd;
    try {
        rd.ego_train = load_ego_dataset((data_dir / "ego_train.txt").string(), vocab());
        rd.exo_train = load_exo_dataset((data_dir / "exo_train.txt").string(), vocab());
        rd.ego_heldout = load_ego_dataset((data_dir / "ego_heldout.txt").string(), vocab());
        rd.exo_heldout = load_exo_dataset((data_dir / "exo_heldout.txt").string(), vocab());
    } catch (const std::exception& e) {
        throw IoError(std::string("data dir: ") + e.what());
    }
    return rd;
}

PolicyParams load_checkpoint(const std::string& path) {
    try {
        return load_policy(path);
    } catch (const std::exception& e) {
        throw IoError(std::string("checkpoint: ") + e.what());
    }
}

PolicyDims dims_for(const Config& cfg) {
    PolicyDims d;
    d.vocab = vocab().size();
    d.d_lat = cfg.world.d_lat;
    return d;
}

std::string report_text(const EvalReport& rep) {
    std::ostringstream out;
    out << "dataset " << rep.dataset_id << "\n";
    out << "episodes " << rep.outcomes.size() << "\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "accuracy %.17g\n", rep.accuracy);
    out << buf;
    std::snprintf(buf, sizeof(buf), "format_rate %.17g\n", rep.format_rate);
    out << buf;
    return out.str();
}

std::string outcomes_text(const EvalReport& rep) {
    std::string out;
    for (double o : rep.outcomes) out += (o == 1.0 ? "1\n" : "0\n");
    return out;
}

std::vector<uint64_t> parse_seed_list(const std::string& text, uint64_t fallback) {
    if (text.empty()) return {fallback};
    std::vector<uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        seeds.push_back(std::stoull(item));
    }
    if (seeds.empty()) throw ConfigError("empty seed list");
    return seeds;
}

std::vector<std::string> parse_variant_list(const std::string& text) {
    std::vector<std::string> ids;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) ids.push_back(item);
    }
    if (ids.empty()) ids.push_back("full");
    return ids;
}

// --- commands ---

int cmd_gen_data(const std::string& config_path, const std::string& out, bool force) {
    const Config cfg = read_config(config_path);
    const fs::path dir = make_run_dir(out, "data", cfg, cfg.seed, force);
    write_manifest(dir, cfg, "gen-data", {cfg.seed},
                   {"ego_train.txt", "exo_train.txt", "ego_heldout.txt", "exo_heldout.txt"});
    const RunData rd = make_run_data(cfg, cfg.seed);
    write_ego_dataset((dir / "ego_train.txt").string(), rd.ego_train, cfg.world, vocab());
    write_exo_dataset((dir / "exo_train.txt").string(), rd.exo_train, cfg.world, vocab());
    write_ego_dataset((dir / "ego_heldout.txt").string(), rd.ego_heldout, cfg.world, vocab());
    write_exo_dataset((dir / "exo_heldout.txt").string(), rd.exo_heldout, cfg.world, vocab());
    write_finished(dir);
    std::cout << dir.string() << "\n";
    return kExitOk;
}

int cmd_sft(const std::string& config_path, const std::string& data, const std::string& out,
            bool force) {
    const Config cfg = read_config(config_path);
    const fs::path dir = make_run_dir(out, "sft", cfg, cfg.seed, force);
    write_manifest(dir, cfg, "sft", {cfg.seed}, {"sft.ckpt", "sft.log"});
    const RunData rd = load_run_data(data);

    PolicyParams p = init_policy(dims_for(cfg), cfg.seed);
    std::ofstream log(dir / "sft.log");
    if (!log) throw IoError("cannot write sft.log");
    const SftResult res =
        run_sft(p, rd.ego_train, rd.exo_train, cfg.train, vocab(), Rng::mix(cfg.seed, 0x5f74ull),
                &log);
    save_policy(p, (dir / "sft.ckpt").string());
    write_finished(dir);
    std::cout << "format_rate " << res.format_rate << " gate "
              << (res.gate_passed ? "pass" : "fail") << "\n";
    std::cout << dir.string() << "\n";
    return res.gate_passed ? kExitOk : kExitGate;
}

int cmd_grpo(const std::string& config_path, const std::string& sft_ckpt,
             const std::string& data, const std::string& out, bool force) {
    const Config cfg = read_config(config_path);
    const fs::path dir = make_run_dir(out, "grpo", cfg, cfg.seed, force);
    write_manifest(dir, cfg, "grpo", {cfg.seed}, {"final.ckpt", "metrics.log"});
    const RunData rd = load_run_data(data);
    const PolicyParams ref = load_checkpoint(sft_ckpt);

    PolicyParams p = ref;
    std::ofstream metrics(dir / "metrics.log");
    if (!metrics) throw IoError("cannot write metrics.log");
    try {
        train_grpo(p, ref, rd.ego_train, rd.exo_train, cfg.train, vocab(),
                   Rng::mix(cfg.seed, 0x677270ull), &metrics);
    } catch (const TrainAbort& e) {
        save_policy(p, (dir / "abort.ckpt").string());
        std::cerr << "numeric abort at step " << e.step << ": " << e.what()
                  << " (snapshot in abort.ckpt)\n";
        return kExitNumeric;
    }
    save_policy(p, (dir / "final.ckpt").string());
    write_finished(dir);
    std::cout << dir.string() << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt, const std::string& data,
             const std::string& out, bool force) {
    const Config cfg = read_config(config_path);
    const fs::path dir = make_run_dir(out, "eval", cfg, cfg.seed, force);
    write_manifest(dir, cfg, "eval", {cfg.seed},
                   {"ego_report.txt", "ego_outcomes.txt", "exo_report.txt",
                    "exo_outcomes.txt"});
    const RunData rd = load_run_data(data);
    const PolicyParams p = load_checkpoint(ckpt);

    const EvalReport ego =
        evaluate(p, rd.ego_heldout, vocab(), cfg.train.format_mode, cfg.train.max_len);
    const EvalReport exo = evaluate_exo(p, rd.exo_heldout, vocab());
    write_text(dir / "ego_report.txt", report_text(ego));
    write_text(dir / "ego_outcomes.txt", outcomes_text(ego));
    write_text(dir / "exo_report.txt", report_text(exo));
    write_text(dir / "exo_outcomes.txt", outcomes_text(exo));
    write_finished(dir);
    std::cout << report_text(ego) << report_text(exo);
    std::cout << dir.string() << "\n";
    return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::string& variants,
               const std::string& seeds_text, const std::string& out, bool force) {
    const Config cfg = read_config(config_path);
    const std::vector<std::string> ids = parse_variant_list(variants);
    const std::vector<uint64_t> seeds = parse_seed_list(seeds_text, cfg.seed);
    const fs::path dir = make_run_dir(out, "ablate", cfg, seeds[0], force);
    write_manifest(dir, cfg, "ablate", seeds, {"table.txt", "rows.txt"});

    std::ofstream log(dir / "ablate.log");
    AblationTable table;
    try {
        table = run_ablation(cfg, ids, seeds, vocab(), log ? &log : nullptr);
    } catch (const TrainAbort& e) {
        std::cerr << "numeric abort at step " << e.step << ": " << e.what() << "\n";
        return kExitNumeric;
    }
    write_text(dir / "table.txt", ablation_table_text(table));

    std::string rows;
    char buf[256];
    for (size_t i = 0; i < table.rows.size(); ++i) {
        const VariantOutcome& r = table.rows[i];
        for (size_t s = 0; s < r.seeds.size(); ++s) {
            std::snprintf(buf, sizeof(buf),
                          "variant=%s;seed=%llu;ego=%.17g;exo=%.17g;sft_ego=%.17g;"
                          "sft_exo=%.17g\n",
                          r.id.c_str(), static_cast<unsigned long long>(r.seeds[s]),
                          r.ego_acc[s], r.exo_acc[s], r.sft_ego_acc[s], r.sft_exo_acc[s]);
            rows += buf;
        }
    }
    write_text(dir / "rows.txt", rows);
    write_finished(dir);
    std::cout << ablation_table_text(table);
    std::cout << dir.string() << "\n";
    return kExitOk;
}

int cmd_heatmap(const std::string& config_path, const std::string& ckpt,
                const std::string& data, const std::string& out, int episodes, bool force) {
    const Config cfg = read_config(config_path);
    const fs::path dir = make_run_dir(out, "heatmap", cfg, cfg.seed, force);
    write_manifest(dir, cfg, "heatmap", {cfg.seed}, {"heatmaps.csv", "clause_stats.txt"});
    const RunData rd = load_run_data(data);
    const PolicyParams p = load_checkpoint(ckpt);

    const size_t count =
        std::min<size_t>(rd.ego_heldout.size(), static_cast<size_t>(std::max(episodes, 1)));
    std::vector<HeatmapRecord> records;
    std::string csv;
    for (size_t i = 0; i < count; ++i) {
        HeatmapRecord rec =
            grounding_heatmap(p, rd.ego_heldout[i], vocab(), cfg.train.window_n,
                              cfg.train.format_mode, cfg.train.max_len);
        csv += "# episode " + std::to_string(rec.episode_id) +
               (rec.ok ? "" : " malformed") + "\n";
        csv += heatmap_csv(rec);
        records.push_back(std::move(rec));
    }
    write_text(dir / "heatmaps.csv", csv);

    std::string stats;
    try {
        const ClausePositionStats st = clause_position_stats(records, cfg.train.pooling);
        std::ostringstream os;
        os << "positions " << st.positions << "\n";
        char buf[256];
        for (int k = 0; k < st.positions; ++k) {
            std::snprintf(buf, sizeof(buf),
                          "pos=%d;count=%d;mean=%.17g;q1=%.17g;median=%.17g;q3=%.17g;"
                          "mean_argmax=%.17g\n",
                          k + 1, st.counts[k], st.mean[k], st.q1[k], st.median[k], st.q3[k],
                          st.mean_argmax[k]);
            os << buf;
        }
        if (st.reward_outcome_corr)
            os << "reward_outcome_corr " << *st.reward_outcome_corr << "\n";
        else
            os << "reward_outcome_corr absent\n";
        stats = os.str();
    } catch (const std::exception& e) {
        stats = std::string("unavailable: ") + e.what() + "\n";
    }
    write_text(dir / "clause_stats.txt", stats);
    write_finished(dir);
    std::cout << dir.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Synthetic egocentric plan/verify/answer pipeline"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string config_path, data_dir, out_dir, ckpt, variants, seeds;
    int episodes = 200;
    bool force = false;

    auto add_common = [&](CLI::App* sub, bool needs_data, bool needs_ckpt) {
        sub->add_option("--config", config_path, "config file")->required();
        sub->add_option("--out", out_dir, "output root (default $EGOLAB_OUT or ./runs)");
        sub->add_flag("--force", force, "overwrite an existing run directory");
        if (needs_data) sub->add_option("--data", data_dir, "gen-data run directory")->required();
        if (needs_ckpt) sub->add_option("--checkpoint", ckpt, "policy checkpoint")->required();
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate train and held-out corpora");
    add_common(gen, false, false);
    CLI::App* sft = app.add_subcommand("sft", "supervised fine-tuning stage");
    add_common(sft, true, false);
    CLI::App* grpo = app.add_subcommand("grpo", "group-relative policy optimization stage");
    add_common(grpo, true, true);
    CLI::App* ev = app.add_subcommand("eval", "held-out evaluation");
    add_common(ev, true, true);
    CLI::App* ab = app.add_subcommand("ablate", "train and compare config variants");
    add_common(ab, false, false);
    ab->add_option("--variants", variants, "comma-separated variant ids (default: full)");
    ab->add_option("--seeds", seeds, "comma-separated seeds (default: config seed)");
    CLI::App* hm = app.add_subcommand("heatmap", "temporal-grounding heatmap export");
    add_common(hm, true, true);
    hm->add_option("--episodes", episodes, "held-out episodes to decode (default 200)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, out_dir, force);
        if (sft->parsed()) return cmd_sft(config_path, data_dir, out_dir, force);
        if (grpo->parsed()) return cmd_grpo(config_path, ckpt, data_dir, out_dir, force);
        if (ev->parsed()) return cmd_eval(config_path, ckpt, data_dir, out_dir, force);
        if (ab->parsed()) return cmd_ablate(config_path, variants, seeds, out_dir, force);
        if (hm->parsed())
            return cmd_heatmap(config_path, ckpt, data_dir, out_dir, episodes, force);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << e.what() << "\n";
        return kExitIo;
    } catch (const std::exception& e) {
        std::cerr << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}

#pragma once

// `badger` command-line front end. Exit codes: 0 success, 1 usage error,
// 2 data or configuration error.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "checkpoint.hpp"
#include "config.hpp"
#include "eval.hpp"
#include "export.hpp"
#include "outer_es.hpp"

namespace badger::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// "3..6" -> {3,4,5,6}; "3" -> {3}; "5,10,40" -> {5,10,40}
inline std::vector<std::size_t> parse_int_list(const std::string& text) {
    std::vector<std::size_t> out;
    auto num = [&](const std::string& s) -> std::size_t {
        std::size_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) throw CLI::ValidationError("bad integer '" + s + "'");
        return v;
    };
    if (const auto dots = text.find(".."); dots != std::string::npos) {
        const std::size_t a = num(text.substr(0, dots)), b = num(text.substr(dots + 2));
        if (b < a) throw CLI::ValidationError("empty range '" + text + "'");
        for (std::size_t v = a; v <= b; ++v) out.push_back(v);
        return out;
    }
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) out.push_back(num(item));
    if (out.empty()) throw CLI::ValidationError("empty list");
    return out;
}

// Rollout settings for a checkpoint: an explicit config, else the config.json
// saved next to it by `train`, else library defaults for its task kind.
inline EvalSettings settings_for(const Checkpoint& ck, const fs::path& ckpt_path, const std::string& config_path) {
    fs::path cfg = config_path;
    if (cfg.empty() && fs::exists(ckpt_path.parent_path() / "config.json")) cfg = ckpt_path.parent_path() / "config.json";
    if (!cfg.empty()) {
        const RunConfig rc = parse_run_config(read_file(cfg));
        if (!(rc.shape == ck.params.shape)) throw ConfigError("config shape does not match checkpoint shape");
        return rc.eval_settings();
    }
    EvalSettings s;
    s.task_kind = ck.task_kind;
    return s;
}

inline fs::path default_out(const fs::path& ckpt_path, const std::string& stem, std::uint64_t seed) {
    fs::path base = ckpt_path.parent_path();
    if (base.empty()) base = ".";
    return base / (stem + "-s" + std::to_string(seed));
}

inline void print_sweep(std::ostream& out, const SweepReport& rep) {
    out << std::left << std::setw(10) << rep.key_name << std::setw(6) << "d" << std::setw(14) << "mean_loss"
        << std::setw(12) << "ci95" << std::setw(10) << "episodes" << std::setw(10) << "chance" << std::setw(12)
        << "mean_value" << "\n";
    for (const auto& r : rep.rows) {
        out << std::left << std::setw(10) << r.key << std::setw(6) << r.d << std::setw(14) << std::setprecision(6)
            << r.mean_loss << std::setw(12) << std::setprecision(3) << r.ci95 << std::setw(10) << r.n_episodes
            << std::setw(10) << std::setprecision(4) << r.chance << std::setw(12) << r.mean_value;
        if (!r.beats_mean_value()) out << (r.beats_chance() ? "  [above mean-value baseline]" : "  [above chance]");
        out << "\n";
    }
}

inline void write_sweep(const SweepReport& rep, const fs::path& dir) {
    ensure_dir(dir);
    write_text(dir / "sweep.csv", sweep_csv(rep));
    write_text(dir / "sweep.svg", render_svg(sweep_chart(rep)));
}

inline int run_train(const std::string& config_path, bool resume, std::ostream& out) {
    const std::string text = read_file(config_path);
    const RunConfig rc = parse_run_config(text);
    const fs::path dir = fs::path(rc.output_dir) / run_directory_name(rc);
    ensure_dir(dir);
    write_text(dir / "config.json", to_json(rc).dump(2) + "\n");

    TrainOptions opts;
    const fs::path ckpt_path = dir / "checkpoint.txt";
    const fs::path log_path = dir / "loss_log.csv";
    if (resume && fs::exists(ckpt_path)) {
        opts.resume = load_checkpoint(ckpt_path);
        out << "resuming at generation " << opts.resume->generations_completed << "\n";
    } else {
        write_text(log_path, loss_log_header());
    }
    std::ofstream log(log_path, std::ios::app | std::ios::binary);
    if (!log) throw IoError("cannot append to " + log_path.string());
    const std::uint64_t every = std::max<std::uint64_t>(1, rc.es.generations / 20);
    opts.on_generation = [&](const GenerationLog& row, const ParamVector&) {
        log << loss_log_row(row);
        if (row.generation % every == 0 || row.generation + 1 == rc.es.generations)
            out << "generation " << row.generation << "  stage " << row.stage << "  population mean loss "
                << row.mean_loss << std::endl;
        return true;
    };
    const TrainResult res = train(rc.train_setup(), opts);
    log.flush();
    save_checkpoint(res.checkpoint, ckpt_path);
    out << "run directory: " << dir.string() << "\n";
    return kExitOk;
}

inline int dispatch(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Many experts sharing one recurrent communication policy, meta-trained with evolution strategies"};
    app.name("badger");
    app.require_subcommand(1);

    std::string config_path, ckpt_path, dims, counts, out_dir, eval_config;
    std::size_t episodes = 100, samples = 1'000'000, trace_d = 0;
    std::optional<std::uint64_t> seed;
    std::uint64_t baseline_seed = 0;
    bool resume = false;

    auto* train_cmd = app.add_subcommand("train", "Meta-train a policy; writes config, loss log and checkpoint to a run directory");
    train_cmd->add_option("--config", config_path, "Run configuration (JSON)")->required();
    train_cmd->add_flag("--resume", resume, "Continue from the run directory's checkpoint if present");

    auto* eval_cmd = app.add_subcommand("eval", "Dimension sweep of a checkpoint against chance and mean-value baselines");
    eval_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    eval_cmd->add_option("--dims", dims, "Dimensions, e.g. 3..6 or 3,5,10")->required();
    eval_cmd->add_option("--episodes", episodes, "Episodes per dimension")->required();
    eval_cmd->add_option("--seed", seed, "Evaluation seed")->required();
    eval_cmd->add_option("--config", eval_config, "Run configuration (default: config.json beside the checkpoint)");
    eval_cmd->add_option("--out", out_dir, "Output directory");

    auto* sweep_cmd = app.add_subcommand("sweep-experts", "Grow a checkpoint's agent by cloning and sweep the expert count");
    sweep_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    sweep_cmd->add_option("--counts", counts, "Expert counts, e.g. 5,10,20,40")->required();
    sweep_cmd->add_option("--episodes", episodes, "Episodes per count (default 100)");
    sweep_cmd->add_option("--seed", seed, "Evaluation seed (default: the checkpoint's training seed)");
    sweep_cmd->add_option("--config", eval_config, "Run configuration (default: config.json beside the checkpoint)");
    sweep_cmd->add_option("--out", out_dir, "Output directory");

    auto* trace_cmd = app.add_subcommand("trace", "Record one inner-loop episode as CSV and SVG");
    trace_cmd->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    trace_cmd->add_option("--seed", seed, "Episode seed")->required();
    trace_cmd->add_option("--out", out_dir, "Output directory")->required();
    trace_cmd->add_option("--d", trace_d, "Task dimension (default: the configured d)");
    trace_cmd->add_option("--config", eval_config, "Run configuration (default: config.json beside the checkpoint)");

    auto* base_cmd = app.add_subcommand("baselines", "Monte Carlo chance and mean-value baselines");
    base_cmd->add_option("--dims", dims, "Dimensions, e.g. 1..3")->required();
    base_cmd->add_option("--samples", samples, "Monte Carlo samples per dimension");
    base_cmd->add_option("--seed", baseline_seed, "Monte Carlo seed (default 0)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
        return kExitUsage;
    }

    try {
        if (*train_cmd) return run_train(config_path, resume, out);

        if (*base_cmd) {
            const auto ds = parse_int_list(dims);
            out << std::left << std::setw(6) << "d" << std::setw(14) << "chance" << std::setw(14) << "mean_value"
                << std::setw(14) << "chance_exact" << "mean_value_exact\n";
            for (auto d : ds) {
                if (d < 1) throw ArgumentError("dimensions must be >= 1");
                out << std::left << std::setw(6) << d << std::setw(14) << std::setprecision(6)
                    << chance_baseline(d, samples, baseline_seed) << std::setw(14)
                    << mean_value_baseline(d, samples, baseline_seed) << std::setw(14) << chance_closed_form()
                    << mean_value_closed_form(d) << "\n";
            }
            return kExitOk;
        }

        const Checkpoint ck = load_checkpoint(ckpt_path);
        const ExpertPolicy policy = ck.policy();
        const EvalSettings settings = settings_for(ck, ckpt_path, eval_config);

        if (*eval_cmd) {
            const auto ds = parse_int_list(dims);
            const SweepReport rep = dimension_sweep(policy, ds, episodes, *seed, settings);
            const fs::path dir = out_dir.empty() ? default_out(ckpt_path, "eval-d" + dims, *seed) : fs::path(out_dir);
            write_sweep(rep, dir);
            print_sweep(out, rep);
            out << "wrote " << (dir / "sweep.csv").string() << "\n";
            return kExitOk;
        }
        if (*sweep_cmd) {
            const auto ns = parse_int_list(counts);
            const std::uint64_t s = seed.value_or(ck.es_seed);
            const SweepReport rep = expert_count_sweep(policy, ns, episodes, s, settings);
            const fs::path dir = out_dir.empty() ? default_out(ckpt_path, "experts", s) : fs::path(out_dir);
            write_sweep(rep, dir);
            print_sweep(out, rep);
            out << "wrote " << (dir / "sweep.csv").string() << "\n";
            return kExitOk;
        }
        if (*trace_cmd) {
            const std::size_t d = trace_d ? trace_d : settings.d;
            const Episode ep = make_episode(settings.task_kind, d, settings.rollout.n_experts, policy.shape,
                                            settings.rollout, *seed);
            const Trajectory traj = inner_loop(policy, ep.task, ep.config, ep.initial);
            export_trace(traj, ep.task, out_dir);
            out << "episode loss " << traj.episode_loss << "; wrote " << out_dir << "\n";
            return kExitOk;
        }
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace badger::cli

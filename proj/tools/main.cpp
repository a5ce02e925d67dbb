#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "rlsim/bounds.hpp"
#include "rlsim/engine.hpp"
#include "rlsim/experiment.hpp"
#include "rlsim/gradcheck.hpp"

namespace {

struct CommonOpts {
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> reps;
    std::string out_dir;
    std::string format = "csv";
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--seed", opts.seed, "Override the config's master seed");
    cmd->add_option("--reps", opts.reps, "Override the config's repetition count");
    cmd->add_option("--out", opts.out_dir, "Directory for result files (stdout otherwise)");
    cmd->add_option("--format", opts.format, "Output format")
        ->check(CLI::IsMember({"csv", "json-lines"}));
}

rlsim::ExperimentConfig load_with_overrides(const std::string& path, const CommonOpts& opts) {
    rlsim::ExperimentConfig cfg = rlsim::load_config(path);
    if (opts.seed) cfg.seed = *opts.seed;
    if (opts.reps) {
        if (*opts.reps < 1) throw std::invalid_argument("--reps must be >= 1");
        cfg.repetitions = *opts.reps;
    }
    return cfg;
}

std::string render(const rlsim::ResultTable& table, const std::string& format) {
    return format == "csv" ? table.to_csv() : table.to_jsonl();
}

void write_or_print(const std::string& text, const std::string& out_dir, const std::string& filename) {
    if (out_dir.empty()) {
        std::cout << text;
        return;
    }
    std::filesystem::create_directories(out_dir);
    const std::string path = out_dir + "/" + filename;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
    std::cout << "wrote " << path << "\n";
}

std::string table_filename(const std::string& format) {
    return format == "csv" ? "results.csv" : "results.jsonl";
}

int run_table_command(const std::string& config_path, const CommonOpts& opts, bool require_sweep) {
    const rlsim::ExperimentConfig cfg = load_with_overrides(config_path, opts);
    if (require_sweep && cfg.sweep.empty()) {
        std::cerr << "sweep: config has no sweep axes\n";
        return 2;
    }
    const rlsim::ResultTable table = rlsim::run_experiment(cfg, opts.out_dir);
    write_or_print(render(table, opts.format), opts.out_dir, table_filename(opts.format));
    if (!opts.out_dir.empty()) {
        write_or_print(cfg.document + "\n", opts.out_dir, "config_echo.json");
    }
    for (const auto& row : table.rows) {
        if (row.metric == "error") {
            std::cerr << "run error at point " << row.point << " rep " << row.rep << ": " << row.note
                      << "\n";
            return 1;
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator and analysis toolkit for asynchronous RL post-training pipelines"};
    app.require_subcommand(1);

    std::string config_path;
    std::string table_path;
    std::string figure_name;
    CommonOpts opts;

    auto* simulate = app.add_subcommand("simulate", "Run the experiment described by a config file");
    simulate->add_option("config", config_path, "JSON config")->required();
    add_common(simulate, opts);

    auto* sweep = app.add_subcommand("sweep", "Run a config whose sweep axes expand into many points");
    sweep->add_option("config", config_path, "JSON config with a sweep section")->required();
    add_common(sweep, opts);

    auto* bounds_cmd = app.add_subcommand("bounds", "Print the closed-form bounds for a config");
    bounds_cmd->add_option("config", config_path, "JSON config with bound_inputs")->required();
    add_common(bounds_cmd, opts);

    auto* verify = app.add_subcommand("verify", "Check realized-moment completion bounds over a table");
    verify->add_option("table", table_path, "results.csv produced by simulate/sweep")->required();
    verify->add_option("config", config_path, "config the table came from (optional, for reference)");
    add_common(verify, opts);

    auto* reproduce = app.add_subcommand("reproduce", "Run a named figure-style recipe");
    reproduce
        ->add_option("figure", figure_name,
                     "one of: fig9, fig10, fig3a-shape, fig7-direction, fig8-direction, takeaway3")
        ->required();
    add_common(reproduce, opts);

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of the loss gradients");
    gradcheck->add_option("config", config_path, "JSON config (pg_variant/loss settings)")->required();
    add_common(gradcheck, opts);

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed() || sweep->parsed()) {
            return run_table_command(config_path, opts, sweep->parsed());
        }
        if (bounds_cmd->parsed()) {
            const rlsim::ExperimentConfig cfg = load_with_overrides(config_path, opts);
            rlsim::ExperimentConfig bounds_cfg = cfg;
            bounds_cfg.mode = rlsim::ExperimentMode::bounds;
            const rlsim::ResultTable table = rlsim::run_experiment(bounds_cfg);
            // Stable key=value lines for the first point; the full table too
            // when a sweep is present.
            for (const auto& row : table.rows) {
                if (row.rep != 0 || row.point != 0) continue;
                std::cout << row.metric << "=" << rlsim::format_number(row.value) << "\n";
            }
            if (!cfg.sweep.empty()) {
                write_or_print(render(table, opts.format), opts.out_dir, table_filename(opts.format));
            }
            return 0;
        }
        if (verify->parsed()) {
            std::ifstream in(table_path, std::ios::binary);
            if (!in) throw std::runtime_error("cannot open table: " + table_path);
            std::stringstream ss;
            ss << in.rdbuf();
            const rlsim::ResultTable table = rlsim::ResultTable::from_csv(ss.str());
            const rlsim::BoundVerdict verdict = rlsim::verify_bounds(table);
            std::cout << verdict.to_string() << "\n";
            return verdict.pass() ? 0 : 1;
        }
        if (reproduce->parsed()) {
            const rlsim::FigureReport rep = rlsim::reproduce_figure(figure_name, opts.seed.value_or(42));
            std::cout << rep.to_string();
            if (!opts.out_dir.empty()) {
                write_or_print(render(rep.table, opts.format), opts.out_dir,
                               rep.figure + (opts.format == "csv" ? ".csv" : ".jsonl"));
            }
            return rep.pass() ? 0 : 1;
        }
        if (gradcheck->parsed()) {
            (void)load_with_overrides(config_path, opts);  // validates the config
            const std::uint64_t seed = opts.seed.value_or(42);
            bool ok = true;
            for (const char* name : {"ppo", "decoupled_ppo", "tis", "cispo", "topr", "grpo", "naive_is"}) {
                rlsim::LossConfig lc;
                lc.variant = rlsim::loss_variant_from_string(name);
                lc.kl_weight = lc.variant == rlsim::LossVariant::grpo ? 0.05 : 0.0;
                rlsim::RngStream rng(seed, std::string("gradcheck-") + name);
                rlsim::ToyPolicy policy(3, 6);
                policy.randomize(rng, 0.5);
                rlsim::ToyPolicy behavior = policy;
                behavior.randomize(rng, 0.5);
                rlsim::ToyPolicy prox = policy;
                prox.randomize(rng, 0.3);
                rlsim::ToyPolicy ref = policy;
                ref.randomize(rng, 0.3);

                std::vector<rlsim::Trajectory> batch;
                for (int c = 0; c < 3; ++c) {
                    auto group = rlsim::sample_trajectories(behavior, c, 4, 3, rng);
                    std::vector<double> rewards;
                    for (std::size_t i = 0; i < group.size(); ++i) rewards.push_back(rng.uniform01());
                    const auto adv = rlsim::grpo_advantages(rewards);
                    for (std::size_t i = 0; i < group.size(); ++i) {
                        group[i].advantage = adv.values[i];
                        batch.push_back(std::move(group[i]));
                    }
                }
                rlsim::LossInputs aux;
                aux.prox = &prox;
                aux.ref = &ref;
                const rlsim::GradReport rep = rlsim::finite_diff_check(lc, policy, batch, 1e-5, aux);
                std::cout << name << ": max_rel_error=" << rlsim::format_number(rep.max_rel_error)
                          << " checked=" << rep.checked << " flagged=" << rep.flagged << "\n";
                if (rep.max_rel_error >= 1e-5) ok = false;
            }
            return ok ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

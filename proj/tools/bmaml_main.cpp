#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "bmaml/trainer.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitChecksum = 4;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config JSON")->required();
    cmd->add_option("--override", args.overrides, "config override key=value (repeatable)");
    cmd->add_option("--out", args.out_dir, "output directory (overrides config output_dir)");
}

bmaml::config::ExperimentConfig load_config(const CommonArgs& args) {
    auto cfg = bmaml::config::load(args.config_path, args.overrides);
    if (!args.out_dir.empty()) {
        cfg.output_dir = args.out_dir;
        cfg.validate();
    }
    return cfg;
}

int run_train(const CommonArgs& args) {
    const auto cfg = load_config(args);
    const auto result = bmaml::trainer::train(cfg);
    std::cout << "trained " << result.iterations << " iterations; final eval "
              << result.final_eval << "\nmetrics: " << result.metrics_csv.string()
              << "\ncheckpoints: " << result.final_checkpoint.string() << ", "
              << result.best_checkpoint.string() << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian meta-learning toolkit: SVGD fast adaptation, chaser-loss "
                 "meta-updates, and baselines on built-in benchmarks"};
    app.require_subcommand(1);

    CommonArgs train_args, rl_args, eval_args, active_args;

    CLI::App* train_cmd = app.add_subcommand("train", "run meta-training");
    add_common(train_cmd, train_args);

    CLI::App* rl_cmd = app.add_subcommand("rl-train", "alias of train for the RL suites");
    add_common(rl_cmd, rl_args);

    CLI::App* eval_cmd = app.add_subcommand("eval", "meta-test a checkpoint on fresh tasks");
    std::string eval_ckpt, eval_out;
    int eval_tasks = 200;
    std::uint64_t eval_seed = 0;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    add_common(eval_cmd, eval_args);
    eval_cmd->add_option("--eval-tasks", eval_tasks, "number of fresh test tasks");
    eval_cmd->add_option("--seed", eval_seed, "evaluation task seed");
    eval_cmd->add_option("--json-out", eval_out, "write the metrics JSON here as well");

    CLI::App* active_cmd =
        app.add_subcommand("active", "entropy vs random acquisition comparison");
    std::string active_ckpt, active_csv = "active.csv";
    active_cmd->add_option("--checkpoint", active_ckpt, "checkpoint file")->required();
    add_common(active_cmd, active_args);
    active_cmd->add_option("--csv", active_csv, "output CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (train_cmd->parsed()) return run_train(train_args);
        if (rl_cmd->parsed()) return run_train(rl_args);
        if (eval_cmd->parsed()) {
            const auto cfg = load_config(eval_args);
            const std::string json = bmaml::trainer::evaluate(eval_ckpt, cfg, eval_tasks, eval_seed);
            std::cout << json << "\n";
            if (!eval_out.empty()) {
                std::ofstream f(eval_out, std::ios::trunc);
                f << json << "\n";
            }
            return kExitOk;
        }
        if (active_cmd->parsed()) {
            const auto cfg = load_config(active_args);
            bmaml::trainer::active_compare(active_ckpt, cfg, active_csv);
            std::cout << "wrote " << active_csv << "\n";
            return kExitOk;
        }
    } catch (const bmaml::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const bmaml::DivergenceError& e) {
        std::cerr << "numeric divergence: " << e.what() << "\n";
        return kExitDiverged;
    } catch (const bmaml::CheckpointChecksumError& e) {
        std::cerr << "checkpoint error: " << e.what() << "\n";
        return kExitChecksum;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}

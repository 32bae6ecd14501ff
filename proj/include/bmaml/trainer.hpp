#pragma once

#include <filesystem>
#include <optional>

#include "bmaml/active.hpp"
#include "bmaml/config.hpp"

namespace bmaml::trainer {

/// Model context implied by the config (spec + hyperprior).
models::ModelContext make_model_context(const config::ExperimentConfig& cfg);

/// Supervised task pool for meta-training: task i comes from the stream
/// (seed, "taskpool", i), so the pool depends only on (config, seed).
std::vector<Task> sample_task_pool(const config::ExperimentConfig& cfg);

/// Held-out evaluation tasks from the "evaltask" stream family.
std::vector<Task> sample_eval_tasks(const config::ExperimentConfig& cfg, std::uint64_t seed,
                                    int count);

std::vector<tasks::ClassTask> sample_eval_class_tasks(const config::ExperimentConfig& cfg,
                                                      std::uint64_t seed, int count);

struct TrainResult {
    double final_eval = 0.0;      // last recorded eval metric
    double first_eval = 0.0;      // eval metric at iteration 1
    double best_eval = 0.0;
    long iterations = 0;
    std::filesystem::path metrics_csv;
    std::filesystem::path final_checkpoint;
    std::filesystem::path best_checkpoint;
};

/// Full meta-training run: writes metrics.csv (header
/// iter,meta_loss,eval_mse_or_acc_or_return,wall_ms; one row at iteration 1
/// and every eval_interval), final.ckpt and best.ckpt under output_dir.
/// Throws DivergenceError (with the iteration) when the meta-loss goes
/// non-finite and ConfigError for invalid configs.
TrainResult train(const config::ExperimentConfig& cfg);

/// Meta-test a checkpoint on fresh tasks; returns the metrics JSON text
/// (metric name, mean, std over tasks, task count, seed).
std::string evaluate(const std::filesystem::path& checkpoint_path,
                     const config::ExperimentConfig& cfg, int eval_tasks, std::uint64_t seed);

/// Entropy-vs-random acquisition comparison over active.eval_tasks tasks;
/// writes CSV with columns acquisitions,acc_entropy_mean,acc_random_mean.
void active_compare(const std::filesystem::path& checkpoint_path,
                    const config::ExperimentConfig& cfg, const std::filesystem::path& out_csv);

}  // namespace bmaml::trainer

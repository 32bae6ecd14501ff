#include "bmaml/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "bmaml/checkpoint.hpp"
#include "bmaml/kernels.hpp"

namespace bmaml::trainer {

using config::Algo;
using config::ExperimentConfig;
using config::Suite;

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

Task sample_suite_task(const ExperimentConfig& cfg, std::uint64_t key) {
    RngStream rng(key);
    if (cfg.suite == Suite::Sinusoid) return tasks::sample_sinusoid_task(rng, cfg.shots);
    return tasks::sample_synthetic_classification_task(rng, cfg.classification.ways, cfg.shots,
                                                       cfg.classification.pool_size,
                                                       cfg.classification.input_dim,
                                                       cfg.classification.test_per_class)
        .task;
}

bool metric_improved(const ExperimentConfig& cfg, double candidate, double best) {
    // MSE goes down; accuracy and return go up.
    if (cfg.suite == Suite::Sinusoid) return candidate < best;
    return candidate > best;
}

double worst_metric(const ExperimentConfig& cfg) {
    return cfg.suite == Suite::Sinusoid ? std::numeric_limits<double>::infinity()
                                        : -std::numeric_limits<double>::infinity();
}

}  // namespace

models::ModelContext make_model_context(const ExperimentConfig& cfg) {
    return models::ModelContext{cfg.model_spec(), cfg.hyperprior};
}

std::vector<Task> sample_task_pool(const ExperimentConfig& cfg) {
    std::vector<Task> pool(cfg.task_count);
    kernels::parallel_for(cfg.task_count, [&](int i) {
        pool[i] = sample_suite_task(cfg, derive_stream(cfg.seed, "taskpool",
                                                       static_cast<std::uint64_t>(i)));
    });
    return pool;
}

std::vector<Task> sample_eval_tasks(const ExperimentConfig& cfg, std::uint64_t seed, int count) {
    std::vector<Task> out(count);
    kernels::parallel_for(count, [&](int i) {
        out[i] = sample_suite_task(cfg, derive_stream(seed, "evaltask",
                                                      static_cast<std::uint64_t>(i)));
    });
    return out;
}

std::vector<tasks::ClassTask> sample_eval_class_tasks(const ExperimentConfig& cfg,
                                                      std::uint64_t seed, int count) {
    std::vector<tasks::ClassTask> out(count);
    kernels::parallel_for(count, [&](int i) {
        RngStream rng(derive_stream(seed, "evaltask", static_cast<std::uint64_t>(i)));
        out[i] = tasks::sample_synthetic_classification_task(
            rng, cfg.classification.ways, cfg.shots, cfg.classification.pool_size,
            cfg.classification.input_dim, cfg.classification.test_per_class);
    });
    return out;
}

namespace {

double eval_supervised(const ExperimentConfig& cfg, const models::ModelContext& model,
                       const ParticleSet& theta0, const std::vector<Task>& eval_tasks) {
    const int n_eval = cfg.meta.n_eval >= 0 ? cfg.meta.n_eval : cfg.meta.chaser_steps;
    std::vector<double> metrics(eval_tasks.size());
    kernels::parallel_for(static_cast<int>(eval_tasks.size()), [&](int i) {
        metrics[i] = meta::meta_test(theta0, model, eval_tasks[i], cfg.supervised_algo(), n_eval,
                                     cfg.meta.inner_lr, cfg.meta.kernel);
    });
    double mean = 0.0;
    for (double m : metrics) mean += m;
    return mean / metrics.size();
}

struct MetricsWriter {
    std::ofstream out;
    explicit MetricsWriter(const std::filesystem::path& path) : out(path, std::ios::trunc) {
        out << "iter,meta_loss,eval_mse_or_acc_or_return,wall_ms\n";
    }
    void row(long iter, double loss, double eval, double wall_ms) {
        out << iter << ',' << fmt_double(loss) << ',' << fmt_double(eval) << ','
            << fmt_double(wall_ms) << '\n';
        out.flush();
    }
};

TrainResult train_supervised(const ExperimentConfig& cfg) {
    const models::ModelContext model = make_model_context(cfg);
    const std::vector<Task> pool = sample_task_pool(cfg);
    const std::vector<Task> eval_tasks = sample_eval_tasks(cfg, cfg.seed, cfg.eval_tasks);

    ParticleSet theta0 = init_particles(model.spec, cfg.meta.particles, cfg.seed);
    meta::MetaOptimizer opt(cfg.meta.optimizer);

    std::filesystem::create_directories(cfg.output_dir);
    TrainResult result;
    result.metrics_csv = std::filesystem::path(cfg.output_dir) / "metrics.csv";
    result.final_checkpoint = std::filesystem::path(cfg.output_dir) / "final.ckpt";
    result.best_checkpoint = std::filesystem::path(cfg.output_dir) / "best.ckpt";
    MetricsWriter metrics(result.metrics_csv);

    double best = worst_metric(cfg);
    const auto t0 = std::chrono::steady_clock::now();

    // Epochs shuffle the pool; each meta-batch counts as one iteration.
    long iter = 0;
    std::vector<int> order(pool.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    long epoch = 0;
    while (iter < cfg.iterations) {
        RngStream shuffle_rng(derive_stream(cfg.seed, "epoch", static_cast<std::uint64_t>(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_int(static_cast<int>(i))]);
        for (std::size_t start = 0; start < order.size() && iter < cfg.iterations;
             start += cfg.meta.meta_batch) {
            ++iter;
            const std::size_t end = std::min(order.size(), start + cfg.meta.meta_batch);
            std::vector<meta::TaskObjectives> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i)
                batch.push_back(meta::make_objectives(model, pool[order[i]]));

            meta::StepStats stats;
            try {
                stats = meta::train_step(cfg.supervised_algo(), theta0, batch, cfg.meta, opt);
            } catch (const NumericError& e) {
                throw DivergenceError(iter, std::string("diverged at iteration ") +
                                                std::to_string(iter) + ": " + e.what());
            }
            if (!std::isfinite(stats.meta_loss))
                throw DivergenceError(iter, "non-finite meta-loss at iteration " +
                                                std::to_string(iter));

            if (iter == 1 || iter % cfg.eval_interval == 0 || iter == cfg.iterations) {
                const double metric = eval_supervised(cfg, model, theta0, eval_tasks);
                const double wall_ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
                metrics.row(iter, stats.meta_loss, metric, wall_ms);
                if (iter == 1) result.first_eval = metric;
                result.final_eval = metric;
                if (metric_improved(cfg, metric, best)) {
                    best = metric;
                    checkpoint::save(result.best_checkpoint, theta0);
                }
            }
        }
        ++epoch;
    }
    result.best_eval = best;
    result.iterations = iter;
    checkpoint::save(result.final_checkpoint, theta0);
    return result;
}

TrainResult train_rl(const ExperimentConfig& cfg) {
    const MlpSpec spec = cfg.model_spec();
    metarl::RlMetaConfig rl = cfg.rl;
    rl.iterations = static_cast<int>(cfg.iterations);

    ParticleSet theta0 = init_particles(spec, rl.particles, cfg.seed);

    std::filesystem::create_directories(cfg.output_dir);
    TrainResult result;
    result.metrics_csv = std::filesystem::path(cfg.output_dir) / "metrics.csv";
    result.final_checkpoint = std::filesystem::path(cfg.output_dir) / "final.ckpt";
    result.best_checkpoint = std::filesystem::path(cfg.output_dir) / "best.ckpt";
    MetricsWriter metrics(result.metrics_csv);

    double best = -std::numeric_limits<double>::infinity();
    const auto t0 = std::chrono::steady_clock::now();

    for (long iter = 1; iter <= cfg.iterations; ++iter) {
        std::vector<tasks::NavTask> batch(rl.meta_batch);
        for (int i = 0; i < rl.meta_batch; ++i) {
            RngStream rng(derive_stream(cfg.seed, "rl-task", static_cast<std::uint64_t>(iter),
                                        static_cast<std::uint64_t>(i)));
            batch[i] = tasks::sample_nav_task(rng);
        }
        metarl::RlIterStats stats;
        try {
            stats = metarl::rl_train_step(cfg.rl_algo(), theta0, spec, batch, rl, cfg.seed, iter);
        } catch (const NumericError& e) {
            throw DivergenceError(iter, std::string("diverged at iteration ") +
                                            std::to_string(iter) + ": " + e.what());
        }
        if (!std::isfinite(stats.meta_loss))
            throw DivergenceError(iter,
                                  "non-finite meta-loss at iteration " + std::to_string(iter));

        if (iter == 1 || iter % cfg.eval_interval == 0 || iter == cfg.iterations) {
            const double wall_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                    .count();
            metrics.row(iter, stats.meta_loss, stats.avg_max_return, wall_ms);
            if (iter == 1) result.first_eval = stats.avg_max_return;
            result.final_eval = stats.avg_max_return;
            if (stats.avg_max_return > best) {
                best = stats.avg_max_return;
                checkpoint::save(result.best_checkpoint, theta0);
            }
        }
    }
    result.best_eval = best;
    result.iterations = cfg.iterations;
    checkpoint::save(result.final_checkpoint, theta0);
    return result;
}

}  // namespace

TrainResult train(const ExperimentConfig& cfg) {
    cfg.validate();
    return config::is_rl_algo(cfg.algo) ? train_rl(cfg) : train_supervised(cfg);
}

std::string evaluate(const std::filesystem::path& checkpoint_path, const ExperimentConfig& cfg,
                     int eval_tasks, std::uint64_t seed) {
    cfg.validate();
    const ParticleSet theta0 = checkpoint::load(checkpoint_path);

    std::vector<double> metrics(eval_tasks);
    std::string metric_name;
    if (config::is_rl_algo(cfg.algo)) {
        metric_name = "return";
        const MlpSpec spec = cfg.model_spec();
        if (theta0.dim() != layout_for(spec).dim)
            throw ConfigError("checkpoint", "particle dimension does not match the suite model");
        kernels::parallel_for(eval_tasks, [&](int i) {
            RngStream rng(derive_stream(seed, "evaltask", static_cast<std::uint64_t>(i)));
            const tasks::NavTask task = tasks::sample_nav_task(rng);
            const auto stats = metarl::meta_test_rl(
                theta0, spec, cfg.rl_algo(), task, cfg.rl,
                derive_stream(seed, "evalroll", static_cast<std::uint64_t>(i)));
            metrics[i] = stats.max_over_particles;
        });
    } else {
        const models::ModelContext model = make_model_context(cfg);
        if (theta0.dim() != layout_for(model.spec).dim)
            throw ConfigError("checkpoint", "particle dimension does not match the suite model");
        metric_name = cfg.suite == Suite::Sinusoid ? "mse" : "accuracy";
        const std::vector<Task> eval_set = sample_eval_tasks(cfg, seed, eval_tasks);
        const int n_eval = cfg.meta.n_eval >= 0 ? cfg.meta.n_eval : cfg.meta.chaser_steps;
        kernels::parallel_for(eval_tasks, [&](int i) {
            metrics[i] = meta::meta_test(theta0, model, eval_set[i], cfg.supervised_algo(), n_eval,
                                         cfg.meta.inner_lr, cfg.meta.kernel);
        });
    }

    double mean = 0.0;
    for (double m : metrics) mean += m;
    mean /= eval_tasks;
    double var = 0.0;
    for (double m : metrics) var += (m - mean) * (m - mean);
    const double std_dev = eval_tasks > 0 ? std::sqrt(var / eval_tasks) : 0.0;

    nlohmann::json j;
    j["metric"] = metric_name;
    j["mean"] = mean;
    j["std"] = std_dev;
    j["eval_tasks"] = eval_tasks;
    j["seed"] = seed;
    return j.dump(2);
}

void active_compare(const std::filesystem::path& checkpoint_path, const ExperimentConfig& cfg,
                    const std::filesystem::path& out_csv) {
    cfg.validate();
    const ParticleSet theta0 = checkpoint::load(checkpoint_path);
    const models::ModelContext model = make_model_context(cfg);
    if (theta0.dim() != layout_for(model.spec).dim)
        throw ConfigError("checkpoint", "particle dimension does not match the suite model");

    const int t_eval = cfg.active.eval_tasks;
    const auto class_tasks = sample_eval_class_tasks(cfg, cfg.seed, t_eval);
    const int pool = cfg.classification.pool_size;

    std::vector<std::vector<double>> entropy_acc(t_eval), random_acc(t_eval);
    kernels::parallel_for(t_eval, [&](int i) {
        active::ActiveConfig acfg;
        acfg.svgd_steps = cfg.active.svgd_steps;
        acfg.alpha = cfg.meta.inner_lr;
        acfg.kernel = cfg.meta.kernel;
        acfg.strategy = active::ActiveConfig::Strategy::Entropy;
        entropy_acc[i] =
            active::active_learning_loop(theta0, class_tasks[i], model, acfg).accuracy_history;
        acfg.strategy = active::ActiveConfig::Strategy::Random;
        acfg.stream_key = derive_stream(cfg.seed, "active-rand", static_cast<std::uint64_t>(i));
        random_acc[i] =
            active::active_learning_loop(theta0, class_tasks[i], model, acfg).accuracy_history;
    });

    std::ofstream out(out_csv, std::ios::trunc);
    out << "acquisitions,acc_entropy_mean,acc_random_mean\n";
    for (int a = 0; a < pool; ++a) {
        double me = 0.0, mr = 0.0;
        for (int i = 0; i < t_eval; ++i) {
            me += entropy_acc[i][a];
            mr += random_acc[i][a];
        }
        out << (a + 1) << ',' << fmt_double(me / t_eval) << ',' << fmt_double(mr / t_eval) << '\n';
    }
}

}  // namespace bmaml::trainer

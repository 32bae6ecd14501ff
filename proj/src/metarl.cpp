#include "bmaml/metarl.hpp"

#include <cmath>

#include "bmaml/kernels.hpp"
#include "bmaml/meta.hpp"
#include "bmaml/models.hpp"

namespace bmaml::metarl {

using graph::Graph;
using graph::NodeId;
using tasks::NavTask;
using tasks::RolloutLog;
using tasks::Trajectory;

namespace {
constexpr double kLog2Pi = 1.8378770664093453;

/// Reward-to-go weights (G_t - b) / n_traj flattened over all timesteps,
/// with b the mean of G_t over the whole batch.
std::vector<double> advantage_weights(const std::vector<Trajectory>& trajectories) {
    std::vector<double> weights;
    int total = 0;
    for (const auto& tr : trajectories) total += tr.length();
    weights.reserve(total);
    double sum_g = 0.0;
    for (const auto& tr : trajectories) {
        double g = 0.0;
        std::vector<double> rtg(tr.length());
        for (int t = tr.length() - 1; t >= 0; --t) {
            g += tr.rewards[t];
            rtg[t] = g;
        }
        for (double v : rtg) {
            weights.push_back(v);
            sum_g += v;
        }
    }
    const double baseline = total > 0 ? sum_g / total : 0.0;
    const double inv_n = 1.0 / static_cast<double>(trajectories.size());
    for (double& w : weights) w = (w - baseline) * inv_n;
    return weights;
}

}  // namespace

NodeId reinforce_surrogate(Graph& g, const MlpSpec& spec, NodeId policy,
                           const std::vector<Trajectory>& trajectories) {
    if (trajectories.empty()) throw ContractError("reinforce_surrogate: no trajectories");
    const ParamLayout lay = layout_for(spec);
    const int adim = spec.output_dim();
    int total = 0;
    for (const auto& tr : trajectories) total += tr.length();
    if (total == 0) throw ContractError("reinforce_surrogate: trajectories are empty");

    // States and actions as din x T / adim x T constants.
    std::vector<double> xs(static_cast<std::size_t>(spec.input_dim()) * total);
    std::vector<double> as(static_cast<std::size_t>(adim) * total);
    int col = 0;
    for (const auto& tr : trajectories) {
        for (int t = 0; t < tr.length(); ++t, ++col) {
            for (int j = 0; j < spec.input_dim(); ++j)
                xs[static_cast<std::size_t>(j) * total + col] = tr.states[t][j];
            for (int j = 0; j < adim; ++j)
                as[static_cast<std::size_t>(j) * total + col] = tr.actions[t][j];
        }
    }
    const std::vector<double> w = advantage_weights(trajectories);

    NodeId x = g.leaf(xs, spec.input_dim(), total);
    NodeId a = g.leaf(as, adim, total);
    NodeId mean = models::mlp_forward(g, spec, policy, x);
    NodeId log_std = g.slice(policy, lay.log_std, adim, 1);
    NodeId sd_cols = g.bcast_col(g.exp(log_std), total);
    NodeId z = g.div(g.sub(a, mean), sd_cols);
    // log pi elementwise: -z^2/2 - log sd - log(2 pi)/2
    NodeId elem = g.shift(g.sub(g.scale(g.mul(z, z), -0.5), g.bcast_col(log_std, total)),
                          -0.5 * kLog2Pi);
    NodeId per_step = g.colsum(elem);  // 1 x T
    NodeId weights = g.leaf(w, 1, total);
    return g.sum_all(g.mul(per_step, weights));
}

std::vector<double> reinforce_gradient(const MlpSpec& spec, const ParamVector& params,
                                       const std::vector<Trajectory>& trajectories) {
    if (trajectories.empty()) throw ContractError("reinforce_gradient: no trajectories");
    Graph g;
    NodeId p = g.leaf(params, static_cast<int>(params.size()), 1);
    NodeId j = reinforce_surrogate(g, spec, p, trajectories);
    return g.value_copy(g.gradient(j, p));
}

namespace {

struct RlTaskResult {
    double loss = 0.0;
    std::vector<double> grad;  // flattened; empty for pure value-mode algos
    double max_return = 0.0;
    double mean_return = 0.0;
    std::vector<RolloutLog::Entry> log_entries;
};

double batch_return(const std::vector<Trajectory>& trajectories) {
    double s = 0.0;
    for (const auto& tr : trajectories) s += tr.total_reward();
    return s / trajectories.size();
}

void fill_return_stats(RlTaskResult& res, const std::vector<double>& returns) {
    res.max_return = returns[0];
    res.mean_return = 0.0;
    for (double r : returns) {
        res.max_return = std::max(res.max_return, r);
        res.mean_return += r;
    }
    res.mean_return /= returns.size();
}

template <typename Fn>
RlIterStats reduce_rl_batch(ParticleSet& theta0, std::span<const NavTask> batch,
                            const RlMetaConfig& cfg, RolloutLog* log, const Fn& fn) {
    const int t = static_cast<int>(batch.size());
    std::vector<RlTaskResult> per_task(t);
    kernels::parallel_for(t, [&](int i) { per_task[i] = fn(i); });

    const std::size_t dim = static_cast<std::size_t>(theta0.count()) * theta0.dim();
    std::vector<double> total(dim, 0.0);
    RlIterStats stats;
    for (const RlTaskResult& r : per_task) {
        stats.meta_loss += r.loss;
        stats.avg_max_return += r.max_return / t;
        stats.avg_mean_return += r.mean_return / t;
        if (!r.grad.empty())
            for (std::size_t i = 0; i < dim; ++i) total[i] += r.grad[i];
        if (log)
            log->entries.insert(log->entries.end(), r.log_entries.begin(), r.log_entries.end());
    }
    std::vector<double> flat = theta0.flatten();
    for (std::size_t i = 0; i < dim; ++i) flat[i] -= cfg.meta_lr * total[i];
    theta0.unflatten(flat);
    return stats;
}

}  // namespace

RlIterStats svpg_chaser_meta_step(ParticleSet& theta0, const MlpSpec& spec,
                                  std::span<const NavTask> batch, const RlMetaConfig& cfg,
                                  std::uint64_t root_seed, long iteration, RolloutLog* log) {
    cfg.check();
    theta0.check();
    const int m = theta0.count();
    const int d = theta0.dim();

    return reduce_rl_batch(theta0, batch, cfg, log, [&](int ti) {
        const NavTask& task = batch[ti];
        RlTaskResult res;
        RolloutLog local_log;
        Graph g;

        std::vector<NodeId> leaves(m);
        for (int p = 0; p < m; ++p) leaves[p] = g.leaf(theta0[p], d, 1);

        // Chaser: inner_steps SVPG updates on the task-train surrogate.
        std::vector<std::vector<Trajectory>> trn(m);
        for (int p = 0; p < m; ++p) {
            RngStream rng(derive_stream(root_seed, "rl-trn",
                                        static_cast<std::uint64_t>(iteration) * 100000 + ti,
                                        static_cast<std::uint64_t>(p)));
            trn[p] = tasks::rollout(spec, theta0[p], task, cfg.episodes, rng, &local_log, "trn");
        }
        std::vector<NodeId> chaser(leaves.begin(), leaves.end());
        for (int s = 0; s < cfg.inner_steps; ++s) {
            std::vector<NodeId> grads(m);
            for (int p = 0; p < m; ++p)
                grads[p] = g.gradient(reinforce_surrogate(g, spec, chaser[p], trn[p]), chaser[p]);
            chaser = svgd::svpg_step(g, chaser, grads, cfg.eta, cfg.inner_lr, cfg.kernel);
        }

        // On-policy validation data comes from the chaser parameters.
        std::vector<std::vector<Trajectory>> val(m);
        std::vector<double> returns(m);
        for (int p = 0; p < m; ++p) {
            const ParamVector chaser_values = g.value_copy(chaser[p]);
            RngStream rng(derive_stream(root_seed, "rl-val",
                                        static_cast<std::uint64_t>(iteration) * 100000 + ti,
                                        static_cast<std::uint64_t>(p)));
            val[p] = tasks::rollout(spec, chaser_values, task, cfg.episodes, rng, &local_log, "val");
            returns[p] = batch_return(val[p]);
        }

        // Leader: one more SVPG step driven by validation data only.
        std::vector<NodeId> vgrads(m);
        for (int p = 0; p < m; ++p)
            vgrads[p] = g.gradient(reinforce_surrogate(g, spec, chaser[p], val[p]), chaser[p]);
        const double leader_lr = cfg.resolved_leader_lr();
        std::vector<NodeId> leader = chaser;
        if (leader_lr > 0.0)
            leader = svgd::svpg_step(g, chaser, vgrads, cfg.eta, leader_lr, cfg.kernel);

        NodeId loss = meta::chaser_loss(g, chaser, leader);
        res.loss = g.value_scalar(loss);
        const auto grads = g.gradient(loss, leaves);
        for (NodeId gn : grads) {
            const auto v = g.value_copy(gn);
            res.grad.insert(res.grad.end(), v.begin(), v.end());
        }
        fill_return_stats(res, returns);
        res.log_entries = std::move(local_log.entries);
        return res;
    });
}

RlIterStats vpg_reptile_meta_step(ParticleSet& theta0, const MlpSpec& spec,
                                  std::span<const NavTask> batch, const RlMetaConfig& cfg,
                                  std::uint64_t root_seed, long iteration, RolloutLog* log) {
    cfg.check();
    theta0.check();
    const int m = theta0.count();
    const int d = theta0.dim();

    return reduce_rl_batch(theta0, batch, cfg, log, [&](int ti) {
        const NavTask& task = batch[ti];
        RlTaskResult res;
        RolloutLog local_log;
        res.grad.assign(static_cast<std::size_t>(m) * d, 0.0);
        std::vector<double> returns(m);

        for (int p = 0; p < m; ++p) {
            RngStream rng(derive_stream(root_seed, "rl-trn",
                                        static_cast<std::uint64_t>(iteration) * 100000 + ti,
                                        static_cast<std::uint64_t>(p)));
            const auto trn =
                tasks::rollout(spec, theta0[p], task, cfg.episodes, rng, &local_log, "trn");

            // Plain VPG chaser, inner_steps first-order updates.
            ParamVector adapted = theta0[p];
            for (int s = 0; s < cfg.inner_steps; ++s) {
                const auto grad = reinforce_gradient(spec, adapted, trn);
                for (int i = 0; i < d; ++i) adapted[i] += cfg.inner_lr * grad[i];
            }

            RngStream vrng(derive_stream(root_seed, "rl-val",
                                         static_cast<std::uint64_t>(iteration) * 100000 + ti,
                                         static_cast<std::uint64_t>(p)));
            const auto val =
                tasks::rollout(spec, adapted, task, cfg.episodes, vrng, &local_log, "val");
            returns[p] = batch_return(val);

            // Meta-loss ||theta0 - stopgrad(adapted)||^2; gradient in closed form.
            double sq = 0.0;
            for (int i = 0; i < d; ++i) {
                const double diff = theta0[p][i] - adapted[i];
                sq += diff * diff;
                res.grad[static_cast<std::size_t>(p) * d + i] = 2.0 * diff;
            }
            res.loss += sq;
        }
        fill_return_stats(res, returns);
        res.log_entries = std::move(local_log.entries);
        return res;
    });
}

RlIterStats rl_train_step(RlAlgo algo, ParticleSet& theta0, const MlpSpec& spec,
                          std::span<const NavTask> batch, const RlMetaConfig& cfg,
                          std::uint64_t root_seed, long iteration, RolloutLog* log) {
    return algo == RlAlgo::SvpgChaser
               ? svpg_chaser_meta_step(theta0, spec, batch, cfg, root_seed, iteration, log)
               : vpg_reptile_meta_step(theta0, spec, batch, cfg, root_seed, iteration, log);
}

RlTestStats meta_test_rl(const ParticleSet& theta0, const MlpSpec& spec, RlAlgo algo,
                         const NavTask& task, const RlMetaConfig& cfg, std::uint64_t stream_key) {
    theta0.check();
    const int m = theta0.count();
    const int d = theta0.dim();

    // Fresh task-train episodes from the meta-trained particles.
    std::vector<std::vector<Trajectory>> trn(m);
    for (int p = 0; p < m; ++p) {
        RngStream rng(derive_stream(stream_key, "test-trn", static_cast<std::uint64_t>(p)));
        trn[p] = tasks::rollout(spec, theta0[p], task, cfg.episodes, rng);
    }

    ParticleSet adapted = theta0;
    if (algo == RlAlgo::SvpgChaser) {
        Graph g;
        std::vector<NodeId> leaves(m), grads(m);
        for (int p = 0; p < m; ++p) leaves[p] = g.leaf(theta0[p], d, 1);
        for (int p = 0; p < m; ++p)
            grads[p] = g.gradient(reinforce_surrogate(g, spec, leaves[p], trn[p]), leaves[p]);
        const auto stepped = svgd::svpg_step(g, leaves, grads, cfg.eta, cfg.inner_lr, cfg.kernel);
        for (int p = 0; p < m; ++p) adapted[p] = g.value_copy(stepped[p]);
    } else {
        for (int p = 0; p < m; ++p) {
            const auto grad = reinforce_gradient(spec, theta0[p], trn[p]);
            for (int i = 0; i < d; ++i) adapted[p][i] += cfg.inner_lr * grad[i];
        }
    }

    RlTestStats stats;
    for (int p = 0; p < m; ++p) {
        RngStream rng(derive_stream(stream_key, "test-eval", static_cast<std::uint64_t>(p)));
        const auto eval = tasks::rollout(spec, adapted[p], task, cfg.episodes, rng);
        const double r = batch_return(eval);
        stats.max_over_particles = p == 0 ? r : std::max(stats.max_over_particles, r);
        stats.mean_over_particles += r / m;
    }
    return stats;
}

}  // namespace bmaml::metarl

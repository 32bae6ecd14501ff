#include "bmaml/meta.hpp"

#include <cmath>
#include <memory>

#include "bmaml/kernels.hpp"

namespace bmaml::meta {

using graph::Graph;
using graph::NodeId;

TaskObjectives make_objectives(const models::ModelContext& model, const Task& task) {
    const MlpSpec spec = model.spec;
    const models::HyperpriorConfig hp = model.hyperprior;
    auto trn = std::make_shared<const Dataset>(task.trn);
    auto trn_val = std::make_shared<const Dataset>(concat(task.trn, task.val));
    auto val = std::make_shared<const Dataset>(task.val);
    TaskObjectives obj;
    obj.train_log_posterior = [spec, hp, trn](Graph& g, NodeId p) {
        return models::log_posterior(g, spec, p, *trn, hp);
    };
    obj.train_val_log_posterior = [spec, hp, trn_val](Graph& g, NodeId p) {
        return models::log_posterior(g, spec, p, *trn_val, hp);
    };
    obj.val_log_likelihood = [spec, val](Graph& g, NodeId p) {
        return models::log_likelihood(g, spec, p, *val);
    };
    return obj;
}

void AdamState::apply(std::vector<double>& theta, const std::vector<double>& grad, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (m.empty()) {
        m.assign(theta.size(), 0.0);
        v.assign(theta.size(), 0.0);
    }
    ++t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
        v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
        theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
}

void MetaOptimizer::apply(ParticleSet& theta, const std::vector<double>& grad, double lr) {
    std::vector<double> flat = theta.flatten();
    if (flat.size() != grad.size()) throw ContractError("MetaOptimizer: gradient size mismatch");
    if (kind == MetaConfig::Optimizer::Adam) {
        adam.apply(flat, grad, lr);
    } else {
        for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= lr * grad[i];
    }
    theta.unflatten(flat);
}

NodeId chaser_loss(Graph& g, std::span<const NodeId> chaser, std::span<const NodeId> leader) {
    if (chaser.size() != leader.size())
        throw ContractError("chaser_loss: particle counts differ");
    NodeId loss = graph::kNoNode;
    for (std::size_t m = 0; m < chaser.size(); ++m) {
        if (g.size(chaser[m]) != g.size(leader[m]))
            throw ContractError("chaser_loss: particle dimensions differ");
        NodeId term = g.sq_norm(g.sub(chaser[m], g.stop_grad(leader[m])));
        loss = (loss == graph::kNoNode) ? term : g.add(loss, term);
    }
    return loss;
}

namespace {

struct TaskGrad {
    double loss = 0.0;
    std::vector<double> grad;  // flattened over particles
};

/// Run fn(task_index) -> TaskGrad over the batch (parallel across tasks),
/// then reduce serially in task order.
template <typename Fn>
StepStats reduce_batch(ParticleSet& theta0, std::span<const TaskObjectives> tasks,
                       const MetaConfig& cfg, MetaOptimizer& opt, const Fn& fn) {
    const int t = static_cast<int>(tasks.size());
    std::vector<TaskGrad> per_task(t);
    kernels::parallel_for(t, [&](int i) { per_task[i] = fn(i); });

    const std::size_t dim = theta0.flatten().size();
    std::vector<double> total(dim, 0.0);
    StepStats stats;
    for (const TaskGrad& tg : per_task) {
        stats.meta_loss += tg.loss;
        for (std::size_t i = 0; i < dim; ++i) total[i] += tg.grad[i];
    }
    opt.apply(theta0, total, cfg.meta_lr);
    return stats;
}

std::vector<NodeId> make_leaves(Graph& g, const ParticleSet& theta0) {
    std::vector<NodeId> leaves(theta0.count());
    for (int m = 0; m < theta0.count(); ++m)
        leaves[m] = g.leaf(theta0[m], theta0.dim(), 1);
    return leaves;
}

std::vector<double> collect_grads(Graph& g, NodeId loss, std::span<const NodeId> leaves) {
    const auto grads = g.gradient(loss, leaves);
    std::vector<double> flat;
    for (NodeId gn : grads) {
        const auto v = g.value_copy(gn);
        flat.insert(flat.end(), v.begin(), v.end());
    }
    return flat;
}

}  // namespace

StepStats emaml_train_step(ParticleSet& theta0, std::span<const TaskObjectives> tasks,
                           const MetaConfig& cfg, MetaOptimizer& opt) {
    cfg.check();
    theta0.check();
    return reduce_batch(theta0, tasks, cfg, opt, [&](int i) {
        const TaskObjectives& task = tasks[i];
        TaskGrad tg;
        // Each particle is an independent first-order learner: plain gradient
        // ascent inner loop and its own validation loss, no kernel coupling.
        for (int m = 0; m < theta0.count(); ++m) {
            Graph g;
            NodeId leaf = g.leaf(theta0[m], theta0.dim(), 1);
            NodeId leaves[1] = {leaf};
            auto adapted = svgd::svgd_n(g, leaves, task.train_log_posterior, cfg.chaser_steps,
                                  cfg.inner_lr, cfg.kernel);
            NodeId loss = g.neg(task.val_log_likelihood(g, adapted[0]));
            tg.loss += g.value_scalar(loss);
            const auto gv = g.value_copy(g.gradient(loss, leaf));
            tg.grad.insert(tg.grad.end(), gv.begin(), gv.end());
        }
        return tg;
    });
}

StepStats maml_train_step(ParticleSet& theta0, std::span<const TaskObjectives> tasks,
                          const MetaConfig& cfg, MetaOptimizer& opt) {
    if (theta0.count() != 1) throw ContractError("maml_train_step: expects a single particle");
    return emaml_train_step(theta0, tasks, cfg, opt);
}

StepStats bfa_train_step(ParticleSet& theta0, std::span<const TaskObjectives> tasks,
                         const MetaConfig& cfg, MetaOptimizer& opt) {
    cfg.check();
    theta0.check();
    const int m = theta0.count();
    return reduce_batch(theta0, tasks, cfg, opt, [&](int i) {
        const TaskObjectives& task = tasks[i];
        Graph g;
        auto leaves = make_leaves(g, theta0);
        auto adapted =
            svgd::svgd_n(g, leaves, task.train_log_posterior, cfg.chaser_steps, cfg.inner_lr, cfg.kernel);
        std::vector<NodeId> lls(m);
        for (int p = 0; p < m; ++p) lls[p] = task.val_log_likelihood(g, adapted[p]);
        // -log[(1/M) sum exp(ll_m)], max-shifted inside logsumexp.
        NodeId loss = g.shift(g.neg(g.logsumexp(g.stack(lls))), std::log(static_cast<double>(m)));
        TaskGrad tg;
        tg.loss = g.value_scalar(loss);
        tg.grad = collect_grads(g, loss, leaves);
        return tg;
    });
}

StepStats bmaml_train_step(ParticleSet& theta0, std::span<const TaskObjectives> tasks,
                           const MetaConfig& cfg, MetaOptimizer& opt) {
    cfg.check();
    theta0.check();
    return reduce_batch(theta0, tasks, cfg, opt, [&](int i) {
        const TaskObjectives& task = tasks[i];
        Graph g;
        auto leaves = make_leaves(g, theta0);
        auto chaser =
            svgd::svgd_n(g, leaves, task.train_log_posterior, cfg.chaser_steps, cfg.inner_lr, cfg.kernel);
        auto leader = cfg.leader_lr == 0.0
                          ? chaser
                          : svgd::svgd_n(g, chaser, task.train_val_log_posterior,
                                         cfg.leader_steps, cfg.leader_lr, cfg.kernel);
        NodeId loss = chaser_loss(g, chaser, leader);
        TaskGrad tg;
        tg.loss = g.value_scalar(loss);
        tg.grad = collect_grads(g, loss, leaves);
        return tg;
    });
}

StepStats train_step(Algo algo, ParticleSet& theta0, std::span<const TaskObjectives> tasks,
                     const MetaConfig& cfg, MetaOptimizer& opt) {
    switch (algo) {
        case Algo::Maml: return maml_train_step(theta0, tasks, cfg, opt);
        case Algo::Emaml: return emaml_train_step(theta0, tasks, cfg, opt);
        case Algo::Bfa: return bfa_train_step(theta0, tasks, cfg, opt);
        case Algo::Bmaml: return bmaml_train_step(theta0, tasks, cfg, opt);
    }
    throw ContractError("train_step: unknown algorithm");
}

ParticleSet adapt(const ParticleSet& theta0, const models::ModelContext& model, const Dataset& trn,
                  Algo algo, int n_eval, double alpha, const svgd::KernelConfig& kernel) {
    const MlpSpec spec = model.spec;
    const models::HyperpriorConfig hp = model.hyperprior;
    auto data = std::make_shared<const Dataset>(trn);
    svgd::TargetBuilder target = [spec, hp, data](Graph& g, NodeId p) {
        return models::log_posterior(g, spec, p, *data, hp);
    };
    ParticleSet adapted = theta0;
    if (n_eval == 0) return adapted;
    if (algo == Algo::Bfa || algo == Algo::Bmaml) {
        svgd::svgd_run(adapted.particles, svgd::graph_score(target), n_eval, alpha, kernel);
    } else {
        // Per-particle plain ascent; no kernel interaction between particles.
        kernels::parallel_for(theta0.count(), [&](int m) {
            std::vector<std::vector<double>> one = {adapted[m]};
            svgd::svgd_run(one, svgd::graph_score(target), n_eval, alpha, kernel);
            adapted[m] = one[0];
        });
    }
    return adapted;
}

double meta_test(const ParticleSet& theta0, const models::ModelContext& model, const Task& task,
                 Algo algo, int n_eval, double alpha, const svgd::KernelConfig& kernel) {
    ParticleSet adapted = adapt(theta0, model, task.trn, algo, n_eval, alpha, kernel);
    if (model.spec.head == OutputHead::Softmax)
        return models::predictive_accuracy(model.spec, adapted, task.tst);
    return models::predictive_mse(model.spec, adapted, task.tst);
}

}  // namespace bmaml::meta

#pragma once

#include <span>
#include <vector>

#include "bmaml/models.hpp"
#include "bmaml/svgd.hpp"

namespace bmaml::meta {

enum class Algo { Maml, Emaml, Bfa, Bmaml };

struct MetaConfig {
    int particles = 5;
    int chaser_steps = 1;  // n
    int leader_steps = 1;  // s
    double inner_lr = 0.01;
    double leader_lr = 0.001;
    double meta_lr = 0.001;
    int meta_batch = 10;
    enum class Optimizer { Adam, Sgd };
    Optimizer optimizer = Optimizer::Adam;
    svgd::KernelConfig kernel = svgd::KernelConfig::median();
    int n_eval = -1;  // meta-test inner steps; -1 means chaser_steps

    void check() const {
        if (particles < 1) throw ContractError("MetaConfig.particles: must be >= 1");
        if (chaser_steps < 1) throw ContractError("MetaConfig.chaser_steps: must be >= 1");
        if (leader_steps < 1) throw ContractError("MetaConfig.leader_steps: must be >= 1");
        if (inner_lr <= 0) throw ContractError("MetaConfig.inner_lr: must be positive");
        // Zero is allowed for leader_lr (leader stays at the chaser) and for
        // meta_lr (evaluate the meta-loss without moving theta0).
        if (leader_lr < 0 || meta_lr < 0)
            throw ContractError("MetaConfig: learning rates must be nonnegative");
        if (meta_batch < 1) throw ContractError("MetaConfig.meta_batch: must be >= 1");
    }
};

/// Differentiable objectives of one task, decoupled from how they are built
/// (the harness wires in network posteriors; tests may inject toy targets).
struct TaskObjectives {
    svgd::TargetBuilder train_log_posterior;      // chaser / inner-update target
    svgd::TargetBuilder train_val_log_posterior;  // leader target (trn + val)
    svgd::TargetBuilder val_log_likelihood;       // validation meta-objectives
};

TaskObjectives make_objectives(const models::ModelContext& model, const Task& task);

/// Adam with bias correction; moment constants 0.9 / 0.999 / 1e-8.
struct AdamState {
    std::vector<double> m, v;
    long t = 0;
    void apply(std::vector<double>& theta, const std::vector<double>& grad, double lr);
};

struct MetaOptimizer {
    MetaConfig::Optimizer kind = MetaConfig::Optimizer::Adam;
    AdamState adam;

    explicit MetaOptimizer(MetaConfig::Optimizer k = MetaConfig::Optimizer::Adam) : kind(k) {}
    /// One descent step on the flattened particle set.
    void apply(ParticleSet& theta, const std::vector<double>& grad, double lr);
};

/// Sum over particles of the squared Euclidean distance between paired chaser
/// and leader particles. The leader side is wrapped in stop-gradient.
graph::NodeId chaser_loss(graph::Graph& g, std::span<const graph::NodeId> chaser,
                          std::span<const graph::NodeId> leader);

struct StepStats {
    double meta_loss = 0.0;
};

/// One meta-training step on a batch of tasks. All four learners mutate
/// theta0 in place via the optimizer; the meta-gradient is accumulated over
/// tasks in index order regardless of worker count.
StepStats maml_train_step(ParticleSet& theta0, std::span<const TaskObjectives> tasks,
                          const MetaConfig& cfg, MetaOptimizer& opt);
StepStats emaml_train_step(ParticleSet& theta0, std::span<const TaskObjectives> tasks,
                           const MetaConfig& cfg, MetaOptimizer& opt);
StepStats bfa_train_step(ParticleSet& theta0, std::span<const TaskObjectives> tasks,
                         const MetaConfig& cfg, MetaOptimizer& opt);
StepStats bmaml_train_step(ParticleSet& theta0, std::span<const TaskObjectives> tasks,
                           const MetaConfig& cfg, MetaOptimizer& opt);
StepStats train_step(Algo algo, ParticleSet& theta0, std::span<const TaskObjectives> tasks,
                     const MetaConfig& cfg, MetaOptimizer& opt);

/// Adapt from theta0 on task.trn with the learner's inner update (SVGD for
/// BFA/BMAML, per-particle gradient ascent for MAML/EMAML) and return the
/// adapted particles.
ParticleSet adapt(const ParticleSet& theta0, const models::ModelContext& model,
                  const Dataset& trn, Algo algo, int n_eval, double alpha,
                  const svgd::KernelConfig& kernel);

/// Test metric after adaptation: MSE of the predictive mean (Linear head) or
/// argmax accuracy of the averaged class probabilities (Softmax head).
double meta_test(const ParticleSet& theta0, const models::ModelContext& model, const Task& task,
                 Algo algo, int n_eval, double alpha, const svgd::KernelConfig& kernel);

}  // namespace bmaml::meta

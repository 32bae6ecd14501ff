#pragma once

#include <span>

#include "bmaml/graph.hpp"
#include "bmaml/svgd.hpp"
#include "bmaml/tasks.hpp"

namespace bmaml::metarl {

struct RlMetaConfig {
    int episodes = 10;      // K episodes per particle per inner update
    int meta_batch = 20;    // tasks per meta-iteration
    double inner_lr = 0.1;
    double leader_lr = -1.0;  // < 0: use inner_lr
    double meta_lr = 0.01;
    double eta = 0.1;       // exploration temperature
    int inner_steps = 1;
    int particles = 5;
    int iterations = 100;
    svgd::KernelConfig kernel = svgd::KernelConfig::median();

    double resolved_leader_lr() const { return leader_lr < 0.0 ? inner_lr : leader_lr; }
    void check() const {
        if (episodes < 1 || meta_batch < 1 || inner_steps < 1 || particles < 1 || iterations < 1)
            throw ContractError("RlMetaConfig: counts must be >= 1");
        if (inner_lr <= 0 || meta_lr <= 0 || eta <= 0)
            throw ContractError("RlMetaConfig: rates and eta must be positive");
    }
};

/// Frozen-trajectory REINFORCE surrogate whose gradient at the sampling
/// parameters is the policy-gradient estimate:
///   J^(theta) = (1/n_traj) sum_traj sum_t log pi_theta(a_t|s_t) (G_t - b)
/// with reward-to-go returns G_t (discount 1) and b the batch mean of G_t.
/// Trajectories enter as constants, so the node is differentiable in theta.
graph::NodeId reinforce_surrogate(graph::Graph& g, const MlpSpec& spec, graph::NodeId policy,
                                  const std::vector<tasks::Trajectory>& trajectories);

/// Ascent-direction gradient estimate of the expected return.
std::vector<double> reinforce_gradient(const MlpSpec& spec, const ParamVector& params,
                                       const std::vector<tasks::Trajectory>& trajectories);

struct RlIterStats {
    double meta_loss = 0.0;
    /// Mean over tasks of the max over particles of the adapted return.
    double avg_max_return = 0.0;
    /// Mean over tasks and particles of the adapted return.
    double avg_mean_return = 0.0;
};

/// One SVPG-Chaser meta-iteration: per task, sample task-train episodes with
/// theta0, take inner_steps SVPG steps (chaser), sample task-validation
/// episodes with the chaser, advance the leader by one SVPG step on the
/// validation surrogate only, and descend on the summed chaser loss with the
/// leader stop-gradded. theta0 is updated in place (plain SGD, rate meta_lr).
RlIterStats svpg_chaser_meta_step(ParticleSet& theta0, const MlpSpec& spec,
                                  std::span<const tasks::NavTask> batch, const RlMetaConfig& cfg,
                                  std::uint64_t root_seed, long iteration,
                                  tasks::RolloutLog* log = nullptr);

/// One VPG-Reptile meta-iteration: per task and particle independently, one
/// plain policy-gradient step; the meta-gradient is the closed form
/// 2 (theta0 - stopgrad(theta_adapted)) summed over tasks.
RlIterStats vpg_reptile_meta_step(ParticleSet& theta0, const MlpSpec& spec,
                                  std::span<const tasks::NavTask> batch, const RlMetaConfig& cfg,
                                  std::uint64_t root_seed, long iteration,
                                  tasks::RolloutLog* log = nullptr);

enum class RlAlgo { SvpgChaser, VpgReptile };

RlIterStats rl_train_step(RlAlgo algo, ParticleSet& theta0, const MlpSpec& spec,
                          std::span<const tasks::NavTask> batch, const RlMetaConfig& cfg,
                          std::uint64_t root_seed, long iteration,
                          tasks::RolloutLog* log = nullptr);

struct RlTestStats {
    double max_over_particles = 0.0;
    double mean_over_particles = 0.0;
};

/// Adapt once on fresh task episodes and report the post-adaptation return
/// statistics (max over particles, plus the mean as a secondary metric).
RlTestStats meta_test_rl(const ParticleSet& theta0, const MlpSpec& spec, RlAlgo algo,
                         const tasks::NavTask& task, const RlMetaConfig& cfg,
                         std::uint64_t stream_key);

}  // namespace bmaml::metarl

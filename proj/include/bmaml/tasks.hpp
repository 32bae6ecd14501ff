#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "bmaml/matrix.hpp"
#include "bmaml/param_vector.hpp"
#include "bmaml/rng.hpp"

namespace bmaml::tasks {

// ---------------------------------------------------------------------------
// sinusoid regression
// ---------------------------------------------------------------------------

/// y = A sin(w x + b) + eps with eps ~ N(0, (0.01 A)^2).
struct SinusoidParams {
    double amplitude;  // [0.1, 5.0]
    double phase;      // [0, 2*pi]
    double frequency;  // [0.5, 2.0]
    double noise_std() const { return 0.01 * amplitude; }
};

SinusoidParams sample_sinusoid_params(RngStream& rng);

/// trn and val each hold K shots, tst holds test_count points; inputs are
/// uniform on [-5, 5].
Task sample_sinusoid_task(RngStream& rng, int shots, int test_count = 100);

// ---------------------------------------------------------------------------
// synthetic few-shot classification
// ---------------------------------------------------------------------------

/// Classification task plus an unlabeled pool whose labels stay hidden until
/// the active-learning loop reveals them.
struct ClassTask {
    Task task;
    Matrix pool_inputs;
    std::vector<int> pool_labels;  // hidden ground truth
};

/// Each class is a Gaussian cluster in `dim` dimensions: mean uniform on
/// [-3, 3]^dim, covariance 0.5 * I. trn/val get `shots` per class, tst gets
/// test_per_class per class, and the pool holds pool_size points with
/// uniformly random class membership.
ClassTask sample_synthetic_classification_task(RngStream& rng, int ways, int shots, int pool_size,
                                               int dim = 8, int test_per_class = 10,
                                               double mean_scale = 3.0);

// ---------------------------------------------------------------------------
// 2D navigation
// ---------------------------------------------------------------------------

struct NavTask {
    std::array<double, 2> goal;  // inside the unit square
};

NavTask sample_nav_task(RngStream& rng);

struct NavState {
    std::array<double, 2> position;
    int steps = 0;
};

struct NavStepResult {
    NavState state;
    double reward;
    bool done;
};

inline constexpr double kNavActionLimit = 0.1;
inline constexpr double kNavGoalRadius = 0.01;
inline constexpr int kNavHorizon = 100;

/// Agent starts at the origin.
NavState nav_reset(const NavTask& task);

/// Applies the action clipped elementwise to [-0.1, 0.1]; reward is the
/// negative squared distance to the goal after the move; done when within
/// 0.01 of the goal or at the horizon.
NavStepResult nav_step(const NavTask& task, const NavState& state,
                       const std::array<double, 2>& action);

/// One episode of (state, action, reward); actions are the clipped executed
/// velocities, so every recorded entry lies in [-0.1, 0.1].
struct Trajectory {
    std::vector<std::array<double, 2>> states;
    std::vector<std::array<double, 2>> actions;
    std::vector<double> rewards;
    bool terminated_early = false;

    int length() const { return static_cast<int>(rewards.size()); }
    double total_reward() const {
        double s = 0.0;
        for (double r : rewards) s += r;
        return s;
    }
};

/// Optional instrumentation: which parameters sampled which batch.
struct RolloutLog {
    struct Entry {
        std::uint64_t params_hash;
        std::string purpose;
    };
    std::vector<Entry> entries;
};

std::uint64_t hash_params(const ParamVector& params);

/// K episodes of the diagonal-Gaussian policy (mean from the network,
/// state-independent log-std stored in the particle). Actions are sampled,
/// clipped by the environment, and recorded post-clip.
std::vector<Trajectory> rollout(const MlpSpec& spec, const ParamVector& params,
                                const NavTask& task, int episodes, RngStream& rng,
                                RolloutLog* log = nullptr, const std::string& purpose = "");

}  // namespace bmaml::tasks

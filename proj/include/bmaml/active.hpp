#pragma once

#include "bmaml/meta.hpp"
#include "bmaml/tasks.hpp"

namespace bmaml::active {

/// Shannon entropy (natural log) of the particle-averaged class distribution
/// at input x; 0 * log 0 reads as 0.
double predictive_entropy(const MlpSpec& spec, const ParticleSet& particles, const double* x);

struct ActiveConfig {
    enum class Strategy { Entropy, Random };
    Strategy strategy = Strategy::Entropy;
    int svgd_steps = 1;       // SVGD updates per acquisition (and for the initial fit)
    double alpha = 0.01;
    svgd::KernelConfig kernel = svgd::KernelConfig::median();
    std::uint64_t stream_key = 0;  // drives Random acquisition order
};

struct ActiveResult {
    std::vector<double> accuracy_history;     // test accuracy after each acquisition
    std::vector<int> selected;                // pool indices in acquisition order
    std::vector<double> selected_entropy;     // entropy of each pick at selection time
};

/// Pool-based acquisition: adapt from theta0 on the initial labeled set, then
/// repeatedly pick a pool item (max predictive entropy, ties to the lowest
/// index, or uniformly at random for the baseline), reveal its label, and
/// re-run SVGD on the grown labeled set from the current particles.
ActiveResult active_learning_loop(const ParticleSet& theta0, const tasks::ClassTask& task,
                                  const models::ModelContext& model, const ActiveConfig& cfg);

}  // namespace bmaml::active

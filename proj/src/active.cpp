#include "bmaml/active.hpp"

#include <cmath>
#include <memory>

namespace bmaml::active {

double predictive_entropy(const MlpSpec& spec, const ParticleSet& particles, const double* x) {
    const auto probs = models::predictive_classification(spec, particles, x);
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

namespace {

void adapt_in_place(ParticleSet& theta, const models::ModelContext& model, const Dataset& data,
                    const ActiveConfig& cfg) {
    const MlpSpec spec = model.spec;
    const models::HyperpriorConfig hp = model.hyperprior;
    auto shared = std::make_shared<const Dataset>(data);
    svgd::TargetBuilder target = [spec, hp, shared](graph::Graph& g, graph::NodeId p) {
        return models::log_posterior(g, spec, p, *shared, hp);
    };
    svgd::svgd_run(theta.particles, svgd::graph_score(target), cfg.svgd_steps, cfg.alpha,
                   cfg.kernel);
}

}  // namespace

ActiveResult active_learning_loop(const ParticleSet& theta0, const tasks::ClassTask& task,
                                  const models::ModelContext& model, const ActiveConfig& cfg) {
    if (task.task.trn.size() == 0)
        throw ContractError("active_learning_loop: initial labeled set is empty");

    Dataset labeled = task.task.trn;
    std::vector<int> remaining(task.pool_labels.size());
    for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = static_cast<int>(i);

    ParticleSet theta = theta0;
    adapt_in_place(theta, model, labeled, cfg);

    RngStream rng(cfg.stream_key);
    ActiveResult result;
    const int dim = task.pool_inputs.cols;

    while (!remaining.empty()) {
        int pick_pos = 0;
        if (cfg.strategy == ActiveConfig::Strategy::Random) {
            pick_pos = rng.uniform_int(static_cast<int>(remaining.size()));
            result.selected_entropy.push_back(
                predictive_entropy(model.spec, theta, task.pool_inputs.row(remaining[pick_pos])));
        } else {
            double best = -1.0;
            for (std::size_t i = 0; i < remaining.size(); ++i) {
                const double h =
                    predictive_entropy(model.spec, theta, task.pool_inputs.row(remaining[i]));
                if (h > best) {  // strict: ties resolve to the lowest index
                    best = h;
                    pick_pos = static_cast<int>(i);
                }
            }
            result.selected_entropy.push_back(best);
        }

        const int pool_index = remaining[pick_pos];
        result.selected.push_back(pool_index);
        remaining.erase(remaining.begin() + pick_pos);

        // Reveal the label and grow the labeled set.
        const int old_n = labeled.size();
        Matrix grown(old_n + 1, dim);
        std::copy(labeled.inputs.data.begin(), labeled.inputs.data.end(), grown.data.begin());
        std::copy_n(task.pool_inputs.row(pool_index), dim, grown.row(old_n));
        labeled.inputs = std::move(grown);
        labeled.labels.push_back(task.pool_labels[pool_index]);

        // Warm start: continue from the current particles on the full set.
        adapt_in_place(theta, model, labeled, cfg);
        result.accuracy_history.push_back(
            models::predictive_accuracy(model.spec, theta, task.task.tst));
    }
    return result;
}

}  // namespace bmaml::active

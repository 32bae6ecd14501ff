#include "bmaml/svgd.hpp"

#include <cmath>
#include <string>

#include "bmaml/kernels.hpp"

namespace bmaml::svgd {

using graph::Graph;
using graph::NodeId;

NodeId rbf_kernel(Graph& g, NodeId a, NodeId b, double h) {
    if (g.size(a) != g.size(b)) throw ContractError("rbf_kernel: dimension mismatch");
    if (h <= 0.0) throw ContractError("rbf_kernel: bandwidth must be positive");
    NodeId diff = g.sub(a, b);
    return g.exp(g.scale(g.sq_norm(diff), -1.0 / h));
}

double median_bandwidth(const std::vector<std::vector<double>>& particles) {
    const int m = static_cast<int>(particles.size());
    if (m < 2) throw ContractError("median_bandwidth: needs at least two particles");
    const int d = static_cast<int>(particles[0].size());
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m) * d);
    for (const auto& p : particles) flat.insert(flat.end(), p.begin(), p.end());
    std::vector<double> sq(static_cast<std::size_t>(m) * m);
    kernels::pairwise_sq_dists(flat.data(), m, d, sq.data());
    const double med = kernels::median_upper_triangle(sq, m);
    if (med == 0.0) return 1.0;
    return med * med / std::log(static_cast<double>(m));
}

double median_bandwidth(const Graph& g, std::span<const NodeId> particles) {
    std::vector<std::vector<double>> values;
    values.reserve(particles.size());
    for (NodeId p : particles) values.push_back(g.value_copy(p));
    return median_bandwidth(values);
}

namespace {

double resolve_bandwidth(const Graph& g, std::span<const NodeId> particles,
                         const KernelConfig& kernel) {
    if (kernel.mode == KernelConfig::Bandwidth::Fixed) {
        if (kernel.h <= 0.0) throw ContractError("svgd: fixed bandwidth must be positive");
        return kernel.h;
    }
    return median_bandwidth(g, particles);
}

void check_phi_finite(const Graph& g, NodeId phi, int particle_index) {
    const double* v = g.value(phi);
    for (int i = 0; i < g.size(phi); ++i) {
        if (!std::isfinite(v[i]))
            throw NumericError("svgd_step: non-finite update for particle " +
                               std::to_string(particle_index));
    }
}

/// Shared body for SVGD/SVPG: scores[j] is the target-gradient node at
/// particle j (already scaled by 1/eta for SVPG).
std::vector<NodeId> kernelized_update(Graph& g, std::span<const NodeId> particles,
                                      std::span<const NodeId> scores, double eps,
                                      const KernelConfig& kernel) {
    const int m = static_cast<int>(particles.size());
    if (m == 1) {
        // k(theta, theta) = 1 and the repulsion term vanishes: plain ascent.
        check_phi_finite(g, scores[0], 0);
        return {g.add(particles[0], g.scale(scores[0], eps))};
    }

    const double h = resolve_bandwidth(g, particles, kernel);
    const int d = g.rows(particles[0]);

    // Pairwise pieces from the snapshot, shared across both directions.
    std::vector<NodeId> kmat(static_cast<std::size_t>(m) * m, graph::kNoNode);
    std::vector<NodeId> diff(static_cast<std::size_t>(m) * m, graph::kNoNode);  // theta_i - theta_j
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < i; ++j) {
            NodeId dij = g.sub(particles[i], particles[j]);
            NodeId k = g.exp(g.scale(g.sq_norm(dij), -1.0 / h));
            diff[static_cast<std::size_t>(i) * m + j] = dij;
            kmat[static_cast<std::size_t>(i) * m + j] = k;
            kmat[static_cast<std::size_t>(j) * m + i] = k;
        }
    }

    std::vector<NodeId> updated(m);
    for (int i = 0; i < m; ++i) {
        NodeId phi = graph::kNoNode;
        for (int j = 0; j < m; ++j) {
            NodeId term;
            if (j == i) {
                term = scores[j];  // k = 1, grad_j k = 0 exactly
            } else {
                NodeId k = kmat[static_cast<std::size_t>(i) * m + j];
                NodeId kfull = g.bcast_full(k, d, 1);
                // grad_{theta_j} k(theta_j, theta_i) = (2/h) k (theta_i - theta_j)
                NodeId dij = i > j ? diff[static_cast<std::size_t>(i) * m + j]
                                   : g.neg(diff[static_cast<std::size_t>(j) * m + i]);
                NodeId repulse = g.scale(g.mul(kfull, dij), 2.0 / h);
                term = g.add(g.mul(kfull, scores[j]), repulse);
            }
            phi = (phi == graph::kNoNode) ? term : g.add(phi, term);
        }
        phi = g.scale(phi, 1.0 / m);
        check_phi_finite(g, phi, i);
        updated[i] = g.add(particles[i], g.scale(phi, eps));
    }
    return updated;
}

}  // namespace

std::vector<NodeId> svgd_step(Graph& g, std::span<const NodeId> particles,
                              const TargetBuilder& log_p, double eps,
                              const KernelConfig& kernel) {
    if (particles.empty()) throw ContractError("svgd_step: empty particle set");
    if (eps <= 0.0) throw ContractError("svgd_step: step size must be positive");
    std::vector<NodeId> scores(particles.size());
    for (std::size_t j = 0; j < particles.size(); ++j)
        scores[j] = g.gradient(log_p(g, particles[j]), particles[j]);
    return kernelized_update(g, particles, scores, eps, kernel);
}

std::vector<NodeId> svgd_n(Graph& g, std::span<const NodeId> particles, const TargetBuilder& log_p,
                           int n, double eps, const KernelConfig& kernel) {
    if (n < 0) throw ContractError("svgd_n: step count must be nonnegative");
    std::vector<NodeId> current(particles.begin(), particles.end());
    for (int s = 0; s < n; ++s) current = svgd_step(g, current, log_p, eps, kernel);
    return current;
}

std::vector<NodeId> svpg_step(Graph& g, std::span<const NodeId> particles,
                              std::span<const NodeId> policy_grads, double eta, double eps,
                              const KernelConfig& kernel) {
    if (particles.empty()) throw ContractError("svpg_step: empty particle set");
    if (particles.size() != policy_grads.size())
        throw ContractError("svpg_step: need one gradient estimate per particle");
    if (eta <= 0.0) throw ContractError("svpg_step: eta must be positive");
    if (eps <= 0.0) throw ContractError("svpg_step: step size must be positive");
    std::vector<NodeId> scores(particles.size());
    for (std::size_t j = 0; j < particles.size(); ++j)
        scores[j] = g.scale(policy_grads[j], 1.0 / eta);
    return kernelized_update(g, particles, scores, eps, kernel);
}

// ---------------------------------------------------------------------------
// bulk value-mode engine
// ---------------------------------------------------------------------------

void svgd_step_values(std::vector<std::vector<double>>& particles, const ScoreFn& score,
                      double eps, const KernelConfig& kernel) {
    const int m = static_cast<int>(particles.size());
    if (m == 0) throw ContractError("svgd_step_values: empty particle set");
    const int d = static_cast<int>(particles[0].size());

    std::vector<std::vector<double>> scores(m, std::vector<double>(d, 0.0));
    score(particles, scores);

    if (m == 1) {
        for (int i = 0; i < d; ++i) particles[0][i] += eps * scores[0][i];
        return;
    }

    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(m) * d);
    for (const auto& p : particles) flat.insert(flat.end(), p.begin(), p.end());
    std::vector<double> score_flat;
    score_flat.reserve(flat.size());
    for (const auto& s : scores) score_flat.insert(score_flat.end(), s.begin(), s.end());

    std::vector<double> sq(static_cast<std::size_t>(m) * m);
    kernels::pairwise_sq_dists(flat.data(), m, d, sq.data());
    double h = kernel.h;
    if (kernel.mode == KernelConfig::Bandwidth::MedianHeuristic) {
        const double med = kernels::median_upper_triangle(sq, m);
        h = med == 0.0 ? 1.0 : med * med / std::log(static_cast<double>(m));
    }
    kernels::svgd_apply(flat.data(), score_flat.data(), sq.data(), m, d, h, eps);

    for (int i = 0; i < m; ++i) {
        for (int k = 0; k < d; ++k) {
            const double v = flat[static_cast<std::size_t>(i) * d + k];
            if (!std::isfinite(v))
                throw NumericError("svgd_step_values: non-finite update for particle " +
                                   std::to_string(i));
            particles[i][k] = v;
        }
    }
}

void svgd_run(std::vector<std::vector<double>>& particles, const ScoreFn& score, int steps,
              double eps, const KernelConfig& kernel) {
    for (int s = 0; s < steps; ++s) svgd_step_values(particles, score, eps, kernel);
}

ScoreFn graph_score(const TargetBuilder& log_p) {
    return [log_p](const std::vector<std::vector<double>>& particles,
                   std::vector<std::vector<double>>& scores) {
        kernels::parallel_for(static_cast<int>(particles.size()), [&](int j) {
            Graph g;
            NodeId theta = g.leaf(particles[j], static_cast<int>(particles[j].size()), 1);
            NodeId f = log_p(g, theta);
            scores[j] = g.value_copy(g.gradient(f, theta));
        });
    };
}

}  // namespace bmaml::svgd

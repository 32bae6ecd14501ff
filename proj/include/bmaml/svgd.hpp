#pragma once

#include <functional>
#include <span>
#include <vector>

#include "bmaml/graph.hpp"
#include "bmaml/param_vector.hpp"

namespace bmaml::svgd {

/// RBF kernel bandwidth selection. MedianHeuristic recomputes
/// h = med^2 / log M from the pre-step particle snapshot each step and is
/// treated as a constant when differentiating (stop-gradient semantics).
struct KernelConfig {
    enum class Bandwidth { MedianHeuristic, Fixed };
    Bandwidth mode = Bandwidth::MedianHeuristic;
    double h = 1.0;

    static KernelConfig median() { return {Bandwidth::MedianHeuristic, 1.0}; }
    static KernelConfig fixed(double h) {
        if (h <= 0.0) throw ContractError("KernelConfig: fixed bandwidth must be positive");
        return {Bandwidth::Fixed, h};
    }
};

/// Builds the differentiable log-target for one particle node.
using TargetBuilder = std::function<graph::NodeId(graph::Graph&, graph::NodeId)>;

/// exp(-||a - b||^2 / h), as a differentiable node.
graph::NodeId rbf_kernel(graph::Graph& g, graph::NodeId a, graph::NodeId b, double h);

/// Median-heuristic bandwidth med^2 / log M from pairwise particle distances;
/// falls back to 1 when all particles coincide. Requires M >= 2.
double median_bandwidth(const std::vector<std::vector<double>>& particles);
double median_bandwidth(const graph::Graph& g, std::span<const graph::NodeId> particles);

/// One synchronous SVGD update in-graph: every particle moves by
/// eps * (1/M) sum_j [ k(theta_j, theta_i) grad_j log p + grad_j k ], with all
/// terms built from the pre-step nodes. The returned nodes are differentiable
/// with respect to the inputs. M == 1 reduces exactly to gradient ascent.
std::vector<graph::NodeId> svgd_step(graph::Graph& g, std::span<const graph::NodeId> particles,
                                     const TargetBuilder& log_p, double eps,
                                     const KernelConfig& kernel);

/// n composed svgd_steps; n == 0 returns the inputs unchanged.
std::vector<graph::NodeId> svgd_n(graph::Graph& g, std::span<const graph::NodeId> particles,
                                  const TargetBuilder& log_p, int n, double eps,
                                  const KernelConfig& kernel);

/// SVPG variant: the target gradient is (1/eta) * grad J per particle, given
/// as already-built nodes (one per particle, matching dimension).
std::vector<graph::NodeId> svpg_step(graph::Graph& g, std::span<const graph::NodeId> particles,
                                     std::span<const graph::NodeId> policy_grads, double eta,
                                     double eps, const KernelConfig& kernel);

// ---------------------------------------------------------------------------
// Bulk value-mode engine for inference-scale runs (posterior sampling,
// meta-test adaptation, active learning). Backed by the serial/OpenMP kernels.
// ---------------------------------------------------------------------------

/// Fills scores[m] with grad log p at particles[m].
using ScoreFn = std::function<void(const std::vector<std::vector<double>>& particles,
                                   std::vector<std::vector<double>>& scores)>;

void svgd_step_values(std::vector<std::vector<double>>& particles, const ScoreFn& score,
                      double eps, const KernelConfig& kernel);

void svgd_run(std::vector<std::vector<double>>& particles, const ScoreFn& score, int steps,
              double eps, const KernelConfig& kernel);

/// ScoreFn evaluating grad log_p via per-particle graphs (parallel across
/// particles, one graph instance per worker).
ScoreFn graph_score(const TargetBuilder& log_p);

}  // namespace bmaml::svgd

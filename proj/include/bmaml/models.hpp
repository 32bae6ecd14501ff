#pragma once

#include <vector>

#include "bmaml/graph.hpp"
#include "bmaml/matrix.hpp"
#include "bmaml/param_vector.hpp"

namespace bmaml::models {

/// Gamma(shape, rate) hyperpriors on the observation precision gamma (a, b)
/// and the weight-prior precision lambda (a_prime, b_prime).
struct HyperpriorConfig {
    double a = 2.0;
    double b = 0.2;
    double a_prime = 2.0;
    double b_prime = 2.0;

    void check() const {
        if (a <= 0 || b <= 0 || a_prime <= 0 || b_prime <= 0)
            throw ContractError("HyperpriorConfig: parameters must be strictly positive");
    }
};

/// Model plus hyperprior; enough to build every task objective.
struct ModelContext {
    MlpSpec spec;
    HyperpriorConfig hyperprior;
};

/// Batched forward pass: params is a flat d x 1 node, X is d_in x T. Returns
/// the network output (out_dim x T): raw values for Linear, logits for
/// Softmax, action means for GaussianPolicy.
graph::NodeId mlp_forward(graph::Graph& g, const MlpSpec& spec, graph::NodeId params,
                          graph::NodeId x);

/// Value-only forward pass (no graph). X: T x d_in row-major, out: T x d_out.
void mlp_forward_values(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                        Matrix& out);

/// log p(D | theta): Gaussian likelihood with precision exp(log_gamma) for the
/// Linear head, softmax categorical for Softmax. Includes normalization
/// constants so values are comparable across particles.
graph::NodeId log_likelihood(graph::Graph& g, const MlpSpec& spec, graph::NodeId params,
                             const Dataset& data);

/// Unnormalized task-train log-posterior over the flat particle:
/// likelihood + N(w|0, lambda^-1) over all weights and biases + Gamma
/// hyperpriors on the precisions, each with the log-space Jacobian folded in.
graph::NodeId log_posterior(graph::Graph& g, const MlpSpec& spec, graph::NodeId params,
                            const Dataset& data, const HyperpriorConfig& hp);

/// Regression predictive: uniform mixture over particles. mean/var per query
/// row; var is the mixture variance including per-particle noise 1/gamma_m.
struct RegressionPredictive {
    std::vector<double> mean;
    std::vector<double> var;
};
RegressionPredictive predictive_regression(const MlpSpec& spec, const ParticleSet& particles,
                                           const Matrix& x);

/// Classification predictive: particle-averaged class probabilities for one
/// input row (sums to 1).
std::vector<double> predictive_classification(const MlpSpec& spec, const ParticleSet& particles,
                                              const double* x);

/// Softmax probabilities of one particle at one input row.
std::vector<double> class_probabilities(const MlpSpec& spec, const ParamVector& params,
                                        const double* x);

/// Mean squared error of the predictive mean over a regression dataset.
double predictive_mse(const MlpSpec& spec, const ParticleSet& particles, const Dataset& data);

/// Argmax accuracy of the averaged class probabilities over a labeled dataset.
double predictive_accuracy(const MlpSpec& spec, const ParticleSet& particles, const Dataset& data);

}  // namespace bmaml::models

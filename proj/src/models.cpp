#include "bmaml/models.hpp"

#include <cmath>
#include <numbers>

#include "bmaml/kernels.hpp"

namespace bmaml::models {

using graph::Graph;
using graph::NodeId;

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)

NodeId apply_activation(Graph& g, Activation act, NodeId z) {
    return act == Activation::Tanh ? g.tanh(z) : g.relu(z);
}
}  // namespace

NodeId mlp_forward(Graph& g, const MlpSpec& spec, NodeId params, NodeId x) {
    if (g.rows(x) != spec.input_dim())
        throw ContractError("mlp_forward: input rows do not match the network input dimension");
    const ParamLayout lay = layout_for(spec);
    const int t = g.cols(x);
    NodeId h = x;
    for (std::size_t l = 0; l < lay.layers.size(); ++l) {
        const auto& seg = lay.layers[l];
        NodeId w = g.slice(params, seg.w_off, seg.out, seg.in);
        NodeId b = g.slice(params, seg.b_off, seg.out, 1);
        NodeId z = g.add(g.matmul(w, h), g.bcast_col(b, t));
        h = (l + 1 == lay.layers.size()) ? z : apply_activation(g, spec.activation, z);
    }
    return h;
}

void mlp_forward_values(const MlpSpec& spec, const ParamVector& params, const Matrix& x,
                        Matrix& out) {
    if (x.cols != spec.input_dim())
        throw ContractError("mlp_forward_values: input cols do not match the input dimension");
    const ParamLayout lay = layout_for(spec);
    const int t = x.rows;
    // Work in transposed (dim x T) form to share the matmul kernel.
    Matrix h(spec.input_dim(), t);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < x.cols; ++j) h.at(j, i) = x.at(i, j);
    Matrix z;
    for (std::size_t l = 0; l < lay.layers.size(); ++l) {
        const auto& seg = lay.layers[l];
        z = Matrix(seg.out, t);
        kernels::matmul(params.data() + seg.w_off, seg.out, seg.in, false, h.data.data(), h.rows,
                        h.cols, false, z.data.data());
        for (int i = 0; i < seg.out; ++i) {
            const double b = params[seg.b_off + i];
            for (int j = 0; j < t; ++j) z.at(i, j) += b;
        }
        if (l + 1 < lay.layers.size()) {
            for (double& v : z.data)
                v = spec.activation == Activation::Tanh ? std::tanh(v) : (v > 0.0 ? v : 0.0);
        }
        h = z;
    }
    out = Matrix(t, h.rows);
    for (int i = 0; i < t; ++i)
        for (int j = 0; j < h.rows; ++j) out.at(i, j) = h.at(j, i);
}

namespace {

NodeId gaussian_log_likelihood(Graph& g, const MlpSpec& spec, const ParamLayout& lay,
                               NodeId params, const Dataset& data) {
    const int n = data.size();
    const int dout = spec.output_dim();
    // Inputs/targets enter as constants in dim x T layout.
    Matrix xt(spec.input_dim(), n), yt(dout, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < spec.input_dim(); ++j) xt.at(j, i) = data.inputs.at(i, j);
        for (int j = 0; j < dout; ++j) yt.at(j, i) = data.targets.at(i, j);
    }
    NodeId x = g.leaf(xt.data, xt.rows, xt.cols);
    NodeId y = g.leaf(yt.data, yt.rows, yt.cols);
    NodeId f = mlp_forward(g, spec, params, x);
    NodeId resid = g.sub(f, y);
    NodeId sse = g.sum_all(g.mul(resid, resid));
    NodeId log_gamma = g.slice(params, lay.log_gamma, 1, 1);
    NodeId gamma = g.exp(log_gamma);
    const double count = static_cast<double>(n) * dout;
    NodeId ll = g.add(g.scale(log_gamma, 0.5 * count), g.scale(g.mul(gamma, sse), -0.5));
    return g.shift(ll, -0.5 * count * kLog2Pi);
}

NodeId categorical_log_likelihood(Graph& g, const MlpSpec& spec, NodeId params,
                                  const Dataset& data) {
    const int n = data.size();
    const int classes = spec.output_dim();
    Matrix xt(spec.input_dim(), n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < spec.input_dim(); ++j) xt.at(j, i) = data.inputs.at(i, j);
    NodeId x = g.leaf(xt.data, xt.rows, xt.cols);
    NodeId logits = mlp_forward(g, spec, params, x);  // classes x n
    NodeId ll = graph::kNoNode;
    for (int i = 0; i < n; ++i) {
        const int label = data.labels[i];
        if (label < 0 || label >= classes)
            throw ContractError("log_likelihood: class index out of range");
        // Column i of the logits, extracted through per-class flat offsets.
        std::vector<NodeId> col_entries;
        col_entries.reserve(classes);
        for (int c = 0; c < classes; ++c) col_entries.push_back(g.slice(logits, c * n + i, 1, 1));
        NodeId col = g.stack(col_entries);
        NodeId term = g.sub(col_entries[label], g.logsumexp(col));
        ll = (ll == graph::kNoNode) ? term : g.add(ll, term);
    }
    return ll;
}

/// log Gamma(x | shape, rate) + log x, the density of the log-space
/// parameterization up to terms constant in the particle:
///   shape*log(rate) + shape*log_x - rate*x - lgamma(shape)
NodeId log_gamma_prior(Graph& g, NodeId log_x, NodeId x, double shape, double rate) {
    NodeId t = g.add(g.scale(log_x, shape), g.scale(x, -rate));
    return g.shift(t, shape * std::log(rate) - std::lgamma(shape));
}

}  // namespace

NodeId log_likelihood(Graph& g, const MlpSpec& spec, NodeId params, const Dataset& data) {
    if (data.size() == 0) throw ContractError("log_likelihood: dataset is empty");
    data.check();
    const ParamLayout lay = layout_for(spec);
    if (spec.head == OutputHead::Softmax) return categorical_log_likelihood(g, spec, params, data);
    if (spec.head == OutputHead::Linear)
        return gaussian_log_likelihood(g, spec, lay, params, data);
    throw ContractError("log_likelihood: unsupported output head");
}

NodeId log_posterior(Graph& g, const MlpSpec& spec, NodeId params, const Dataset& data,
                     const HyperpriorConfig& hp) {
    hp.check();
    const ParamLayout lay = layout_for(spec);
    NodeId ll = log_likelihood(g, spec, params, data);

    // One Gaussian prior with precision lambda over all weights and biases.
    NodeId w = g.slice(params, 0, lay.weight_count, 1);
    NodeId log_lambda = g.slice(params, lay.log_lambda, 1, 1);
    NodeId lambda = g.exp(log_lambda);
    const double nw = static_cast<double>(lay.weight_count);
    NodeId prior = g.add(g.scale(log_lambda, 0.5 * nw),
                         g.scale(g.mul(lambda, g.sq_norm(w)), -0.5));
    prior = g.shift(prior, -0.5 * nw * kLog2Pi);

    NodeId total = g.add(ll, prior);
    if (lay.log_gamma >= 0) {
        // Regression: Gamma(gamma | a, b) and Gamma(lambda | a', b').
        total = g.add(total, log_gamma_prior(g, log_lambda, lambda, hp.a_prime, hp.b_prime));
        NodeId log_gamma = g.slice(params, lay.log_gamma, 1, 1);
        total = g.add(total, log_gamma_prior(g, log_gamma, g.exp(log_gamma), hp.a, hp.b));
    } else {
        // Classification: single Gamma(lambda | a, b).
        total = g.add(total, log_gamma_prior(g, log_lambda, lambda, hp.a, hp.b));
    }
    return total;
}

RegressionPredictive predictive_regression(const MlpSpec& spec, const ParticleSet& particles,
                                           const Matrix& x) {
    particles.check();
    const ParamLayout lay = layout_for(spec);
    const int m = particles.count();
    const int n = x.rows;
    RegressionPredictive pred;
    pred.mean.assign(n, 0.0);
    pred.var.assign(n, 0.0);
    std::vector<double> sq_mean(n, 0.0);
    Matrix out;
    for (int p = 0; p < m; ++p) {
        mlp_forward_values(spec, particles[p], x, out);
        const double noise_var =
            lay.log_gamma >= 0 ? std::exp(-particles[p][lay.log_gamma]) : 0.0;
        for (int i = 0; i < n; ++i) {
            const double mu = out.at(i, 0);
            pred.mean[i] += mu / m;
            sq_mean[i] += (mu * mu + noise_var) / m;
        }
    }
    for (int i = 0; i < n; ++i) pred.var[i] = sq_mean[i] - pred.mean[i] * pred.mean[i];
    return pred;
}

std::vector<double> class_probabilities(const MlpSpec& spec, const ParamVector& params,
                                        const double* x) {
    Matrix xin(1, spec.input_dim());
    std::copy_n(x, spec.input_dim(), xin.data.begin());
    Matrix out;
    mlp_forward_values(spec, params, xin, out);
    const int classes = spec.output_dim();
    double mx = out.at(0, 0);
    for (int c = 1; c < classes; ++c) mx = std::max(mx, out.at(0, c));
    std::vector<double> probs(classes);
    double z = 0.0;
    for (int c = 0; c < classes; ++c) {
        probs[c] = std::exp(out.at(0, c) - mx);
        z += probs[c];
    }
    for (double& p : probs) p /= z;
    return probs;
}

std::vector<double> predictive_classification(const MlpSpec& spec, const ParticleSet& particles,
                                              const double* x) {
    particles.check();
    const int classes = spec.output_dim();
    std::vector<double> avg(classes, 0.0);
    for (int p = 0; p < particles.count(); ++p) {
        const auto probs = class_probabilities(spec, particles[p], x);
        for (int c = 0; c < classes; ++c) avg[c] += probs[c] / particles.count();
    }
    return avg;
}

double predictive_mse(const MlpSpec& spec, const ParticleSet& particles, const Dataset& data) {
    const auto pred = predictive_regression(spec, particles, data.inputs);
    double mse = 0.0;
    for (int i = 0; i < data.size(); ++i) {
        const double err = pred.mean[i] - data.targets.at(i, 0);
        mse += err * err;
    }
    return mse / data.size();
}

double predictive_accuracy(const MlpSpec& spec, const ParticleSet& particles,
                           const Dataset& data) {
    int correct = 0;
    for (int i = 0; i < data.size(); ++i) {
        const auto probs = predictive_classification(spec, particles, data.inputs.row(i));
        int arg = 0;
        for (int c = 1; c < static_cast<int>(probs.size()); ++c)
            if (probs[c] > probs[arg]) arg = c;
        if (arg == data.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / data.size();
}

}  // namespace bmaml::models

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bmaml/models.hpp"
#include "bmaml/tasks.hpp"

using namespace bmaml;
using graph::Graph;
using graph::NodeId;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

ParamVector random_particle(const MlpSpec& spec, std::uint64_t seed) {
    RngStream rng(seed);
    return init_particle(spec, rng);
}

// Independent dense forward pass: plain nested loops, no shared code with
// the graph engine or the value-mode implementation.
std::vector<double> oracle_forward(const MlpSpec& spec, const ParamVector& p,
                                   const std::vector<double>& x) {
    const ParamLayout lay = layout_for(spec);
    std::vector<double> h = x;
    for (std::size_t l = 0; l < lay.layers.size(); ++l) {
        const auto& seg = lay.layers[l];
        std::vector<double> z(seg.out);
        for (int i = 0; i < seg.out; ++i) {
            double s = p[seg.b_off + i];
            for (int j = 0; j < seg.in; ++j) s += p[seg.w_off + i * seg.in + j] * h[j];
            z[i] = s;
        }
        if (l + 1 < lay.layers.size())
            for (double& v : z)
                v = spec.activation == Activation::Tanh ? std::tanh(v) : std::max(v, 0.0);
        h = z;
    }
    return h;
}

double log_gamma_pdf(double x, double shape, double rate) {
    return shape * std::log(rate) + (shape - 1) * std::log(x) - rate * x - std::lgamma(shape);
}

// Literal evaluation of the regression posterior density product in log space.
double oracle_log_posterior_regression(const MlpSpec& spec, const ParamVector& p,
                                       const Dataset& d, const models::HyperpriorConfig& hp) {
    const ParamLayout lay = layout_for(spec);
    const double gamma = std::exp(p[lay.log_gamma]);
    const double lambda = std::exp(p[lay.log_lambda]);
    double lp = 0.0;
    for (int i = 0; i < d.size(); ++i) {
        std::vector<double> x(d.inputs.row(i), d.inputs.row(i) + d.inputs.cols);
        const auto f = oracle_forward(spec, p, x);
        for (int j = 0; j < d.targets.cols; ++j) {
            const double r = d.targets.at(i, j) - f[j];
            lp += 0.5 * std::log(gamma) - 0.5 * kLog2Pi - 0.5 * gamma * r * r;
        }
    }
    for (int i = 0; i < lay.weight_count; ++i)
        lp += 0.5 * std::log(lambda) - 0.5 * kLog2Pi - 0.5 * lambda * p[i] * p[i];
    lp += log_gamma_pdf(gamma, hp.a, hp.b) + p[lay.log_gamma];
    lp += log_gamma_pdf(lambda, hp.a_prime, hp.b_prime) + p[lay.log_lambda];
    return lp;
}

double oracle_log_posterior_classification(const MlpSpec& spec, const ParamVector& p,
                                           const Dataset& d, const models::HyperpriorConfig& hp) {
    const ParamLayout lay = layout_for(spec);
    const double lambda = std::exp(p[lay.log_lambda]);
    double lp = 0.0;
    for (int i = 0; i < d.size(); ++i) {
        std::vector<double> x(d.inputs.row(i), d.inputs.row(i) + d.inputs.cols);
        const auto logits = oracle_forward(spec, p, x);
        double mx = logits[0];
        for (double v : logits) mx = std::max(mx, v);
        double z = 0.0;
        for (double v : logits) z += std::exp(v - mx);
        lp += logits[d.labels[i]] - (mx + std::log(z));
    }
    for (int i = 0; i < lay.weight_count; ++i)
        lp += 0.5 * std::log(lambda) - 0.5 * kLog2Pi - 0.5 * lambda * p[i] * p[i];
    lp += log_gamma_pdf(lambda, hp.a, hp.b) + p[lay.log_lambda];
    return lp;
}

double eval_log_posterior(const MlpSpec& spec, const ParamVector& p, const Dataset& d,
                          const models::HyperpriorConfig& hp) {
    Graph g;
    NodeId pn = g.leaf(p, static_cast<int>(p.size()), 1);
    return g.value_scalar(models::log_posterior(g, spec, pn, d, hp));
}

double eval_log_likelihood(const MlpSpec& spec, const ParamVector& p, const Dataset& d) {
    Graph g;
    NodeId pn = g.leaf(p, static_cast<int>(p.size()), 1);
    return g.value_scalar(models::log_likelihood(g, spec, pn, d));
}

}  // namespace

TEST_CASE("zero weights give zero output through a linear head") {
    MlpSpec spec{{2, 8, 3}, Activation::Tanh, OutputHead::Linear};
    ParamVector p(layout_for(spec).dim, 0.0);
    Matrix x(1, 2);
    x.at(0, 0) = 0.7;
    x.at(0, 1) = -0.2;
    Matrix out;
    models::mlp_forward_values(spec, p, x, out);
    for (int j = 0; j < 3; ++j) CHECK(out.at(0, j) == 0.0);
}

TEST_CASE("single [1,1] layer with weight w and zero bias computes w*x") {
    MlpSpec spec{{1, 1}, Activation::Tanh, OutputHead::Linear};
    ParamVector p(layout_for(spec).dim, 0.0);
    p[0] = 2.5;  // weight
    Matrix x(1, 1);
    x.at(0, 0) = 1.2;
    Matrix out;
    models::mlp_forward_values(spec, p, x, out);
    CHECK(out.at(0, 0) == doctest::Approx(2.5 * 1.2).epsilon(1e-15));
}

TEST_CASE("graph and value-mode forward match the hand-rolled oracle to 1e-12") {
    MlpSpec spec{{3, 10, 7, 2}, Activation::Tanh, OutputHead::Linear};
    const ParamVector p = random_particle(spec, 17);
    RngStream rng(18);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> x = {rng.normal(), rng.normal(), rng.normal()};
        const auto want = oracle_forward(spec, p, x);

        Matrix xin(1, 3);
        std::copy(x.begin(), x.end(), xin.data.begin());
        Matrix out;
        models::mlp_forward_values(spec, p, xin, out);
        for (int j = 0; j < 2; ++j) CHECK(out.at(0, j) == doctest::Approx(want[j]).epsilon(1e-12));

        Graph g;
        NodeId pn = g.leaf(p, static_cast<int>(p.size()), 1);
        NodeId xn = g.leaf(x, 3, 1);
        NodeId f = models::mlp_forward(g, spec, pn, xn);
        for (int j = 0; j < 2; ++j) CHECK(g.value(f)[j] == doctest::Approx(want[j]).epsilon(1e-12));
    }
}

TEST_CASE("forward rejects mismatched input dimension") {
    MlpSpec spec{{3, 4, 1}, Activation::Tanh, OutputHead::Linear};
    const ParamVector p = random_particle(spec, 19);
    Graph g;
    NodeId pn = g.leaf(p, static_cast<int>(p.size()), 1);
    NodeId xn = g.zeros(2, 1);
    CHECK_THROWS_AS(models::mlp_forward(g, spec, pn, xn), ContractError);
}

TEST_CASE("zero-residual likelihood with gamma=1 is -log(2 pi)/2 per point") {
    MlpSpec spec{{1, 1}, Activation::Tanh, OutputHead::Linear};
    ParamVector p(layout_for(spec).dim, 0.0);  // f(x) = 0, log_gamma = 0
    Dataset d;
    d.inputs = Matrix(1, 1);
    d.targets = Matrix(1, 1);  // y = 0 = f(x)
    CHECK(eval_log_likelihood(spec, p, d) == doctest::Approx(-0.5 * kLog2Pi).epsilon(1e-15));
}

TEST_CASE("duplicating every data point doubles the likelihood term only") {
    MlpSpec spec{{1, 6, 1}, Activation::Tanh, OutputHead::Linear};
    const ParamVector p = random_particle(spec, 23);
    RngStream rng(24);
    Dataset d;
    d.inputs = Matrix(4, 1);
    d.targets = Matrix(4, 1);
    for (int i = 0; i < 4; ++i) {
        d.inputs.at(i, 0) = rng.uniform(-2, 2);
        d.targets.at(i, 0) = rng.normal();
    }
    const Dataset doubled = concat(d, d);
    const double ll = eval_log_likelihood(spec, p, d);
    CHECK(eval_log_likelihood(spec, p, doubled) == doctest::Approx(2 * ll).epsilon(1e-12));

    models::HyperpriorConfig hp;
    const double prior = eval_log_posterior(spec, p, d, hp) - ll;
    const double prior2 = eval_log_posterior(spec, p, doubled, hp) - 2 * ll;
    CHECK(prior2 == doctest::Approx(prior).epsilon(1e-12));
}

TEST_CASE("regression posterior matches the literal density-product oracle to 1e-10") {
    MlpSpec spec{{1, 5, 1}, Activation::Tanh, OutputHead::Linear};
    models::HyperpriorConfig hp;
    RngStream rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        ParamVector p = random_particle(spec, 100 + trial);
        p[layout_for(spec).log_gamma] = rng.uniform(-1, 1);
        p[layout_for(spec).log_lambda] = rng.uniform(-1, 1);
        Dataset d;
        d.inputs = Matrix(3, 1);
        d.targets = Matrix(3, 1);
        for (int i = 0; i < 3; ++i) {
            d.inputs.at(i, 0) = rng.uniform(-5, 5);
            d.targets.at(i, 0) = rng.normal();
        }
        const double want = oracle_log_posterior_regression(spec, p, d, hp);
        CHECK(eval_log_posterior(spec, p, d, hp) == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("uniform logits give -N log C and logits are shift invariant") {
    const int ways = 4, n = 6;
    MlpSpec spec{{3, 5, ways}, Activation::Relu, OutputHead::Softmax};
    ParamVector zero(layout_for(spec).dim, 0.0);
    RngStream rng(41);
    Dataset d;
    d.inputs = Matrix(n, 3);
    d.labels.resize(n);
    for (int i = 0; i < n; ++i) {
        d.labels[i] = i % ways;
        for (int j = 0; j < 3; ++j) d.inputs.at(i, j) = rng.normal();
    }
    CHECK(eval_log_likelihood(spec, zero, d) ==
          doctest::Approx(-n * std::log(static_cast<double>(ways))).epsilon(1e-12));

    // Adding a constant to every output bias shifts all logits equally.
    ParamVector p = random_particle(spec, 42);
    ParamVector shifted = p;
    const auto lay = layout_for(spec);
    for (int c = 0; c < ways; ++c) shifted[lay.layers.back().b_off + c] += 3.7;
    CHECK(eval_log_likelihood(spec, shifted, d) ==
          doctest::Approx(eval_log_likelihood(spec, p, d)).epsilon(1e-10));
}

TEST_CASE("classification posterior matches its oracle to 1e-10") {
    MlpSpec spec{{2, 6, 3}, Activation::Relu, OutputHead::Softmax};
    models::HyperpriorConfig hp;
    RngStream rng(51);
    for (int trial = 0; trial < 5; ++trial) {
        ParamVector p = random_particle(spec, 200 + trial);
        p[layout_for(spec).log_lambda] = rng.uniform(-1, 1);
        Dataset d;
        d.inputs = Matrix(4, 2);
        d.labels = {0, 1, 2, 1};
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 2; ++j) d.inputs.at(i, j) = rng.normal();
        const double want = oracle_log_posterior_classification(spec, p, d, hp);
        CHECK(eval_log_posterior(spec, p, d, hp) == doctest::Approx(want).epsilon(1e-10));
    }
}

TEST_CASE("posterior gradient matches finite differences on K=5 sinusoid data") {
    MlpSpec spec{{1, 8, 1}, Activation::Tanh, OutputHead::Linear};
    models::HyperpriorConfig hp;
    RngStream task_rng(61);
    const Task task = tasks::sample_sinusoid_task(task_rng, 5);
    graph::ScalarField f = [&](Graph& g, NodeId p) {
        return models::log_posterior(g, spec, p, task.trn, hp);
    };
    for (int trial = 0; trial < 3; ++trial) {
        const ParamVector p = random_particle(spec, 300 + trial);
        const auto got = graph::grad(f, p);
        const auto fd = graph::finite_diff_grad(
            [&](std::span<const double> x) { return graph::eval_field(f, x); }, p, 1e-5);
        double num = 0, den = 0;
        for (std::size_t i = 0; i < got.size(); ++i) {
            num += (got[i] - fd[i]) * (got[i] - fd[i]);
            den += fd[i] * fd[i];
        }
        CHECK(std::sqrt(num / den) <= 1e-5);
    }
}

TEST_CASE("predictive reductions and averaging") {
    MlpSpec spec{{2, 6, 3}, Activation::Relu, OutputHead::Softmax};
    const ParamVector p0 = random_particle(spec, 71);
    const ParamVector p1 = random_particle(spec, 72);
    const double x[2] = {0.4, -1.1};

    SUBCASE("M=1 equals the single model") {
        ParticleSet one;
        one.particles = {p0};
        const auto avg = models::predictive_classification(spec, one, x);
        const auto single = models::class_probabilities(spec, p0, x);
        for (int c = 0; c < 3; ++c) CHECK(avg[c] == doctest::Approx(single[c]).epsilon(1e-15));
    }
    SUBCASE("M identical particles equal M=1") {
        ParticleSet three;
        three.particles = {p0, p0, p0};
        const auto avg = models::predictive_classification(spec, three, x);
        const auto single = models::class_probabilities(spec, p0, x);
        for (int c = 0; c < 3; ++c) CHECK(avg[c] == doctest::Approx(single[c]).epsilon(1e-12));
    }
    SUBCASE("M=2 averages the per-particle probabilities elementwise") {
        ParticleSet two;
        two.particles = {p0, p1};
        const auto avg = models::predictive_classification(spec, two, x);
        const auto a = models::class_probabilities(spec, p0, x);
        const auto b = models::class_probabilities(spec, p1, x);
        for (int c = 0; c < 3; ++c)
            CHECK(avg[c] == doctest::Approx(0.5 * (a[c] + b[c])).epsilon(1e-12));
    }
    SUBCASE("averaged predictive is a probability vector") {
        ParticleSet two;
        two.particles = {p0, p1};
        const auto avg = models::predictive_classification(spec, two, x);
        double sum = 0.0;
        for (double v : avg) {
            CHECK(v >= 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("regression predictive mixes means and noise variances") {
    MlpSpec spec{{1, 4, 1}, Activation::Tanh, OutputHead::Linear};
    ParticleSet two;
    two.particles = {random_particle(spec, 81), random_particle(spec, 82)};
    Matrix x(3, 1);
    x.at(0, 0) = -1.0;
    x.at(1, 0) = 0.0;
    x.at(2, 0) = 2.0;
    const auto pred = models::predictive_regression(spec, two, x);
    Matrix o0, o1;
    models::mlp_forward_values(spec, two[0], x, o0);
    models::mlp_forward_values(spec, two[1], x, o1);
    for (int i = 0; i < 3; ++i) {
        CHECK(pred.mean[i] == doctest::Approx(0.5 * (o0.at(i, 0) + o1.at(i, 0))).epsilon(1e-12));
        CHECK(pred.var[i] >= 0.0);
    }
}

TEST_CASE("likelihood term is nonincreasing as noise is added to a perfect fit") {
    MlpSpec spec{{1, 1}, Activation::Tanh, OutputHead::Linear};
    ParamVector p(layout_for(spec).dim, 0.0);  // f(x) = 0 fits zero targets exactly
    RngStream rng(91);
    std::vector<double> noise(6);
    for (double& v : noise) v = rng.normal();
    double prev = std::numeric_limits<double>::infinity();
    for (double scale : {0.0, 0.1, 0.5, 1.0, 2.0}) {
        Dataset d;
        d.inputs = Matrix(6, 1);
        d.targets = Matrix(6, 1);
        for (int i = 0; i < 6; ++i) {
            d.inputs.at(i, 0) = i - 3.0;
            d.targets.at(i, 0) = scale * noise[i];
        }
        const double ll = eval_log_likelihood(spec, p, d);
        CHECK(ll <= prev);
        prev = ll;
    }
}

TEST_CASE("empty dataset is a contract error") {
    MlpSpec spec{{1, 1}, Activation::Tanh, OutputHead::Linear};
    ParamVector p(layout_for(spec).dim, 0.0);
    Dataset d;
    Graph g;
    NodeId pn = g.leaf(p, static_cast<int>(p.size()), 1);
    CHECK_THROWS_AS(models::log_likelihood(g, spec, pn, d), ContractError);
}

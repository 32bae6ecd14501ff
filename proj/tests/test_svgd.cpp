#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "bmaml/models.hpp"
#include "bmaml/svgd.hpp"
#include "bmaml/tasks.hpp"

using namespace bmaml;
using graph::Graph;
using graph::NodeId;

namespace {

std::vector<double> random_vec(RngStream& rng, int n, double sd = 1.0) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal(0.0, sd);
    return v;
}

// 1-D standard normal target.
svgd::TargetBuilder std_normal_target() {
    return [](Graph& g, NodeId theta) { return g.scale(g.sq_norm(theta), -0.5); };
}

}  // namespace

TEST_CASE("rbf kernel analytic values") {
    Graph g;
    std::vector<double> a = {1.0, 2.0}, b = {1.0, 2.0};
    NodeId an = g.leaf(a, 2, 1), bn = g.leaf(b, 2, 1);
    CHECK(g.value_scalar(svgd::rbf_kernel(g, an, bn, 3.0)) == 1.0);

    // ||a-b||^2 = h gives exp(-1)
    std::vector<double> c = {1.0 + std::sqrt(3.0), 2.0};
    NodeId cn = g.leaf(c, 2, 1);
    CHECK(g.value_scalar(svgd::rbf_kernel(g, an, cn, 3.0)) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-12));

    CHECK_THROWS_AS(svgd::rbf_kernel(g, an, g.zeros(3, 1), 1.0), ContractError);
    CHECK_THROWS_AS(svgd::rbf_kernel(g, an, bn, 0.0), ContractError);
}

TEST_CASE("rbf kernel gradient matches finite differences") {
    RngStream rng(3);
    const auto a = random_vec(rng, 4);
    const double h = 1.7;
    graph::ScalarField f = [&](Graph& g, NodeId x) {
        NodeId an = g.leaf(a, 4, 1);
        return svgd::rbf_kernel(g, an, x, h);
    };
    const auto x = random_vec(rng, 4);
    const auto got = graph::grad(f, x);
    const auto fd = graph::finite_diff_grad(
        [&](std::span<const double> v) { return graph::eval_field(f, v); }, x, 1e-6);
    for (int i = 0; i < 4; ++i) CHECK(got[i] == doctest::Approx(fd[i]).epsilon(1e-6));
}

TEST_CASE("median bandwidth") {
    SUBCASE("two particles at distance 2 give 4/log 2") {
        std::vector<std::vector<double>> p = {{0.0, 0.0}, {2.0, 0.0}};
        CHECK(svgd::median_bandwidth(p) == doctest::Approx(4.0 / std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("coincident particles fall back to 1") {
        std::vector<std::vector<double>> p = {{1.0}, {1.0}, {1.0}};
        CHECK(svgd::median_bandwidth(p) == 1.0);
    }
    SUBCASE("five random particles match a brute-force enumeration") {
        RngStream rng(5);
        std::vector<std::vector<double>> p(5);
        for (auto& v : p) v = random_vec(rng, 3);
        std::vector<double> dists;
        for (int i = 0; i < 5; ++i)
            for (int j = i + 1; j < 5; ++j) {
                double s = 0;
                for (int k = 0; k < 3; ++k) s += (p[i][k] - p[j][k]) * (p[i][k] - p[j][k]);
                dists.push_back(std::sqrt(s));
            }
        std::sort(dists.begin(), dists.end());
        const double med = 0.5 * (dists[4] + dists[5]);  // 10 pairwise distances
        CHECK(svgd::median_bandwidth(p) ==
              doctest::Approx(med * med / std::log(5.0)).epsilon(1e-12));
    }
    SUBCASE("single particle is a contract error") {
        std::vector<std::vector<double>> p = {{1.0, 2.0}};
        CHECK_THROWS_AS(svgd::median_bandwidth(p), ContractError);
    }
}

TEST_CASE("M=1 svgd_step is exactly one gradient-ascent step") {
    Graph g;
    RngStream rng(7);
    const auto x = random_vec(rng, 3);
    NodeId theta = g.leaf(x, 3, 1);
    NodeId particles[1] = {theta};
    const auto out = svgd::svgd_step(g, particles, std_normal_target(), 0.1,
                                     svgd::KernelConfig::median());
    // ascent: theta + eps * (-theta)
    for (int i = 0; i < 3; ++i) CHECK(g.value(out[0])[i] == x[i] + 0.1 * (-x[i]));
}

TEST_CASE("with zero score two distinct particles move strictly apart") {
    svgd::TargetBuilder flat = [](Graph& g, NodeId theta) {
        return g.sum_all(g.stop_grad(theta));  // gradient is exactly zero
    };
    Graph g;
    std::vector<double> a = {-0.5}, b = {0.5};
    NodeId particles[2] = {g.leaf(a, 1, 1), g.leaf(b, 1, 1)};
    const auto out = svgd::svgd_step(g, particles, flat, 0.05, svgd::KernelConfig::fixed(1.0));
    CHECK(g.value_scalar(out[0]) < -0.5);
    CHECK(g.value_scalar(out[1]) > 0.5);
    CHECK(g.value_scalar(out[0]) == doctest::Approx(-g.value_scalar(out[1])).epsilon(1e-15));
}

TEST_CASE("M=2 on a 1-D standard normal matches the hand-scripted update") {
    // theta = {-1, +1}, fixed h = 2, eps = 0.1; scripted directly from the
    // update rule with score(theta) = -theta.
    const double h = 2.0, eps = 0.1;
    const double k12 = std::exp(-4.0 / h);
    auto phi = [&](double ti, double tj) {
        const double score_i = -ti, score_j = -tj;
        return 0.5 * (score_i + k12 * score_j + (2.0 / h) * k12 * (ti - tj));
    };
    const double want0 = -1.0 + eps * phi(-1.0, 1.0);
    const double want1 = 1.0 + eps * phi(1.0, -1.0);

    Graph g;
    std::vector<double> a = {-1.0}, b = {1.0};
    NodeId particles[2] = {g.leaf(a, 1, 1), g.leaf(b, 1, 1)};
    const auto out =
        svgd::svgd_step(g, particles, std_normal_target(), eps, svgd::KernelConfig::fixed(h));
    CHECK(g.value_scalar(out[0]) == doctest::Approx(want0).epsilon(1e-14));
    CHECK(g.value_scalar(out[1]) == doctest::Approx(want1).epsilon(1e-14));
}

TEST_CASE("svgd_n composition") {
    SUBCASE("n=0 is the identity") {
        Graph g;
        RngStream rng(11);
        const auto x = random_vec(rng, 4);
        NodeId particles[1] = {g.leaf(x, 4, 1)};
        const auto out =
            svgd::svgd_n(g, particles, std_normal_target(), 0, 0.1, svgd::KernelConfig::median());
        CHECK(out[0] == particles[0]);
    }
    SUBCASE("n=2 with M=1 equals two composed ascent steps") {
        Graph g;
        std::vector<double> x = {0.8};
        NodeId particles[1] = {g.leaf(x, 1, 1)};
        const auto out =
            svgd::svgd_n(g, particles, std_normal_target(), 2, 0.1, svgd::KernelConfig::median());
        const double one = 0.8 + 0.1 * (-0.8);
        const double two = one + 0.1 * (-one);
        CHECK(g.value_scalar(out[0]) == doctest::Approx(two).epsilon(1e-15));
    }
}

TEST_CASE("M=1 equivalence to gradient ascent holds to 1e-12 over 100 steps") {
    RngStream rng(13);
    const auto x0 = random_vec(rng, 5);

    Graph g;
    NodeId particles[1] = {g.leaf(x0, 5, 1)};
    const auto out =
        svgd::svgd_n(g, particles, std_normal_target(), 100, 0.03, svgd::KernelConfig::median());

    std::vector<double> manual = x0;
    for (int s = 0; s < 100; ++s)
        for (double& v : manual) v += 0.03 * (-v);
    for (int i = 0; i < 5; ++i)
        CHECK(std::abs(g.value(out[0])[i] - manual[i]) <= 1e-12);
}

TEST_CASE("unrolled svgd_n meta-gradient matches finite differences on a 1-4-1 net") {
    MlpSpec spec{{1, 4, 1}, Activation::Tanh, OutputHead::Linear};
    models::HyperpriorConfig hp;
    const int d = layout_for(spec).dim;
    const int m = 2;
    RngStream task_rng(17);
    const Task task = tasks::sample_sinusoid_task(task_rng, 3);
    const auto kernel = svgd::KernelConfig::fixed(5.0);

    // Scalar function of the flattened particle set: sum of entries of Theta_n.
    graph::ScalarField unrolled = [&](Graph& g, NodeId flat) {
        std::vector<NodeId> particles(m);
        for (int p = 0; p < m; ++p) particles[p] = g.slice(flat, p * d, d, 1);
        svgd::TargetBuilder target = [&](Graph& gg, NodeId theta) {
            return models::log_posterior(gg, spec, theta, task.trn, hp);
        };
        const auto out = svgd::svgd_n(g, particles, target, 1, 0.01, kernel);
        NodeId s = out[0];
        for (int p = 1; p < m; ++p) s = g.add(s, out[p]);
        return g.sum_all(s);
    };

    std::vector<double> flat0;
    for (int p = 0; p < m; ++p) {
        RngStream rng(500 + p);
        const auto part = init_particle(spec, rng);
        flat0.insert(flat0.end(), part.begin(), part.end());
    }
    const auto got = graph::grad(unrolled, flat0);
    const auto fd = graph::finite_diff_grad(
        [&](std::span<const double> x) { return graph::eval_field(unrolled, x); }, flat0, 1e-5);
    double num = 0, den = 0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        num += (got[i] - fd[i]) * (got[i] - fd[i]);
        den += fd[i] * fd[i];
    }
    CHECK(std::sqrt(num / den) <= 1e-4);
}

TEST_CASE("svpg reductions and scripted case") {
    SUBCASE("M=1 gives theta + (eps/eta) gradJ") {
        Graph g;
        std::vector<double> x = {1.0, -2.0}, gj = {0.5, 0.25};
        NodeId theta = g.leaf(x, 2, 1);
        NodeId grad = g.leaf(gj, 2, 1);
        NodeId particles[1] = {theta};
        NodeId grads[1] = {grad};
        const auto out =
            svgd::svpg_step(g, particles, grads, 2.0, 0.1, svgd::KernelConfig::median());
        for (int i = 0; i < 2; ++i)
            CHECK(g.value(out[0])[i] == doctest::Approx(x[i] + (0.1 / 2.0) * gj[i]).epsilon(1e-15));
    }
    SUBCASE("large eta leaves only the repulsion term") {
        Graph g;
        std::vector<double> a = {-0.3}, b = {0.3}, ga = {10.0}, gb = {-10.0};
        NodeId particles[2] = {g.leaf(a, 1, 1), g.leaf(b, 1, 1)};
        NodeId grads[2] = {g.leaf(ga, 1, 1), g.leaf(gb, 1, 1)};
        const auto out =
            svgd::svpg_step(g, particles, grads, 1e9, 0.1, svgd::KernelConfig::fixed(1.0));
        // with eta -> inf the update direction is pure repulsion: apart
        CHECK(g.value_scalar(out[0]) < -0.3);
        CHECK(g.value_scalar(out[1]) > 0.3);
    }
    SUBCASE("M=2 with scripted gradients matches the direct formula") {
        const double h = 1.5, eps = 0.2, eta = 0.7;
        const double t0 = -0.4, t1 = 0.9, g0 = 1.3, g1 = -0.8;
        const double k = std::exp(-(t1 - t0) * (t1 - t0) / h);
        auto phi = [&](double ti, double tj, double gi, double gj) {
            return 0.5 * ((gi / eta) + k * (gj / eta) + (2.0 / h) * k * (ti - tj));
        };
        Graph g;
        std::vector<double> a = {t0}, b = {t1}, ga = {g0}, gb = {g1};
        NodeId particles[2] = {g.leaf(a, 1, 1), g.leaf(b, 1, 1)};
        NodeId grads[2] = {g.leaf(ga, 1, 1), g.leaf(gb, 1, 1)};
        const auto out =
            svgd::svpg_step(g, particles, grads, eta, eps, svgd::KernelConfig::fixed(h));
        CHECK(g.value_scalar(out[0]) ==
              doctest::Approx(t0 + eps * phi(t0, t1, g0, g1)).epsilon(1e-14));
        CHECK(g.value_scalar(out[1]) ==
              doctest::Approx(t1 + eps * phi(t1, t0, g1, g0)).epsilon(1e-14));
    }
    SUBCASE("one gradient per particle is required") {
        Graph g;
        NodeId particles[2] = {g.zeros(1, 1), g.zeros(1, 1)};
        NodeId grads[1] = {g.zeros(1, 1)};
        CHECK_THROWS_AS(
            svgd::svpg_step(g, particles, grads, 1.0, 0.1, svgd::KernelConfig::fixed(1.0)),
            ContractError);
    }
}

TEST_CASE("svgd_step is equivariant under particle relabeling") {
    MlpSpec spec{{1, 3, 1}, Activation::Tanh, OutputHead::Linear};
    models::HyperpriorConfig hp;
    RngStream task_rng(19);
    const Task task = tasks::sample_sinusoid_task(task_rng, 3);
    svgd::TargetBuilder target = [&](Graph& g, NodeId theta) {
        return models::log_posterior(g, spec, theta, task.trn, hp);
    };
    const int m = 3;
    std::vector<ParamVector> parts(m);
    for (int p = 0; p < m; ++p) {
        RngStream rng(700 + p);
        parts[p] = init_particle(spec, rng);
    }
    const int perm[3] = {2, 0, 1};

    auto run = [&](const std::vector<ParamVector>& order) {
        Graph g;
        std::vector<NodeId> nodes(m);
        for (int p = 0; p < m; ++p)
            nodes[p] = g.leaf(order[p], static_cast<int>(order[p].size()), 1);
        const auto out = svgd::svgd_step(g, nodes, target, 0.01, svgd::KernelConfig::median());
        std::vector<std::vector<double>> values;
        for (NodeId n : out) values.push_back(g.value_copy(n));
        return values;
    };

    const auto direct = run(parts);
    std::vector<ParamVector> permuted(m);
    for (int p = 0; p < m; ++p) permuted[p] = parts[perm[p]];
    const auto afterwards = run(permuted);

    for (int p = 0; p < m; ++p)
        for (std::size_t i = 0; i < direct[0].size(); ++i)
            CHECK(afterwards[p][i] == doctest::Approx(direct[perm[p]][i]).epsilon(1e-12));
}

TEST_CASE("value-mode engine agrees with the graph path") {
    MlpSpec spec{{1, 3, 1}, Activation::Tanh, OutputHead::Linear};
    models::HyperpriorConfig hp;
    RngStream task_rng(23);
    const Task task = tasks::sample_sinusoid_task(task_rng, 4);
    svgd::TargetBuilder target = [&](Graph& g, NodeId theta) {
        return models::log_posterior(g, spec, theta, task.trn, hp);
    };
    const int m = 4;
    std::vector<std::vector<double>> particles(m);
    for (int p = 0; p < m; ++p) {
        RngStream rng(900 + p);
        particles[p] = init_particle(spec, rng);
    }

    Graph g;
    std::vector<NodeId> nodes(m);
    for (int p = 0; p < m; ++p)
        nodes[p] = g.leaf(particles[p], static_cast<int>(particles[p].size()), 1);
    const auto graph_out = svgd::svgd_step(g, nodes, target, 0.01, svgd::KernelConfig::median());

    auto value_particles = particles;
    svgd::svgd_step_values(value_particles, svgd::graph_score(target), 0.01,
                           svgd::KernelConfig::median());

    for (int p = 0; p < m; ++p)
        for (std::size_t i = 0; i < particles[0].size(); ++i)
            CHECK(value_particles[p][i] ==
                  doctest::Approx(g.value(graph_out[p])[i]).epsilon(1e-12));
}

TEST_CASE("bulk svgd recovers a 1-D gaussian (smoke)") {
    // Short version of the full posterior-recovery acceptance run.
    const double mu = 3.0, sd = 2.0;
    svgd::ScoreFn score = [&](const std::vector<std::vector<double>>& p,
                              std::vector<std::vector<double>>& s) {
        for (std::size_t i = 0; i < p.size(); ++i) s[i][0] = -(p[i][0] - mu) / (sd * sd);
    };
    const int m = 30;
    std::vector<std::vector<double>> particles(m, std::vector<double>(1, 0.0));
    RngStream rng(31);
    for (auto& p : particles) p[0] = rng.normal();
    svgd::svgd_run(particles, score, 800, 0.05, svgd::KernelConfig::median());

    double mean = 0.0;
    for (const auto& p : particles) mean += p[0] / m;
    double var = 0.0;
    for (const auto& p : particles) var += (p[0] - mean) * (p[0] - mean) / m;
    CHECK(mean == doctest::Approx(mu).epsilon(0.2));
    CHECK(std::sqrt(var) == doctest::Approx(sd).epsilon(0.35));
}

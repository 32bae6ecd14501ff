#include "bmaml/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>

namespace bmaml::tasks {

SinusoidParams sample_sinusoid_params(RngStream& rng) {
    SinusoidParams p;
    p.amplitude = rng.uniform(0.1, 5.0);
    p.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    p.frequency = rng.uniform(0.5, 2.0);
    return p;
}

namespace {

Dataset sorted_sinusoid_points(const SinusoidParams& p, int n, RngStream& rng) {
    Dataset d;
    d.inputs = Matrix(n, 1);
    d.targets = Matrix(n, 1);
    for (int i = 0; i < n; ++i) {
        const double x = rng.uniform(-5.0, 5.0);
        const double y = p.amplitude * std::sin(p.frequency * x + p.phase) +
                         rng.normal(0.0, p.noise_std());
        d.inputs.at(i, 0) = x;
        d.targets.at(i, 0) = y;
    }
    return d;
}

}  // namespace

Task sample_sinusoid_task(RngStream& rng, int shots, int test_count) {
    if (shots < 1) throw ContractError("sample_sinusoid_task: shots must be >= 1");
    const SinusoidParams p = sample_sinusoid_params(rng);
    Task t;
    t.trn = sorted_sinusoid_points(p, shots, rng);
    t.val = sorted_sinusoid_points(p, shots, rng);
    t.tst = sorted_sinusoid_points(p, test_count, rng);
    return t;
}

ClassTask sample_synthetic_classification_task(RngStream& rng, int ways, int shots, int pool_size,
                                               int dim, int test_per_class, double mean_scale) {
    if (ways < 2) throw ContractError("sample_synthetic_classification_task: ways must be >= 2");
    if (shots < 1) throw ContractError("sample_synthetic_classification_task: shots must be >= 1");
    const double cluster_sd = std::sqrt(0.5);  // covariance 0.5 * I

    Matrix means(ways, dim);
    for (int c = 0; c < ways; ++c)
        for (int j = 0; j < dim; ++j) means.at(c, j) = rng.uniform(-mean_scale, mean_scale);

    auto draw = [&](Dataset& d, int per_class) {
        const int n = ways * per_class;
        d.inputs = Matrix(n, dim);
        d.labels.resize(n);
        int row = 0;
        for (int c = 0; c < ways; ++c) {
            for (int k = 0; k < per_class; ++k, ++row) {
                d.labels[row] = c;
                for (int j = 0; j < dim; ++j)
                    d.inputs.at(row, j) = rng.normal(means.at(c, j), cluster_sd);
            }
        }
    };

    ClassTask ct;
    draw(ct.task.trn, shots);
    draw(ct.task.val, shots);
    draw(ct.task.tst, test_per_class);

    ct.pool_inputs = Matrix(pool_size, dim);
    ct.pool_labels.resize(pool_size);
    for (int i = 0; i < pool_size; ++i) {
        const int c = rng.uniform_int(ways);
        ct.pool_labels[i] = c;
        for (int j = 0; j < dim; ++j) ct.pool_inputs.at(i, j) = rng.normal(means.at(c, j), cluster_sd);
    }
    return ct;
}

NavTask sample_nav_task(RngStream& rng) {
    return NavTask{{rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)}};
}

NavState nav_reset(const NavTask&) { return NavState{{0.0, 0.0}, 0}; }

NavStepResult nav_step(const NavTask& task, const NavState& state,
                       const std::array<double, 2>& action) {
    NavStepResult r;
    r.state.position = state.position;
    for (int i = 0; i < 2; ++i) {
        const double a = std::clamp(action[i], -kNavActionLimit, kNavActionLimit);
        r.state.position[i] += a;
    }
    r.state.steps = state.steps + 1;
    const double dx = r.state.position[0] - task.goal[0];
    const double dy = r.state.position[1] - task.goal[1];
    const double sq = dx * dx + dy * dy;
    r.reward = -sq;
    r.done = std::sqrt(sq) < kNavGoalRadius || r.state.steps >= kNavHorizon;
    return r;
}

std::uint64_t hash_params(const ParamVector& params) {
    // FNV-1a over the raw value bytes.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : params) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

namespace {

/// Lean forward pass for per-step action selection (no graph, no Matrix).
void policy_mean(const MlpSpec& spec, const ParamLayout& lay, const ParamVector& params,
                 const double* input, std::vector<double>& h, std::vector<double>& z) {
    h.assign(input, input + spec.input_dim());
    for (std::size_t l = 0; l < lay.layers.size(); ++l) {
        const auto& seg = lay.layers[l];
        z.assign(params.begin() + seg.b_off, params.begin() + seg.b_off + seg.out);
        for (int i = 0; i < seg.out; ++i) {
            const double* w = params.data() + seg.w_off + static_cast<std::size_t>(i) * seg.in;
            double s = z[i];
            for (int j = 0; j < seg.in; ++j) s += w[j] * h[j];
            z[i] = s;
        }
        if (l + 1 < lay.layers.size()) {
            for (double& v : z)
                v = spec.activation == Activation::Tanh ? std::tanh(v) : (v > 0.0 ? v : 0.0);
        }
        h.swap(z);
    }
}

}  // namespace

std::vector<Trajectory> rollout(const MlpSpec& spec, const ParamVector& params,
                                const NavTask& task, int episodes, RngStream& rng, RolloutLog* log,
                                const std::string& purpose) {
    if (spec.head != OutputHead::GaussianPolicy)
        throw ContractError("rollout: policy head must be gaussian-policy");
    const ParamLayout lay = layout_for(spec);
    if (static_cast<int>(params.size()) != lay.dim)
        throw ContractError("rollout: parameter length does not match the policy layout");
    if (log) log->entries.push_back({hash_params(params), purpose});

    const int adim = spec.output_dim();
    std::vector<double> sd(adim);
    for (int i = 0; i < adim; ++i) sd[i] = std::exp(params[lay.log_std + i]);

    std::vector<Trajectory> out;
    out.reserve(episodes);
    std::vector<double> h, z;
    for (int ep = 0; ep < episodes; ++ep) {
        Trajectory traj;
        NavState s = nav_reset(task);
        for (int t = 0; t < kNavHorizon; ++t) {
            policy_mean(spec, lay, params, s.position.data(), h, z);
            std::array<double, 2> a;
            for (int i = 0; i < adim; ++i) a[i] = h[i] + sd[i] * rng.normal();
            for (int i = 0; i < adim; ++i)
                a[i] = std::clamp(a[i], -kNavActionLimit, kNavActionLimit);
            traj.states.push_back(s.position);
            traj.actions.push_back(a);
            const NavStepResult r = nav_step(task, s, a);
            traj.rewards.push_back(r.reward);
            s = r.state;
            if (r.done) {
                traj.terminated_early = s.steps < kNavHorizon;
                break;
            }
        }
        out.push_back(std::move(traj));
    }
    return out;
}

}  // namespace bmaml::tasks

#pragma once

#include <string>
#include <vector>

#include "bmaml/errors.hpp"
#include "bmaml/rng.hpp"

namespace bmaml {

enum class Activation { Tanh, Relu };
enum class OutputHead { Linear, Softmax, GaussianPolicy };

/// Fully-connected network shape. layer_sizes runs input -> hidden... -> output.
struct MlpSpec {
    std::vector<int> layer_sizes;
    Activation activation = Activation::Tanh;
    OutputHead head = OutputHead::Linear;

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }

    void check() const {
        if (layer_sizes.size() < 2) throw ContractError("MlpSpec: need at least two layer sizes");
        for (int s : layer_sizes)
            if (s < 1) throw ContractError("MlpSpec: layer sizes must be >= 1");
    }
};

/// Flat parameter layout for one particle. Weights come first, layer by
/// layer as [W row-major (out x in), b], followed by head-dependent extras:
///   Linear head         -> log_gamma (observation precision), log_lambda
///   Softmax head        -> log_lambda (weight-prior precision)
///   GaussianPolicy head -> log_std per action dimension
/// Precisions and stds live in log space so the positive-domain constraint
/// holds for any particle value.
struct ParamLayout {
    struct Layer {
        int w_off, out, in, b_off;
    };
    std::vector<Layer> layers;
    int weight_count = 0;  // weights and biases occupy [0, weight_count)
    int log_gamma = -1;
    int log_lambda = -1;
    int log_std = -1;
    int log_std_dim = 0;
    int dim = 0;
};

inline ParamLayout layout_for(const MlpSpec& spec) {
    spec.check();
    ParamLayout lay;
    int off = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        ParamLayout::Layer seg;
        seg.in = spec.layer_sizes[l];
        seg.out = spec.layer_sizes[l + 1];
        seg.w_off = off;
        off += seg.out * seg.in;
        seg.b_off = off;
        off += seg.out;
        lay.layers.push_back(seg);
    }
    lay.weight_count = off;
    switch (spec.head) {
        case OutputHead::Linear:
            lay.log_gamma = off++;
            lay.log_lambda = off++;
            break;
        case OutputHead::Softmax:
            lay.log_lambda = off++;
            break;
        case OutputHead::GaussianPolicy:
            lay.log_std = off;
            lay.log_std_dim = spec.output_dim();
            off += lay.log_std_dim;
            break;
    }
    lay.dim = off;
    return lay;
}

using ParamVector = std::vector<double>;

/// Ordered set of M equally-sized particles. Index is identity: the chaser
/// loss pairs chaser m with leader m, so order must be stable across updates.
struct ParticleSet {
    std::vector<ParamVector> particles;

    int count() const { return static_cast<int>(particles.size()); }
    int dim() const { return particles.empty() ? 0 : static_cast<int>(particles[0].size()); }

    ParamVector& operator[](int m) { return particles[m]; }
    const ParamVector& operator[](int m) const { return particles[m]; }

    void check() const {
        if (particles.empty()) throw ContractError("ParticleSet: must hold at least one particle");
        for (const auto& p : particles)
            if (static_cast<int>(p.size()) != dim())
                throw ContractError("ParticleSet: particle dimensions differ");
    }

    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(static_cast<std::size_t>(count()) * dim());
        for (const auto& p : particles) out.insert(out.end(), p.begin(), p.end());
        return out;
    }

    void unflatten(const std::vector<double>& flat) {
        std::size_t off = 0;
        for (auto& p : particles) {
            std::copy_n(flat.begin() + off, p.size(), p.begin());
            off += p.size();
        }
    }
};

/// Weights drawn N(0, 1/fan_in) per layer, biases zero, log-precisions zero,
/// policy log-std at log(0.1). Each particle gets its own stream.
inline ParamVector init_particle(const MlpSpec& spec, RngStream& rng) {
    const ParamLayout lay = layout_for(spec);
    ParamVector p(lay.dim, 0.0);
    for (const auto& seg : lay.layers) {
        const double sd = 1.0 / std::sqrt(static_cast<double>(seg.in));
        for (int i = 0; i < seg.out * seg.in; ++i) p[seg.w_off + i] = rng.normal(0.0, sd);
    }
    if (lay.log_std >= 0)
        for (int i = 0; i < lay.log_std_dim; ++i) p[lay.log_std + i] = std::log(0.1);
    return p;
}

inline ParticleSet init_particles(const MlpSpec& spec, int m, std::uint64_t root_seed) {
    ParticleSet set;
    set.particles.reserve(m);
    for (int i = 0; i < m; ++i) {
        RngStream rng(derive_stream(root_seed, "init", static_cast<std::uint64_t>(i)));
        set.particles.push_back(init_particle(spec, rng));
    }
    return set;
}

}  // namespace bmaml

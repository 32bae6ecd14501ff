#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bmaml/meta.hpp"
#include "bmaml/metarl.hpp"

namespace bmaml::config {

enum class Algo { Maml, Emaml, Bfa, Bmaml, SvpgChaser, VpgReptile };
enum class Suite { Sinusoid, SynthClass, Nav2d, Active };

bool is_rl_algo(Algo a);
std::string to_string(Algo a);
std::string to_string(Suite s);
Algo algo_from_string(const std::string& s);
Suite suite_from_string(const std::string& s);

struct ClassificationConfig {
    int ways = 5;
    int pool_size = 20;
    int input_dim = 8;
    int test_per_class = 10;
};

struct ActiveRunConfig {
    int svgd_steps = 1;
    int eval_tasks = 50;
};

struct ExperimentConfig {
    Algo algo = Algo::Bmaml;
    Suite suite = Suite::Sinusoid;
    std::uint64_t seed = 0;
    std::string output_dir = "runs/default";
    long iterations = 2000;
    int eval_interval = 100;
    int eval_tasks = 40;
    int task_count = 100;  // |T|, size of the meta-training task pool
    int shots = 5;         // K

    meta::MetaConfig meta;
    metarl::RlMetaConfig rl;
    std::vector<int> hidden;              // empty: suite default
    Activation activation = Activation::Tanh;
    models::HyperpriorConfig hyperprior;
    ClassificationConfig classification;
    ActiveRunConfig active;

    /// Network spec implied by suite + hidden + activation.
    MlpSpec model_spec() const;
    meta::Algo supervised_algo() const;
    metarl::RlAlgo rl_algo() const;

    void validate() const;  // throws ConfigError naming the offending field
};

/// Parse a config JSON file and apply key=value overrides (dotted paths,
/// e.g. "meta.inner_lr=0.02" or "seed=7").
ExperimentConfig load(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides);

/// Parse from a JSON string (used by tests).
ExperimentConfig parse(const std::string& json_text, const std::vector<std::string>& overrides = {});

std::string to_json(const ExperimentConfig& cfg);

}  // namespace bmaml::config

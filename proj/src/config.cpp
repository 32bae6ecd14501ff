#include "bmaml/config.hpp"

#include <fstream>

#include <json.hpp>

namespace bmaml::config {

using nlohmann::json;

bool is_rl_algo(Algo a) { return a == Algo::SvpgChaser || a == Algo::VpgReptile; }

std::string to_string(Algo a) {
    switch (a) {
        case Algo::Maml: return "maml";
        case Algo::Emaml: return "emaml";
        case Algo::Bfa: return "bfa";
        case Algo::Bmaml: return "bmaml";
        case Algo::SvpgChaser: return "svpg-chaser";
        case Algo::VpgReptile: return "vpg-reptile";
    }
    return "?";
}

std::string to_string(Suite s) {
    switch (s) {
        case Suite::Sinusoid: return "sinusoid";
        case Suite::SynthClass: return "synth-class";
        case Suite::Nav2d: return "nav2d";
        case Suite::Active: return "active";
    }
    return "?";
}

Algo algo_from_string(const std::string& s) {
    if (s == "maml") return Algo::Maml;
    if (s == "emaml") return Algo::Emaml;
    if (s == "bfa") return Algo::Bfa;
    if (s == "bmaml") return Algo::Bmaml;
    if (s == "svpg-chaser") return Algo::SvpgChaser;
    if (s == "vpg-reptile") return Algo::VpgReptile;
    throw ConfigError("algo", "unknown algorithm '" + s + "'");
}

Suite suite_from_string(const std::string& s) {
    if (s == "sinusoid") return Suite::Sinusoid;
    if (s == "synth-class") return Suite::SynthClass;
    if (s == "nav2d") return Suite::Nav2d;
    if (s == "active") return Suite::Active;
    throw ConfigError("suite", "unknown suite '" + s + "'");
}

MlpSpec ExperimentConfig::model_spec() const {
    MlpSpec spec;
    spec.activation = activation;
    std::vector<int> h = hidden;
    switch (suite) {
        case Suite::Sinusoid:
            if (h.empty()) h = {40, 40, 40};
            spec.layer_sizes.push_back(1);
            spec.layer_sizes.insert(spec.layer_sizes.end(), h.begin(), h.end());
            spec.layer_sizes.push_back(1);
            spec.head = OutputHead::Linear;
            break;
        case Suite::SynthClass:
        case Suite::Active:
            if (h.empty()) h = {32};
            spec.layer_sizes.push_back(classification.input_dim);
            spec.layer_sizes.insert(spec.layer_sizes.end(), h.begin(), h.end());
            spec.layer_sizes.push_back(classification.ways);
            spec.head = OutputHead::Softmax;
            spec.activation = Activation::Relu;
            break;
        case Suite::Nav2d:
            if (h.empty()) h = {100, 100};
            spec.layer_sizes.push_back(2);
            spec.layer_sizes.insert(spec.layer_sizes.end(), h.begin(), h.end());
            spec.layer_sizes.push_back(2);
            spec.head = OutputHead::GaussianPolicy;
            spec.activation = Activation::Relu;
            break;
    }
    return spec;
}

meta::Algo ExperimentConfig::supervised_algo() const {
    switch (algo) {
        case Algo::Maml: return meta::Algo::Maml;
        case Algo::Emaml: return meta::Algo::Emaml;
        case Algo::Bfa: return meta::Algo::Bfa;
        case Algo::Bmaml: return meta::Algo::Bmaml;
        default: throw ConfigError("algo", "not a supervised algorithm");
    }
}

metarl::RlAlgo ExperimentConfig::rl_algo() const {
    if (algo == Algo::SvpgChaser) return metarl::RlAlgo::SvpgChaser;
    if (algo == Algo::VpgReptile) return metarl::RlAlgo::VpgReptile;
    throw ConfigError("algo", "not an RL algorithm");
}

void ExperimentConfig::validate() const {
    if (is_rl_algo(algo) != (suite == Suite::Nav2d)) {
        throw ConfigError("algo", "algorithm '" + to_string(algo) +
                                      "' is incompatible with suite '" + to_string(suite) + "'");
    }
    if (algo == Algo::Maml && meta.particles != 1)
        throw ConfigError("meta.particles", "maml requires particles == 1");
    if (iterations < 1) throw ConfigError("iterations", "must be >= 1");
    if (eval_interval < 1) throw ConfigError("eval_interval", "must be >= 1");
    if (eval_tasks < 1) throw ConfigError("eval_tasks", "must be >= 1");
    if (task_count < 1) throw ConfigError("task_count", "must be >= 1");
    if (shots < 1) throw ConfigError("shots", "must be >= 1");
    if (classification.ways < 2) throw ConfigError("classification.ways", "must be >= 2");
    if (classification.pool_size < 1) throw ConfigError("classification.pool_size", "must be >= 1");
    if (output_dir.empty()) throw ConfigError("output_dir", "must not be empty");
    try {
        if (!is_rl_algo(algo))
            meta.check();
        else
            rl.check();
        hyperprior.check();
    } catch (const ContractError& e) {
        throw ConfigError(is_rl_algo(algo) ? "rl" : "meta", e.what());
    }
}

namespace {

template <typename T>
void read_field(const json& j, const char* section, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string(section) + (*section ? "." : "") + key,
                          "has the wrong type");
    }
}

void check_known_keys(const json& j, const char* section,
                      std::initializer_list<const char*> known) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        if (!ok)
            throw ConfigError(std::string(section) + (*section ? "." : "") + key,
                              "unknown config key");
    }
}

void parse_meta(const json& j, meta::MetaConfig& m) {
    check_known_keys(j, "meta",
                     {"particles", "chaser_steps", "leader_steps", "inner_lr", "leader_lr",
                      "meta_lr", "meta_batch", "optimizer", "n_eval", "kernel_bandwidth"});
    read_field(j, "meta", "particles", m.particles);
    read_field(j, "meta", "chaser_steps", m.chaser_steps);
    read_field(j, "meta", "leader_steps", m.leader_steps);
    read_field(j, "meta", "inner_lr", m.inner_lr);
    read_field(j, "meta", "leader_lr", m.leader_lr);
    read_field(j, "meta", "meta_lr", m.meta_lr);
    read_field(j, "meta", "meta_batch", m.meta_batch);
    read_field(j, "meta", "n_eval", m.n_eval);
    if (j.contains("optimizer")) {
        const std::string opt = j.at("optimizer").get<std::string>();
        if (opt == "adam")
            m.optimizer = meta::MetaConfig::Optimizer::Adam;
        else if (opt == "sgd")
            m.optimizer = meta::MetaConfig::Optimizer::Sgd;
        else
            throw ConfigError("meta.optimizer", "must be 'adam' or 'sgd'");
    }
    if (j.contains("kernel_bandwidth")) {
        const double h = j.at("kernel_bandwidth").get<double>();
        m.kernel = h > 0 ? svgd::KernelConfig::fixed(h) : svgd::KernelConfig::median();
    }
}

void parse_rl(const json& j, metarl::RlMetaConfig& r) {
    check_known_keys(j, "rl",
                     {"episodes", "meta_batch", "inner_lr", "leader_lr", "meta_lr", "eta",
                      "inner_steps", "particles", "kernel_bandwidth"});
    read_field(j, "rl", "episodes", r.episodes);
    read_field(j, "rl", "meta_batch", r.meta_batch);
    read_field(j, "rl", "inner_lr", r.inner_lr);
    read_field(j, "rl", "leader_lr", r.leader_lr);
    read_field(j, "rl", "meta_lr", r.meta_lr);
    read_field(j, "rl", "eta", r.eta);
    read_field(j, "rl", "inner_steps", r.inner_steps);
    read_field(j, "rl", "particles", r.particles);
    if (j.contains("kernel_bandwidth")) {
        const double h = j.at("kernel_bandwidth").get<double>();
        r.kernel = h > 0 ? svgd::KernelConfig::fixed(h) : svgd::KernelConfig::median();
    }
}

ExperimentConfig from_json(const json& j) {
    check_known_keys(j, "",
                     {"algo", "suite", "seed", "output_dir", "iterations", "eval_interval",
                      "eval_tasks", "task_count", "shots", "meta", "rl", "model", "hyperprior",
                      "classification", "active"});
    ExperimentConfig cfg;
    if (j.contains("algo")) cfg.algo = algo_from_string(j.at("algo").get<std::string>());
    if (j.contains("suite")) cfg.suite = suite_from_string(j.at("suite").get<std::string>());
    read_field(j, "", "seed", cfg.seed);
    read_field(j, "", "output_dir", cfg.output_dir);
    read_field(j, "", "iterations", cfg.iterations);
    read_field(j, "", "eval_interval", cfg.eval_interval);
    read_field(j, "", "eval_tasks", cfg.eval_tasks);
    read_field(j, "", "task_count", cfg.task_count);
    read_field(j, "", "shots", cfg.shots);
    if (j.contains("meta")) parse_meta(j.at("meta"), cfg.meta);
    if (j.contains("rl")) parse_rl(j.at("rl"), cfg.rl);
    if (j.contains("model")) {
        const json& m = j.at("model");
        check_known_keys(m, "model", {"hidden", "activation"});
        read_field(m, "model", "hidden", cfg.hidden);
        if (m.contains("activation")) {
            const std::string act = m.at("activation").get<std::string>();
            if (act == "tanh")
                cfg.activation = Activation::Tanh;
            else if (act == "relu")
                cfg.activation = Activation::Relu;
            else
                throw ConfigError("model.activation", "must be 'tanh' or 'relu'");
        }
    }
    if (j.contains("hyperprior")) {
        const json& h = j.at("hyperprior");
        check_known_keys(h, "hyperprior", {"a", "b", "a_prime", "b_prime"});
        read_field(h, "hyperprior", "a", cfg.hyperprior.a);
        read_field(h, "hyperprior", "b", cfg.hyperprior.b);
        read_field(h, "hyperprior", "a_prime", cfg.hyperprior.a_prime);
        read_field(h, "hyperprior", "b_prime", cfg.hyperprior.b_prime);
    }
    if (j.contains("classification")) {
        const json& c = j.at("classification");
        check_known_keys(c, "classification", {"ways", "pool_size", "input_dim", "test_per_class"});
        read_field(c, "classification", "ways", cfg.classification.ways);
        read_field(c, "classification", "pool_size", cfg.classification.pool_size);
        read_field(c, "classification", "input_dim", cfg.classification.input_dim);
        read_field(c, "classification", "test_per_class", cfg.classification.test_per_class);
    }
    if (j.contains("active")) {
        const json& a = j.at("active");
        check_known_keys(a, "active", {"svgd_steps", "eval_tasks"});
        read_field(a, "active", "svgd_steps", cfg.active.svgd_steps);
        read_field(a, "active", "eval_tasks", cfg.active.eval_tasks);
    }
    return cfg;
}

json apply_override(json j, const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("override", "expected key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);

    json* node = &j;
    std::size_t start = 0;
    while (true) {
        const auto dot = key.find('.', start);
        const std::string part = key.substr(start, dot - start);
        if (part.empty()) throw ConfigError("override", "empty path segment in '" + key + "'");
        if (dot == std::string::npos) {
            json parsed = json::parse(value, nullptr, false);
            (*node)[part] = parsed.is_discarded() ? json(value) : parsed;
            break;
        }
        node = &(*node)[part];
        start = dot + 1;
    }
    return j;
}

}  // namespace

ExperimentConfig parse(const std::string& text, const std::vector<std::string>& overrides) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config", "not valid JSON");
    for (const auto& kv : overrides) j = apply_override(j, kv);
    ExperimentConfig cfg = from_json(j);
    cfg.validate();
    return cfg;
}

ExperimentConfig load(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config", "cannot open '" + path.string() + "'");
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse(text, overrides);
}

std::string to_json(const ExperimentConfig& cfg) {
    json j;
    j["algo"] = to_string(cfg.algo);
    j["suite"] = to_string(cfg.suite);
    j["seed"] = cfg.seed;
    j["output_dir"] = cfg.output_dir;
    j["iterations"] = cfg.iterations;
    j["eval_interval"] = cfg.eval_interval;
    j["eval_tasks"] = cfg.eval_tasks;
    j["task_count"] = cfg.task_count;
    j["shots"] = cfg.shots;
    j["meta"] = {{"particles", cfg.meta.particles},
                 {"chaser_steps", cfg.meta.chaser_steps},
                 {"leader_steps", cfg.meta.leader_steps},
                 {"inner_lr", cfg.meta.inner_lr},
                 {"leader_lr", cfg.meta.leader_lr},
                 {"meta_lr", cfg.meta.meta_lr},
                 {"meta_batch", cfg.meta.meta_batch},
                 {"optimizer",
                  cfg.meta.optimizer == meta::MetaConfig::Optimizer::Adam ? "adam" : "sgd"},
                 {"n_eval", cfg.meta.n_eval}};
    j["rl"] = {{"episodes", cfg.rl.episodes},   {"meta_batch", cfg.rl.meta_batch},
               {"inner_lr", cfg.rl.inner_lr},   {"leader_lr", cfg.rl.leader_lr},
               {"meta_lr", cfg.rl.meta_lr},     {"eta", cfg.rl.eta},
               {"inner_steps", cfg.rl.inner_steps}, {"particles", cfg.rl.particles}};
    j["hyperprior"] = {{"a", cfg.hyperprior.a},
                       {"b", cfg.hyperprior.b},
                       {"a_prime", cfg.hyperprior.a_prime},
                       {"b_prime", cfg.hyperprior.b_prime}};
    j["classification"] = {{"ways", cfg.classification.ways},
                           {"pool_size", cfg.classification.pool_size},
                           {"input_dim", cfg.classification.input_dim},
                           {"test_per_class", cfg.classification.test_per_class}};
    j["active"] = {{"svgd_steps", cfg.active.svgd_steps}, {"eval_tasks", cfg.active.eval_tasks}};
    return j.dump(2);
}

}  // namespace bmaml::config

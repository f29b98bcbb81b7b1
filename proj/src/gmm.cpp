#include "gmmtree/gmm.hpp"

#include "gmmtree/errors.hpp"

#include <cmath>
#include <numbers>

namespace gmmtree {

std::string to_string(Engine e) {
    return e == Engine::naive ? "naive" : "fast";
}

Engine parse_engine(std::string_view name) {
    if (name == "naive") {
        return Engine::naive;
    }
    if (name == "fast") {
        return Engine::fast;
    }
    throw InvalidConfig("unknown engine '" + std::string(name) + "' (expected naive or fast)");
}

void TrainConfig::validate() const {
    if (components < 1) {
        throw InvalidConfig("components must be at least 1");
    }
    if (!(ridge >= 0.0) || !std::isfinite(ridge)) {
        throw InvalidConfig("ridge must be a finite value >= 0");
    }
    if (!(pc_fraction > 0.0 && pc_fraction <= 1.0)) {
        throw InvalidConfig("pc_fraction must lie in (0, 1]");
    }
    if (!(rel_ll_tolerance >= 0.0) || !std::isfinite(rel_ll_tolerance)) {
        throw InvalidConfig("rel_ll_tolerance must be a finite value >= 0");
    }
    if (max_patterns_per_tree < 1) {
        throw InvalidConfig("max_patterns_per_tree must be at least 1");
    }
    if (threads < 1) {
        throw InvalidConfig("threads must be at least 1");
    }
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"components", c.components},
            {"max_iters", c.max_iters},
            {"rel_ll_tolerance", c.rel_ll_tolerance},
            {"ridge", c.ridge},
            {"pc_fraction", c.pc_fraction},
            {"seed", c.seed},
            {"engine", to_string(c.engine)},
            {"recompute_every", c.recompute_every ? nlohmann::json(*c.recompute_every) : nlohmann::json(nullptr)},
            {"kmeans_iters", c.kmeans_iters},
            {"optimize_weights", c.optimize_weights},
            {"max_patterns_per_tree", c.max_patterns_per_tree},
            {"threads", c.threads}};
}

namespace {

template <typename T>
void read_unsigned(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) {
        return;
    }
    const auto& v = j.at(key);
    if (v.is_number_unsigned()) {
        out = v.get<T>();
    } else if (v.is_number_integer() && v.get<long long>() >= 0) {
        out = static_cast<T>(v.get<long long>());
    } else {
        throw InvalidConfig(std::string("config key '") + key + "' must be a non-negative integer");
    }
}

void read_real(const nlohmann::json& j, const char* key, double& out) {
    if (!j.contains(key)) {
        return;
    }
    if (!j.at(key).is_number()) {
        throw InvalidConfig(std::string("config key '") + key + "' must be a number");
    }
    out = j.at(key).get<double>();
}

}  // namespace

TrainConfig config_from_json(const nlohmann::json& j, TrainConfig c) {
    if (!j.is_object()) {
        throw InvalidConfig("config must be a JSON object");
    }
    read_unsigned(j, "components", c.components);
    read_unsigned(j, "max_iters", c.max_iters);
    read_real(j, "rel_ll_tolerance", c.rel_ll_tolerance);
    read_real(j, "ridge", c.ridge);
    read_real(j, "pc_fraction", c.pc_fraction);
    read_unsigned(j, "seed", c.seed);
    if (j.contains("engine")) {
        if (!j.at("engine").is_string()) {
            throw InvalidConfig("config key 'engine' must be a string");
        }
        c.engine = parse_engine(j.at("engine").get<std::string>());
    }
    if (j.contains("recompute_every")) {
        if (j.at("recompute_every").is_null()) {
            c.recompute_every.reset();
        } else {
            std::size_t k = 0;
            read_unsigned(j, "recompute_every", k);
            c.recompute_every = k;
        }
    }
    read_unsigned(j, "kmeans_iters", c.kmeans_iters);
    if (j.contains("optimize_weights")) {
        if (!j.at("optimize_weights").is_boolean()) {
            throw InvalidConfig("config key 'optimize_weights' must be a boolean");
        }
        c.optimize_weights = j.at("optimize_weights").get<bool>();
    }
    read_unsigned(j, "max_patterns_per_tree", c.max_patterns_per_tree);
    read_unsigned(j, "threads", c.threads);
    c.validate();
    return c;
}

std::vector<double> MixtureModel::weights() const {
    std::vector<double> out;
    out.reserve(components.size());
    for (const auto& c : components) {
        out.push_back(std::exp(c.log_weight));
    }
    return out;
}

void MixtureModel::refresh() {
    for (auto& c : components) {
        c.precision = inverse_spd(c.cov);
    }
}

double Responsibilities::mean_log_likelihood() const {
    if (log_mix.size() == 0) {
        return 0.0;
    }
    return log_mix.sum() / static_cast<double>(log_mix.size());
}

double log_density_observed(const GaussianComponent& c, const Dataset& ds, std::size_t row) {
    const IndexList observed = ds.row_mask(row).clear_indices();
    if (observed.empty()) {
        return 0.0;
    }
    const CholFactor f = cholesky(c.cov, observed);
    Vector z(static_cast<Eigen::Index>(observed.size()));
    for (std::size_t k = 0; k < observed.size(); ++k) {
        z[static_cast<Eigen::Index>(k)] = ds.value(row, observed[k]) - c.mean[observed[k]];
    }
    const double quad = solve_lower(f, z).squaredNorm();
    const double n_o = static_cast<double>(observed.size());
    return -0.5 * (n_o * std::log(2.0 * std::numbers::pi) + f.log_det() + quad);
}

}  // namespace gmmtree

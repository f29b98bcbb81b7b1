#pragma once

#include "gmmtree/data.hpp"
#include "gmmtree/linalg.hpp"

#include "json.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gmmtree {

/// naive: every (pattern, component) factor and conditional covariance is
/// computed from scratch. fast: they are chained along the pattern tree.
enum class Engine { naive, fast };

std::string to_string(Engine e);
Engine parse_engine(std::string_view name);

struct TrainConfig {
    std::size_t components = 1;
    std::size_t max_iters = 100;
    /// Stop once (ll - ll_prev) < rel_ll_tolerance·|ll_prev|; 0 disables.
    double rel_ll_tolerance = 1e-6;
    double ridge = 1e-6;
    double pc_fraction = 1.0;
    std::uint64_t seed = 0;
    Engine engine = Engine::fast;
    /// nullopt: only tree roots are computed from scratch.
    std::optional<std::size_t> recompute_every = 16;
    std::size_t kmeans_iters = 20;
    bool optimize_weights = true;
    std::size_t max_patterns_per_tree = 4096;
    std::size_t threads = 1;

    void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults. Throws InvalidConfig on bad values.
TrainConfig config_from_json(const nlohmann::json& j, TrainConfig base = {});

struct GaussianComponent {
    Vector mean;
    SymMatrix cov;
    SymMatrix precision;  // cov⁻¹, refreshed with refresh()
    double log_weight = 0.0;
};

class MixtureModel {
public:
    std::size_t d = 0;
    std::vector<GaussianComponent> components;
    TrainConfig config;

    std::size_t size() const noexcept { return components.size(); }
    std::vector<double> weights() const;
    /// Recomputes every precision from its covariance.
    void refresh();
};

/// Posterior component probabilities and the per-sample log densities
/// behind them.
struct Responsibilities {
    Matrix p;        // n × L
    Matrix log_q;    // n × L, log N(x_o; μ_o, Σ_oo)
    Vector log_mix;  // n, log Σ_j π_j q_ij

    double mean_log_likelihood() const;
};

/// Observed-marginal log density and fill-in for one component, evaluated
/// from scratch. Used by tests and small callers; the engines batch the same
/// arithmetic per pattern.
double log_density_observed(const GaussianComponent& c, const Dataset& ds, std::size_t row);

/// Eigenvalue-level regularization. pc_fraction == 1 gives cov + ridge·I.
/// Otherwise the top ⌈pc_fraction·d⌉ eigenvalues are kept (floored at 0), the
/// rest replaced by max(ridge, 1e-4 × smallest kept), and ridge is added to
/// all of them.
SymMatrix regularize(const SymMatrix& cov, double ridge, double pc_fraction);

/// K-means on observed coordinates; covariances from pairwise-observed
/// entries within each cluster.
MixtureModel kmeans_init(const Dataset& ds, const TrainConfig& config);

}  // namespace gmmtree

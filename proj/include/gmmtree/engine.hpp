#pragma once

#include "gmmtree/gmm.hpp"
#include "gmmtree/patterns.hpp"
#include "gmmtree/workspace.hpp"

#include <functional>

namespace gmmtree {

struct SweepOptions {
    bool keep_filled = true;     // per-component x̂ rows
    bool keep_cond_cov = true;   // per-pattern conditional covariances
    /// Compare every workspace against direct computation (slow).
    bool check_workspaces = false;
    std::size_t threads = 1;
};

struct PatternCondCov {
    IndexList missing_order;
    SymMatrix cov;
};

struct ComponentSweep {
    Vector log_q;                          // indexed by sample id
    RowMatrix filled;                      // n × d, x̂^{i,j}
    std::vector<PatternCondCov> cond_cov;  // indexed by pattern id
    std::size_t from_scratch_nodes = 0;
    double max_cond_cov_error = 0.0;       // when check_workspaces
    double max_factor_error = 0.0;         // when check_workspaces
};

/// Everything one pass over the pattern schedule yields for a model.
struct Sweep {
    std::vector<ComponentSweep> components;
};

Sweep run_sweep(const MixtureModel& model, const Dataset& ds, const PatternSchedule& sched,
                Engine engine, const SweepOptions& opts = {});

Responsibilities responsibilities_from(const MixtureModel& model, const Sweep& sweep);

Responsibilities e_step(const MixtureModel& model, const Dataset& ds, const PatternSchedule& sched,
                        Engine engine);

/// New parameters from a finished sweep of the current model.
MixtureModel m_step_from(const MixtureModel& model, const Sweep& sweep, const Responsibilities& resp,
                         const PatternSchedule& sched);

MixtureModel m_step(const MixtureModel& model, const Dataset& ds, const Responsibilities& resp,
                    const PatternSchedule& sched, Engine engine);

/// Mean per-sample log Σ_j π_j N(x_o; μ_j,o, Σ_j,oo).
double log_likelihood(const MixtureModel& model, const Dataset& ds);

struct IterationRecord {
    double log_likelihood = 0.0;
    std::optional<double> validation_log_likelihood;
    double m_step_ms = 0.0;
    double e_step_ms = 0.0;
};

struct TrainTrace {
    double initial_log_likelihood = 0.0;
    std::vector<IterationRecord> iterations;
    std::string stop_reason;
    std::size_t n_patterns = 0;
    std::size_t n_trees = 0;
    std::size_t mst_weight = 0;
    double patterns_ms = 0.0;
    double mst_ms = 0.0;
    double schedule_ms = 0.0;
    double init_ms = 0.0;
    double total_ms = 0.0;
};

struct FitResult {
    MixtureModel model;
    TrainTrace trace;
};

using IterationObserver =
    std::function<void(std::size_t iteration, const MixtureModel& model, const Responsibilities& resp)>;

struct FitOptions {
    const Dataset* validation = nullptr;
    IterationObserver observer;
    /// Model to start from instead of kmeans_init.
    std::optional<MixtureModel> initial;
};

FitResult fit(const Dataset& ds, const TrainConfig& config, const FitOptions& opts = {});

}  // namespace gmmtree

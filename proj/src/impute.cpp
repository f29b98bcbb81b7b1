#include "gmmtree/impute.hpp"

#include "gmmtree/engine.hpp"
#include "gmmtree/errors.hpp"

#include <algorithm>
#include <numeric>

namespace gmmtree {

Dataset ImputationResult::provenance() const {
    Dataset out(filled.n(), filled.d());
    for (std::size_t i = 0; i < filled.n(); ++i) {
        for (std::size_t c = 0; c < filled.d(); ++c) {
            out.set(i, c, imputed[i].test(c) ? 1.0 : 0.0);
        }
    }
    out.column_names = filled.column_names;
    return out;
}

namespace {

ImputationResult start_result(const Dataset& ds, std::string strategy) {
    ImputationResult r;
    r.filled = ds;
    r.imputed.reserve(ds.n());
    for (std::size_t i = 0; i < ds.n(); ++i) {
        r.imputed.push_back(ds.row_mask(i));
    }
    r.strategy = std::move(strategy);
    return r;
}

}  // namespace

ImputationResult impute_mixture(const MixtureModel& model, const Dataset& ds) {
    if (model.d != ds.d()) {
        throw DimensionMismatch("model has d=" + std::to_string(model.d) + ", data has d=" +
                                std::to_string(ds.d()));
    }
    ImputationResult r = start_result(ds, "mixture");
    r.parameters = {{"components", model.size()}};
    if (ds.n() == 0 || ds.complete()) {
        return r;
    }
    PlanOptions plan;
    plan.max_patterns_per_tree = model.config.max_patterns_per_tree;
    plan.recompute_every = model.config.recompute_every;
    const PatternSchedule sched = plan_patterns(ds, plan);
    SweepOptions opts;
    opts.keep_cond_cov = false;
    opts.threads = model.config.threads;
    const Sweep sweep = run_sweep(model, ds, sched, Engine::fast, opts);
    const Responsibilities resp = responsibilities_from(model, sweep);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (int c : ds.row_mask(i).set_indices()) {
            double acc = 0.0;
            for (std::size_t j = 0; j < model.size(); ++j) {
                acc += resp.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) *
                       sweep.components[j].filled(static_cast<Eigen::Index>(i), c);
            }
            r.filled.set(i, static_cast<std::size_t>(c), acc);
        }
    }
    return r;
}

ImputationResult impute_global_mean(const Dataset& ds, const std::optional<std::vector<std::size_t>>& train_rows) {
    ImputationResult r = start_result(ds, "mean");
    std::vector<std::size_t> rows;
    if (train_rows) {
        rows = *train_rows;
    } else {
        rows.resize(ds.n());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
    }
    std::vector<double> means(ds.d(), 0.0);
    for (std::size_t c = 0; c < ds.d(); ++c) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i : rows) {
            if (i >= ds.n()) {
                throw InvalidConfig("training row " + std::to_string(i) + " out of range");
            }
            if (!ds.missing(i, c)) {
                sum += ds.value(i, c);
                ++count;
            }
        }
        means[c] = count ? sum / static_cast<double>(count) : 0.0;
    }
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (int c : ds.row_mask(i).set_indices()) {
            r.filled.set(i, static_cast<std::size_t>(c), means[static_cast<std::size_t>(c)]);
        }
    }
    r.parameters = {{"means", means}, {"train_rows", rows.size()}};
    return r;
}

ImputationResult impute_knn(const Dataset& ds, const Dataset& reference, std::size_t k) {
    if (k == 0) {
        throw InvalidConfig("k must be positive");
    }
    if (reference.n() != ds.n() || reference.d() != ds.d()) {
        throw ShapeMismatch("reference must have the same shape as the data");
    }
    if (!reference.complete()) {
        throw IncompleteReference("the reference dataset has missing cells");
    }
    ImputationResult r = start_result(ds, "knn");
    r.parameters = {{"k", k}};
    const RowMatrix& ref = reference.values();
    const auto n = static_cast<Eigen::Index>(ds.n());
    std::vector<std::pair<double, std::size_t>> order(ds.n());

    for (std::size_t i = 0; i < ds.n(); ++i) {
        const IndexList missing = ds.row_mask(i).set_indices();
        if (missing.empty()) {
            continue;
        }
        const Vector dist = (ref.rowwise() - ref.row(static_cast<Eigen::Index>(i))).rowwise().squaredNorm();
        for (Eigen::Index r2 = 0; r2 < n; ++r2) {
            order[static_cast<std::size_t>(r2)] = {dist[r2], static_cast<std::size_t>(r2)};
        }
        std::sort(order.begin(), order.end());
        for (int c : missing) {
            double sum = 0.0;
            std::size_t used = 0;
            for (const auto& [d2, row] : order) {
                if (used == k) {
                    break;
                }
                if (row == i || ds.missing(row, static_cast<std::size_t>(c))) {
                    continue;
                }
                sum += ds.value(row, static_cast<std::size_t>(c));
                ++used;
            }
            // No donor at all: the column is missing everywhere else.
            r.filled.set(i, static_cast<std::size_t>(c), used ? sum / static_cast<double>(used) : 0.0);
        }
    }
    return r;
}

}  // namespace gmmtree

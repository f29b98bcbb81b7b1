#include "gmmtree/eval.hpp"

#include "gmmtree/engine.hpp"
#include "gmmtree/errors.hpp"
#include "gmmtree/impute.hpp"
#include "gmmtree/model_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <set>

namespace gmmtree {

void RegressionTask::validate() const {
    if (static_cast<std::size_t>(targets.size()) != inputs.n()) {
        throw DimensionMismatch("targets and inputs disagree on row count");
    }
    if (!targets.allFinite()) {
        throw InvalidConfig("targets must be complete");
    }
    std::set<std::size_t> seen;
    for (const auto* split : {&train, &validation, &test}) {
        for (std::size_t i : *split) {
            if (i >= inputs.n()) {
                throw InvalidConfig("split row " + std::to_string(i) + " out of range");
            }
            if (!seen.insert(i).second) {
                throw InvalidConfig("row " + std::to_string(i) + " appears in more than one split");
            }
        }
    }
    if (train.empty()) {
        throw InvalidConfig("training split is empty");
    }
}

RegressionTask task_from_table(const Dataset& table, std::size_t target, std::size_t n_train,
                               std::size_t n_validation) {
    if (target >= table.d() || table.d() < 2) {
        throw InvalidConfig("target column out of range (need at least one input column)");
    }
    if (n_train + n_validation > table.n()) {
        throw InvalidConfig("split sizes exceed the number of rows");
    }
    RegressionTask task;
    std::vector<std::size_t> input_cols;
    for (std::size_t c = 0; c < table.d(); ++c) {
        if (c != target) {
            input_cols.push_back(c);
        }
    }
    task.inputs = table.columns(input_cols);
    task.targets.resize(static_cast<Eigen::Index>(table.n()));
    for (std::size_t i = 0; i < table.n(); ++i) {
        if (table.missing(i, target)) {
            throw InvalidConfig("target has a missing value at row " + std::to_string(i));
        }
        task.targets[static_cast<Eigen::Index>(i)] = table.value(i, target);
    }
    for (std::size_t i = 0; i < table.n(); ++i) {
        auto& split = i < n_train ? task.train : i < n_train + n_validation ? task.validation : task.test;
        split.push_back(i);
    }
    task.validate();
    return task;
}

RegressionTask gen_regression_task(std::size_t n, std::uint64_t seed) {
    constexpr std::size_t p = 8;
    constexpr double rho = 0.7;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset inputs(n, p);
    Vector y(static_cast<Eigen::Index>(n));
    const double shared_w = std::sqrt(rho);
    const double own_w = std::sqrt(1.0 - rho);
    std::array<double, p> x{};
    for (std::size_t i = 0; i < n; ++i) {
        const double shared = normal(rng);
        for (std::size_t c = 0; c < p; ++c) {
            x[c] = shared_w * shared + own_w * normal(rng);
            inputs.set(i, c, x[c]);
        }
        y[static_cast<Eigen::Index>(i)] =
            std::sin(x[0]) + 0.25 * x[1] * x[1] - 0.25 * x[2] * x[3] + 0.3 * x[4] + 0.2 * normal(rng);
    }
    RegressionTask task;
    task.inputs = std::move(inputs);
    task.targets = std::move(y);
    const std::size_t n_train = n / 2;
    const std::size_t n_val = n / 4;
    for (std::size_t i = 0; i < n; ++i) {
        auto& split = i < n_train ? task.train : i < n_train + n_val ? task.validation : task.test;
        split.push_back(i);
    }
    return task;
}

Dataset with_missing_column(const Dataset& ds, std::size_t at) {
    if (at > ds.d()) {
        throw DimensionMismatch("column position out of range");
    }
    Dataset out(ds.n(), ds.d() + 1);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t c = 0; c < ds.d(); ++c) {
            const std::size_t dst = c < at ? c : c + 1;
            if (ds.missing(i, c)) {
                out.set_missing(i, dst);
            } else {
                out.set(i, dst, ds.value(i, c));
            }
        }
        out.set_missing(i, at);
    }
    return out;
}

Vector mixture_regress(const MixtureModel& model, const Dataset& inputs, std::size_t target) {
    if (target >= model.d || inputs.d() + 1 != model.d) {
        throw DimensionMismatch("inputs need exactly d-1 columns and the target index must be < d");
    }
    const ImputationResult r = impute_mixture(model, with_missing_column(inputs, target));
    Vector out(static_cast<Eigen::Index>(inputs.n()));
    for (std::size_t i = 0; i < inputs.n(); ++i) {
        out[static_cast<Eigen::Index>(i)] = r.filled.value(i, target);
    }
    return out;
}

double mixture_regress(const MixtureModel& model, const Vector& x, std::size_t target) {
    Matrix row(1, x.size());
    row.row(0) = x.transpose();
    return mixture_regress(model, Dataset::from_matrix(row), target)[0];
}

// ---------------------------------------------------------------------------

TrainConfig CompareOptions::default_mixture_config() {
    TrainConfig c;
    c.components = 3;
    c.max_iters = 100;
    c.ridge = 1e-3;
    c.seed = 0;
    return c;
}

const std::vector<std::string>& pipeline_names() {
    static const std::vector<std::string> names{"mixture_krr", "mean_krr", "knn1_krr",
                                                "knn10_krr",   "knn_krr",  "mixture_regress"};
    return names;
}

double Report::mean_mse(const std::string& strategy, double fraction) const {
    double sum = 0.0;
    std::size_t count = 0;
    for (const ReportRow& r : rows) {
        if (r.strategy == strategy && r.fraction == fraction) {
            sum += r.mse;
            ++count;
        }
    }
    return count ? sum / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

nlohmann::json Report::summary() const {
    std::map<std::string, std::map<double, std::vector<double>>> groups;
    for (const ReportRow& r : rows) {
        groups[r.strategy][r.fraction].push_back(r.mse);
    }
    nlohmann::json out = nlohmann::json::object();
    for (const std::string& name : pipeline_names()) {
        if (!groups.count(name)) {
            continue;
        }
        nlohmann::json per = nlohmann::json::array();
        for (const auto& [fraction, values] : groups[name]) {
            double mean = 0.0;
            for (double v : values) {
                mean += v;
            }
            mean /= static_cast<double>(values.size());
            double var = 0.0;
            for (double v : values) {
                var += (v - mean) * (v - mean);
            }
            const double sd = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
            per.push_back({{"fraction", fraction}, {"mean_mse", mean}, {"std_mse", sd}, {"seeds", values.size()}});
        }
        out[name] = per;
    }
    return out;
}

void Report::write_csv(std::ostream& out) const {
    out << "strategy,fraction,seed,mse,validation_mse,selected\n";
    for (const ReportRow& r : rows) {
        out << r.strategy << ',' << format_real(r.fraction) << ',' << r.seed << ',' << format_real(r.mse) << ','
            << (std::isnan(r.validation_mse) ? std::string("NA") : format_real(r.validation_mse)) << ",\""
            << r.selected << "\"\n";
    }
}

namespace {

// Columns of a dataset with no missing cells, as a dense matrix.
RowMatrix dense_inputs(const Dataset& ds, std::size_t n_cols) {
    RowMatrix out = ds.values().leftCols(static_cast<Eigen::Index>(n_cols));
    if (!out.allFinite()) {
        throw std::logic_error("imputed inputs still hold missing cells");
    }
    return out;
}

}  // namespace

Report compare_pipelines(const RegressionTask& task, const CompareOptions& opts) {
    task.validate();
    if (!task.inputs.complete()) {
        throw IncompleteReference("the source inputs must be complete before masking");
    }
    if (task.validation.empty() || task.test.empty()) {
        throw InvalidConfig("compare_pipelines needs validation and test rows");
    }
    const std::size_t p = task.inputs.d();
    const std::size_t n = task.inputs.n();
    Report report;

    for (double fraction : opts.fractions) {
        for (std::uint64_t seed : opts.seeds) {
            const Dataset masked = mask_mcar(task.inputs, fraction, seed);

            // Joint table with the target last, normalized on training rows.
            Dataset joint(n, p + 1);
            Dataset complete_joint(n, p + 1);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t c = 0; c < p; ++c) {
                    complete_joint.set(i, c, task.inputs.value(i, c));
                    if (masked.missing(i, c)) {
                        joint.set_missing(i, c);
                    } else {
                        joint.set(i, c, masked.value(i, c));
                    }
                }
                joint.set(i, p, task.targets[static_cast<Eigen::Index>(i)]);
                complete_joint.set(i, p, task.targets[static_cast<Eigen::Index>(i)]);
            }
            const Normalizer norm = fit_normalizer(joint, task.train);
            const Dataset joint_n = norm.normalize(joint);
            const Dataset complete_n = norm.normalize(complete_joint);

            std::vector<std::size_t> input_cols(p);
            for (std::size_t c = 0; c < p; ++c) {
                input_cols[c] = c;
            }
            const Dataset inputs_n = joint_n.columns(input_cols);
            const Dataset reference_n = complete_n.columns(input_cols);
            RegressionTask normalized = task;
            normalized.inputs = inputs_n;
            for (std::size_t i = 0; i < n; ++i) {
                normalized.targets[static_cast<Eigen::Index>(i)] = joint_n.value(i, p);
            }
            const Vector y_test = take(normalized.targets, task.test);

            auto score = [&](const std::string& name, const RowMatrix& x) {
                const GridResult g = grid_select(normalized, x, opts.grid);
                const Vector pred = g.model.predict(take_rows(x, task.test));
                ReportRow row{name, fraction, seed, mse(pred, y_test), g.validation_mse, g.spec.describe()};
                return row;
            };

            // Mixture on the joint training rows; the target is hidden when
            // filling inputs so training and test rows are treated alike.
            TrainConfig cfg = opts.mixture;
            cfg.seed = opts.mixture.seed + seed;
            const FitResult fitted = fit(joint_n.rows(task.train), cfg);
            Dataset hidden_target = joint_n;
            for (std::size_t i = 0; i < n; ++i) {
                hidden_target.set_missing(i, p);
            }
            const ImputationResult mix = impute_mixture(fitted.model, hidden_target);

            const ReportRow mixture_row = score("mixture_krr", dense_inputs(mix.filled, p));
            const ReportRow mean_row =
                score("mean_krr", dense_inputs(impute_global_mean(inputs_n, task.train).filled, p));
            const ReportRow knn1_row = score("knn1_krr", dense_inputs(impute_knn(inputs_n, reference_n, 1).filled, p));
            const ReportRow knn10_row =
                score("knn10_krr", dense_inputs(impute_knn(inputs_n, reference_n, 10).filled, p));
            ReportRow knn_best = knn10_row.validation_mse < knn1_row.validation_mse ? knn10_row : knn1_row;
            knn_best.selected = (knn10_row.validation_mse < knn1_row.validation_mse ? "k=10 " : "k=1 ") + knn_best.selected;
            knn_best.strategy = "knn_krr";

            Vector direct(static_cast<Eigen::Index>(task.test.size()));
            for (std::size_t k = 0; k < task.test.size(); ++k) {
                direct[static_cast<Eigen::Index>(k)] = mix.filled.value(task.test[k], p);
            }
            ReportRow regress_row{"mixture_regress", fraction, seed, mse(direct, y_test),
                                  std::numeric_limits<double>::quiet_NaN(),
                                  "L=" + std::to_string(fitted.model.size())};

            for (const ReportRow& r : {mixture_row, mean_row, knn1_row, knn10_row, knn_best, regress_row}) {
                report.rows.push_back(r);
            }
        }
    }
    return report;
}

}  // namespace gmmtree

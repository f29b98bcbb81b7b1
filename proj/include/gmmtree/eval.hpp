#pragma once

#include "gmmtree/data.hpp"
#include "gmmtree/gmm.hpp"

#include "json.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace gmmtree {

// ---------------------------------------------------------------------------
// Kernel ridge regression

enum class KernelKind { linear, gaussian, polynomial };

struct KernelSpec {
    KernelKind kind = KernelKind::linear;
    double bandwidth = 1.0;  // gaussian: exp(−‖x−x'‖² / (2·bandwidth²))
    int degree = 1;          // polynomial: (scale·⟨x,x'⟩ + 1)^degree
    double scale = 1.0;
    double ridge = 1e-6;     // λ in (K + λI)α = y

    static KernelSpec linear(double ridge);
    static KernelSpec gaussian(double bandwidth, double ridge);
    static KernelSpec polynomial(int degree, double scale, double ridge);

    void validate() const;
    std::string describe() const;
    nlohmann::json to_json() const;
};

bool operator==(const KernelSpec& a, const KernelSpec& b);

Matrix kernel_matrix(const KernelSpec& spec, const RowMatrix& a, const RowMatrix& b);

class KernelRidge {
public:
    KernelSpec spec;
    RowMatrix train;
    Vector alpha;

    Vector predict(const RowMatrix& x) const;
};

/// Solves (K + λI)α = y. Throws SingularSystem when K + λI is not
/// numerically positive definite.
KernelRidge krr_fit(const RowMatrix& x, const Vector& y, const KernelSpec& spec);

/// λ ∈ {1e-8, 1e-6, 1e-4, 1e-2, 1} × {linear; gaussian with bandwidth in
/// {100, 50, 10, 5, 1, 0.5, 0.1, 0.05, 0.01}; polynomial with degree 1..5
/// and scale in {0.01, 0.05, 0.1, 0.5, 1, 5, 10}}: 225 specs.
std::vector<KernelSpec> default_grid();
/// The same λ values over a 9-kernel subset of default_grid (45 specs):
/// linear, gaussian {10, 5, 1, 0.5}, polynomial {2, 3} × {0.1, 0.5}.
std::vector<KernelSpec> compact_grid();

// ---------------------------------------------------------------------------
// Regression tasks

struct RegressionTask {
    Dataset inputs;  // n × p, may have missing cells
    Vector targets;  // n, complete
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;

    void validate() const;
};

/// Splits a complete table whose column `target` is the response. Rows are
/// taken in order: the first n_train for training, the next n_validation for
/// validation, the rest for testing.
RegressionTask task_from_table(const Dataset& table, std::size_t target, std::size_t n_train,
                               std::size_t n_validation);

/// Eight equicorrelated standard normal inputs (pairwise correlation 0.7) and
/// y = sin(x₀) + 0.25·x₁² − 0.25·x₂·x₃ + 0.3·x₄ + 0.2·ε. Splits are the
/// first 50% / next 25% / last 25% of rows.
RegressionTask gen_regression_task(std::size_t n, std::uint64_t seed);

double mse(const Vector& prediction, const Vector& truth);

RowMatrix take_rows(const RowMatrix& m, const std::vector<std::size_t>& rows);
Vector take(const Vector& v, const std::vector<std::size_t>& rows);

struct GridResult {
    std::size_t index = 0;
    KernelSpec spec;
    double validation_mse = 0.0;
    /// One per grid entry; NaN where the system was singular.
    std::vector<double> validation_mse_all;
    KernelRidge model;
};

/// Fits every spec on task.train rows of `inputs` (complete) and keeps the
/// lowest validation MSE, the earliest entry winning ties. Specs whose
/// system is singular are skipped; throws SingularSystem if all are.
GridResult grid_select(const RegressionTask& task, const RowMatrix& inputs, const std::vector<KernelSpec>& grid);

KernelRidge krr_fit(const RegressionTask& task, const RowMatrix& inputs, const KernelSpec& spec);

/// E[y | observed x] under a mixture trained on the joint (input, target)
/// space, with the target at column `target` of the model. `x` holds the
/// d−1 inputs in model column order, NaN marking a missing input.
double mixture_regress(const MixtureModel& model, const Vector& x, std::size_t target);
/// Row-wise over a dataset of inputs.
Vector mixture_regress(const MixtureModel& model, const Dataset& inputs, std::size_t target);

/// Inserts an all-missing column at position `at`.
Dataset with_missing_column(const Dataset& ds, std::size_t at);

// ---------------------------------------------------------------------------
// Pipeline comparison

struct CompareOptions {
    std::vector<double> fractions{0.0, 0.05, 0.1, 0.2, 0.3, 0.4};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<KernelSpec> grid = default_grid();
    TrainConfig mixture = default_mixture_config();

    static TrainConfig default_mixture_config();
};

struct ReportRow {
    std::string strategy;
    double fraction = 0.0;
    std::uint64_t seed = 0;
    double mse = 0.0;             // test MSE, normalized target units
    double validation_mse = 0.0;  // NaN for mixture_regress
    std::string selected;         // chosen kernel / neighbor count
};

struct Report {
    std::vector<ReportRow> rows;

    /// Seed-averaged test MSE of one strategy at one fraction.
    double mean_mse(const std::string& strategy, double fraction) const;
    /// {strategy: {fraction: {mean, std, n}}}; std over seeds (n − 1 denominator).
    nlohmann::json summary() const;
    void write_csv(std::ostream& out) const;
};

/// Pipeline names, in report order.
const std::vector<std::string>& pipeline_names();

/// For each (fraction, seed): MCAR-mask the inputs, normalize inputs and
/// target on the training rows, then score mixture / mean / kNN(1) / kNN(10)
/// imputation followed by kernel ridge, kNN with k picked on validation, and
/// the mixture used directly as the regressor.
Report compare_pipelines(const RegressionTask& task, const CompareOptions& opts);

}  // namespace gmmtree

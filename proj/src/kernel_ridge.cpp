#include "gmmtree/errors.hpp"
#include "gmmtree/eval.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <sstream>

namespace gmmtree {

KernelSpec KernelSpec::linear(double ridge) {
    KernelSpec s;
    s.kind = KernelKind::linear;
    s.ridge = ridge;
    return s;
}

KernelSpec KernelSpec::gaussian(double bandwidth, double ridge) {
    KernelSpec s;
    s.kind = KernelKind::gaussian;
    s.bandwidth = bandwidth;
    s.ridge = ridge;
    return s;
}

KernelSpec KernelSpec::polynomial(int degree, double scale, double ridge) {
    KernelSpec s;
    s.kind = KernelKind::polynomial;
    s.degree = degree;
    s.scale = scale;
    s.ridge = ridge;
    return s;
}

void KernelSpec::validate() const {
    if (!(ridge >= 0.0)) {
        throw InvalidConfig("kernel ridge weight must be >= 0");
    }
    if (kind == KernelKind::gaussian && !(bandwidth > 0.0)) {
        throw InvalidConfig("gaussian bandwidth must be > 0");
    }
    if (kind == KernelKind::polynomial && (degree < 1 || !(scale > 0.0))) {
        throw InvalidConfig("polynomial kernel needs degree >= 1 and scale > 0");
    }
}

std::string KernelSpec::describe() const {
    std::ostringstream out;
    switch (kind) {
        case KernelKind::linear:
            out << "linear";
            break;
        case KernelKind::gaussian:
            out << "gaussian(bw=" << bandwidth << ")";
            break;
        case KernelKind::polynomial:
            out << "poly(deg=" << degree << ",scale=" << scale << ")";
            break;
    }
    out << " lambda=" << ridge;
    return out.str();
}

nlohmann::json KernelSpec::to_json() const {
    nlohmann::json j{{"ridge", ridge}};
    switch (kind) {
        case KernelKind::linear:
            j["kind"] = "linear";
            break;
        case KernelKind::gaussian:
            j["kind"] = "gaussian";
            j["bandwidth"] = bandwidth;
            break;
        case KernelKind::polynomial:
            j["kind"] = "polynomial";
            j["degree"] = degree;
            j["scale"] = scale;
            break;
    }
    return j;
}

bool operator==(const KernelSpec& a, const KernelSpec& b) {
    if (a.kind != b.kind || a.ridge != b.ridge) {
        return false;
    }
    switch (a.kind) {
        case KernelKind::linear:
            return true;
        case KernelKind::gaussian:
            return a.bandwidth == b.bandwidth;
        case KernelKind::polynomial:
            return a.degree == b.degree && a.scale == b.scale;
    }
    return false;
}

namespace {

// Kernel values from inner products ⟨a_i, b_j⟩ and squared norms.
Matrix kernel_from_gram(const KernelSpec& spec, const Matrix& gram, const Vector& norm_a, const Vector& norm_b) {
    switch (spec.kind) {
        case KernelKind::linear:
            return gram;
        case KernelKind::polynomial:
            return (spec.scale * gram.array() + 1.0).pow(spec.degree).matrix();
        case KernelKind::gaussian: {
            const double inv = -1.0 / (2.0 * spec.bandwidth * spec.bandwidth);
            Matrix sq = (-2.0 * gram).colwise() + norm_a;
            sq.rowwise() += norm_b.transpose();
            return (sq.array().max(0.0) * inv).exp().matrix();
        }
    }
    return gram;
}

Vector solve_system(Matrix k, const Vector& y, double ridge) {
    k.diagonal().array() += ridge;
    const double max_diag = k.diagonal().maxCoeff();
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() != Eigen::Success) {
        throw SingularSystem("K + lambda*I is not positive definite");
    }
    const auto& l = llt.matrixLLT();
    for (Eigen::Index i = 0; i < l.rows(); ++i) {
        if (!(l(i, i) * l(i, i) > kPivotTolerance * max_diag)) {
            throw SingularSystem("K + lambda*I is numerically singular");
        }
    }
    return llt.solve(y);
}

}  // namespace

Matrix kernel_matrix(const KernelSpec& spec, const RowMatrix& a, const RowMatrix& b) {
    const Matrix gram = a * b.transpose();
    return kernel_from_gram(spec, gram, a.rowwise().squaredNorm(), b.rowwise().squaredNorm());
}

Vector KernelRidge::predict(const RowMatrix& x) const {
    return kernel_matrix(spec, x, train) * alpha;
}

KernelRidge krr_fit(const RowMatrix& x, const Vector& y, const KernelSpec& spec) {
    spec.validate();
    if (x.rows() != y.size()) {
        throw DimensionMismatch("inputs and targets disagree on row count");
    }
    KernelRidge out;
    out.spec = spec;
    out.train = x;
    out.alpha = solve_system(kernel_matrix(spec, x, x), y, spec.ridge);
    return out;
}

std::vector<KernelSpec> default_grid() {
    const double lambdas[] = {1e-8, 1e-6, 1e-4, 1e-2, 1.0};
    const double bandwidths[] = {100, 50, 10, 5, 1, 0.5, 0.1, 0.05, 0.01};
    const double scales[] = {0.01, 0.05, 0.1, 0.5, 1, 5, 10};
    std::vector<KernelSpec> grid;
    for (double lambda : lambdas) {
        grid.push_back(KernelSpec::linear(lambda));
        for (double bw : bandwidths) {
            grid.push_back(KernelSpec::gaussian(bw, lambda));
        }
        for (int degree = 1; degree <= 5; ++degree) {
            for (double scale : scales) {
                grid.push_back(KernelSpec::polynomial(degree, scale, lambda));
            }
        }
    }
    return grid;
}

std::vector<KernelSpec> compact_grid() {
    const double lambdas[] = {1e-8, 1e-6, 1e-4, 1e-2, 1.0};
    std::vector<KernelSpec> grid;
    for (double lambda : lambdas) {
        grid.push_back(KernelSpec::linear(lambda));
        for (double bw : {10.0, 5.0, 1.0, 0.5}) {
            grid.push_back(KernelSpec::gaussian(bw, lambda));
        }
        for (int degree : {2, 3}) {
            for (double scale : {0.1, 0.5}) {
                grid.push_back(KernelSpec::polynomial(degree, scale, lambda));
            }
        }
    }
    return grid;
}

double mse(const Vector& prediction, const Vector& truth) {
    if (prediction.size() != truth.size()) {
        throw DimensionMismatch("prediction and truth lengths differ");
    }
    if (truth.size() == 0) {
        return 0.0;
    }
    return (prediction - truth).squaredNorm() / static_cast<double>(truth.size());
}

RowMatrix take_rows(const RowMatrix& m, const std::vector<std::size_t>& rows) {
    RowMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.row(static_cast<Eigen::Index>(k)) = m.row(static_cast<Eigen::Index>(rows[k]));
    }
    return out;
}

Vector take(const Vector& v, const std::vector<std::size_t>& rows) {
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out[static_cast<Eigen::Index>(k)] = v[static_cast<Eigen::Index>(rows[k])];
    }
    return out;
}

KernelRidge krr_fit(const RegressionTask& task, const RowMatrix& inputs, const KernelSpec& spec) {
    return krr_fit(take_rows(inputs, task.train), take(task.targets, task.train), spec);
}

GridResult grid_select(const RegressionTask& task, const RowMatrix& inputs, const std::vector<KernelSpec>& grid) {
    if (grid.empty()) {
        throw InvalidConfig("empty kernel grid");
    }
    if (task.validation.empty()) {
        throw InvalidConfig("grid selection needs validation rows");
    }
    if (!inputs.allFinite()) {
        throw InvalidConfig("kernel ridge inputs must be complete");
    }
    const RowMatrix xt = take_rows(inputs, task.train);
    const RowMatrix xv = take_rows(inputs, task.validation);
    const Vector yt = take(task.targets, task.train);
    const Vector yv = take(task.targets, task.validation);
    // Every kernel here is a function of inner products and norms.
    const Matrix gram_tt = xt * xt.transpose();
    const Matrix gram_vt = xv * xt.transpose();
    const Vector norm_t = xt.rowwise().squaredNorm();
    const Vector norm_v = xv.rowwise().squaredNorm();

    GridResult best;
    best.validation_mse = std::numeric_limits<double>::infinity();
    best.validation_mse_all.assign(grid.size(), std::numeric_limits<double>::quiet_NaN());
    bool found = false;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const KernelSpec& spec = grid[g];
        spec.validate();
        Vector alpha;
        try {
            alpha = solve_system(kernel_from_gram(spec, gram_tt, norm_t, norm_t), yt, spec.ridge);
        } catch (const SingularSystem&) {
            continue;
        }
        const Vector pred = kernel_from_gram(spec, gram_vt, norm_v, norm_t) * alpha;
        const double err = mse(pred, yv);
        best.validation_mse_all[g] = err;
        if (std::isfinite(err) && (!found || err < best.validation_mse)) {
            found = true;
            best.index = g;
            best.spec = spec;
            best.validation_mse = err;
            best.model.alpha = std::move(alpha);
        }
    }
    if (!found) {
        throw SingularSystem("every kernel spec in the grid gave a singular system");
    }
    best.model.spec = best.spec;
    best.model.train = xt;
    return best;
}

}  // namespace gmmtree

#include "gmmtree/linalg.hpp"

#include "gmmtree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace gmmtree {

namespace {

void require_square(const Matrix& m, const char* what) {
    if (m.rows() != m.cols()) {
        throw DimensionMismatch(std::string(what) + " must be square, got " +
                                std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

// In-place factorization of the leading n×n block of a (lower part read,
// whole block overwritten with the factor and zeros above the diagonal).
void factor_in_place(Matrix& a, int n, double max_diag) {
    const double threshold = kPivotTolerance * max_diag;
    for (int j = 0; j < n; ++j) {
        double pivot = a(j, j);
        if (j > 0) {
            pivot -= a.row(j).head(j).squaredNorm();
        }
        if (!(pivot > threshold)) {
            throw NotPositiveDefinite("Cholesky pivot " + std::to_string(pivot) + " at position " +
                                      std::to_string(j));
        }
        const double ljj = std::sqrt(pivot);
        a(j, j) = ljj;
        const int below = n - j - 1;
        if (below > 0) {
            if (j > 0) {
                a.col(j).segment(j + 1, below).noalias() -=
                    a.block(j + 1, 0, below, j) * a.row(j).head(j).transpose();
            }
            a.col(j).segment(j + 1, below) /= ljj;
        }
    }
}

}  // namespace

CholFactor::CholFactor(int capacity) {
    reserve(capacity);
}

CholFactor::CholFactor(const CholFactor& other)
    : storage_(other.storage_.rows(), other.storage_.cols()),
      dim_(other.dim_),
      perm_(other.perm_),
      source_diag_(other.source_diag_) {
    storage_.topLeftCorner(dim_, dim_) = other.storage_.topLeftCorner(dim_, dim_);
}

CholFactor& CholFactor::operator=(const CholFactor& other) {
    if (this != &other) {
        CholFactor copy(other);
        *this = std::move(copy);
    }
    return *this;
}

// Only the leading dim×dim block is ever read, and its strict upper triangle
// is kept at zero, so spare capacity is left uninitialized.
void CholFactor::reserve(int capacity) {
    if (capacity <= storage_.rows()) {
        return;
    }
    Matrix grown(capacity, capacity);
    grown.topLeftCorner(dim_, dim_) = storage_.topLeftCorner(dim_, dim_);
    storage_.swap(grown);
}

int CholFactor::position(int index) const noexcept {
    const auto it = std::find(perm_.begin(), perm_.end(), index);
    return it == perm_.end() ? -1 : static_cast<int>(it - perm_.begin());
}

double CholFactor::log_det() const {
    // Product of the pivots with the binary exponent split off, so a single
    // log suffices and the running product cannot overflow.
    double mantissa = 1.0;
    long exponent = 0;
    for (int k = 0; k < dim_; ++k) {
        int e = 0;
        mantissa = std::frexp(mantissa * storage_(k, k), &e);
        exponent += e;
    }
    return 2.0 * (std::log(mantissa) + static_cast<double>(exponent) * std::numbers::ln2);
}

Matrix CholFactor::reconstruct() const {
    const Matrix l = lower();
    return l.triangularView<Eigen::Lower>() * l.transpose();
}

void CholFactor::append(const SymMatrix& full, int index) {
    if (index < 0 || index >= full.rows()) {
        throw DimensionMismatch("variable " + std::to_string(index) + " outside source matrix");
    }
    if (contains(index)) {
        throw IndexAlreadyPresent("variable " + std::to_string(index) + " already in factor");
    }
    const int n = dim_;
    if (n + 1 > storage_.rows()) {
        reserve(std::max<int>(static_cast<int>(full.rows()), 2 * n + 1));
    }
    Vector row(n);
    for (int k = 0; k < n; ++k) {
        row[k] = full(perm_[k], index);
    }
    if (n > 0) {
        storage_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(row);
    }
    const double diag = full(index, index);
    const double pivot = diag - row.squaredNorm();
    double max_diag = diag;
    for (double v : source_diag_) {
        max_diag = std::max(max_diag, v);
    }
    if (!(pivot > kPivotTolerance * max_diag)) {
        throw NotPositiveDefinite("appending variable " + std::to_string(index) +
                                  " leaves pivot " + std::to_string(pivot));
    }
    storage_.row(n).head(n) = row.transpose();
    storage_(n, n) = std::sqrt(pivot);
    storage_.col(n).head(n).setZero();
    perm_.push_back(index);
    source_diag_.push_back(diag);
    ++dim_;
}

void CholFactor::remove(int index) {
    const int k = position(index);
    if (k < 0) {
        throw IndexNotPresent("variable " + std::to_string(index) + " not in factor");
    }
    const int n = dim_;
    const int m = n - 1 - k;  // size of the trailing block
    Vector spill = storage_.col(k).segment(k + 1, m);
    const Eigen::Index ld = storage_.rows();
    double* base = storage_.data();

    // Shift rows below k up by one in the leading columns.
    for (int c = 0; c < k; ++c) {
        double* col = base + c * ld;
        std::copy(col + k + 1, col + n, col + k);
    }
    // Shift the trailing block up and left by one.
    for (int c = k; c < n - 1; ++c) {
        double* dst = base + c * ld;
        const double* src = base + (c + 1) * ld;
        std::copy(src + c + 1, src + n, dst + c);
    }
    storage_.row(n - 1).head(n).setZero();
    storage_.col(n - 1).head(n).setZero();

    // T Tᵀ + spill spillᵀ, restored to lower-triangular form by rotations
    // acting on the column pair (T(:, i), spill).
    for (int i = 0; i < m; ++i) {
        const int r = k + i;
        const double b = spill[i];
        if (b == 0.0) {
            continue;
        }
        const double a = storage_(r, r);
        const double h = std::sqrt(a * a + b * b);
        const double c = a / h;
        const double s = b / h;
        storage_(r, r) = h;
        double* col = base + r * ld;
        for (int j = i + 1; j < m; ++j) {
            const double t = col[k + j];
            const double x = spill[j];
            col[k + j] = c * t + s * x;
            spill[j] = c * x - s * t;
        }
    }
    perm_.erase(perm_.begin() + k);
    source_diag_.erase(source_diag_.begin() + k);
    --dim_;
}

void CholFactor::solve_lower_in_place(Eigen::Ref<Vector> z) const {
    if (z.size() != dim_) {
        throw DimensionMismatch("solve: vector length " + std::to_string(z.size()) +
                                " vs factor dim " + std::to_string(dim_));
    }
    if (dim_ > 0) {
        lower().triangularView<Eigen::Lower>().solveInPlace(z);
    }
}

void CholFactor::solve_upper_in_place(Eigen::Ref<Vector> z) const {
    if (z.size() != dim_) {
        throw DimensionMismatch("solve: vector length " + std::to_string(z.size()) +
                                " vs factor dim " + std::to_string(dim_));
    }
    if (dim_ > 0) {
        lower().transpose().triangularView<Eigen::Upper>().solveInPlace(z);
    }
}

CholFactor cholesky(const SymMatrix& m) {
    require_square(m, "cholesky input");
    IndexList all(static_cast<std::size_t>(m.rows()));
    for (int k = 0; k < static_cast<int>(m.rows()); ++k) {
        all[static_cast<std::size_t>(k)] = k;
    }
    return cholesky(m, all);
}

CholFactor cholesky(const SymMatrix& full, const IndexList& indices) {
    require_square(full, "cholesky input");
    const int n = static_cast<int>(indices.size());
    CholFactor f(static_cast<int>(full.rows()));
    double max_diag = 0.0;
    f.source_diag_.resize(indices.size());
    for (int j = 0; j < n; ++j) {
        const int src_col = indices[static_cast<std::size_t>(j)];
        if (src_col < 0 || src_col >= full.rows()) {
            throw DimensionMismatch("cholesky index out of range");
        }
        for (int i = 0; i < j; ++i) {
            f.storage_(i, j) = 0.0;
        }
        for (int i = j; i < n; ++i) {
            f.storage_(i, j) = full(indices[static_cast<std::size_t>(i)], src_col);
        }
        f.source_diag_[static_cast<std::size_t>(j)] = full(src_col, src_col);
        max_diag = std::max(max_diag, full(src_col, src_col));
    }
    factor_in_place(f.storage_, n, max_diag);
    f.dim_ = n;
    f.perm_ = indices;
    return f;
}

Vector solve_lower(const CholFactor& f, const Vector& z) {
    if (z.size() != f.dim()) {
        throw DimensionMismatch("solve_lower: vector length " + std::to_string(z.size()) +
                                " vs factor dim " + std::to_string(f.dim()));
    }
    // z is in ascending variable order; map each factor row to its rank.
    IndexList sorted = f.perm();
    std::sort(sorted.begin(), sorted.end());
    Vector w(f.dim());
    for (int k = 0; k < f.dim(); ++k) {
        const auto rank = std::lower_bound(sorted.begin(), sorted.end(), f.perm()[k]) - sorted.begin();
        w[k] = z[rank];
    }
    f.solve_lower_in_place(w);
    return w;
}

CholFactor chol_insert(CholFactor f, const SymMatrix& full, int new_index) {
    f.append(full, new_index);
    return f;
}

CholFactor chol_delete(CholFactor f, int drop_index) {
    f.remove(drop_index);
    return f;
}

void BlockPartition::validate(int dim) const {
    if (static_cast<int>(x.size() + y.size()) != dim) {
        throw DimensionMismatch("partition sizes do not cover the matrix");
    }
    std::vector<char> seen(static_cast<std::size_t>(dim), 0);
    for (const IndexList* block : {&x, &y}) {
        for (int idx : *block) {
            if (idx < 0 || idx >= dim || seen[static_cast<std::size_t>(idx)]) {
                throw DimensionMismatch("partition blocks must be disjoint and in range");
            }
            seen[static_cast<std::size_t>(idx)] = 1;
        }
    }
}

namespace {

void symmetrize_in_place(SymMatrix& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        for (Eigen::Index i = j + 1; i < m.rows(); ++i) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = v;
            m(j, i) = v;
        }
    }
}

}  // namespace

SymMatrix ivl_extend(const SymMatrix& lambda_xx_inv, const Matrix& lambda_yx,
                     const SymMatrix& lambda_yy) {
    require_square(lambda_xx_inv, "Λ_XX⁻¹");
    require_square(lambda_yy, "Λ_YY");
    const Eigen::Index nx = lambda_xx_inv.rows();
    const Eigen::Index ny = lambda_yy.rows();
    if (lambda_yx.rows() != ny || lambda_yx.cols() != nx) {
        throw DimensionMismatch("Λ_YX shape does not match the diagonal blocks");
    }
    if (ny == 0) {
        return lambda_xx_inv;
    }
    if (ny == 1) {
        // One new variable: the Schur complement is a scalar and the old
        // block takes a symmetric rank-1 update.
        Vector b(nx);
        b.noalias() = lambda_xx_inv * lambda_yx.row(0).transpose();
        const double schur = lambda_yy(0, 0) - lambda_yx.row(0).dot(b);
        if (!(schur > kPivotTolerance * std::abs(lambda_yy(0, 0)))) {
            throw NotPositiveDefinite("Schur complement " + std::to_string(schur) + " is not positive");
        }
        const double root = 1.0 / std::sqrt(schur);
        const Vector u = root * b;
        SymMatrix out(nx + 1, nx + 1);
        out.topLeftCorner(nx, nx) = lambda_xx_inv;
        out.topLeftCorner(nx, nx).noalias() += u * u.transpose();
        out.col(nx).head(nx) = -root * u;
        out.row(nx).head(nx) = out.col(nx).head(nx).transpose();
        out(nx, nx) = root * root;
        return out;
    }
    Matrix b(ny, nx);
    b.noalias() = lambda_yx * lambda_xx_inv;  // B = Λ_YX Λ_XX⁻¹
    SymMatrix schur = lambda_yy;
    schur.noalias() -= b * lambda_yx.transpose();  // Λ_{Y|X}
    SymMatrix schur_inv = inverse_spd(schur);
    Matrix sb(ny, nx);
    sb.noalias() = schur_inv * b;
    SymMatrix out(nx + ny, nx + ny);
    out.topLeftCorner(nx, nx) = lambda_xx_inv;
    out.topLeftCorner(nx, nx).noalias() += b.transpose() * sb;
    out.bottomLeftCorner(ny, nx) = -sb;
    out.topRightCorner(nx, ny) = -sb.transpose();
    out.bottomRightCorner(ny, ny) = schur_inv;
    symmetrize_in_place(out);
    return out;
}

SymMatrix ivl_shrink(const SymMatrix& lambda_inv, const BlockPartition& part) {
    require_square(lambda_inv, "Λ⁻¹");
    part.validate(static_cast<int>(lambda_inv.rows()));
    const Eigen::Index n = lambda_inv.rows();
    const bool drop_one_in_order =
        part.y.size() == 1 && std::is_sorted(part.x.begin(), part.x.end()) && !part.x.empty();
    if (!drop_one_in_order) {
        SymMatrix out = gather(lambda_inv, part.x, part.x);
        if (part.y.empty() || part.x.empty()) {
            return out;
        }
        const CholFactor yy = cholesky(lambda_inv, part.y);
        Matrix w = gather(lambda_inv, part.y, part.x);
        yy.lower().triangularView<Eigen::Lower>().solveInPlace(w);
        out.noalias() -= w.transpose() * w;
        symmetrize_in_place(out);
        return out;
    }

    // One variable leaves and the rest keep their order: cut its row and
    // column out blockwise, then apply a symmetric rank-1 downdate.
    const Eigen::Index y = part.y.front();
    const Eigen::Index tail = n - 1 - y;
    const double pivot = lambda_inv(y, y);
    if (!(pivot > 0.0)) {
        throw NotPositiveDefinite("eliminated variance " + std::to_string(pivot) + " is not positive");
    }
    SymMatrix out(n - 1, n - 1);
    out.topLeftCorner(y, y) = lambda_inv.topLeftCorner(y, y);
    out.topRightCorner(y, tail) = lambda_inv.block(0, y + 1, y, tail);
    out.bottomLeftCorner(tail, y) = lambda_inv.block(y + 1, 0, tail, y);
    out.bottomRightCorner(tail, tail) = lambda_inv.bottomRightCorner(tail, tail);
    Vector u(n - 1);
    u.head(y) = lambda_inv.col(y).head(y);
    u.tail(tail) = lambda_inv.col(y).tail(tail);
    u /= std::sqrt(pivot);
    out.noalias() -= u * u.transpose();
    return out;
}

SymMatrix conditional_covariance(const SymMatrix& sigma, const IndexList& missing) {
    require_square(sigma, "Σ");
    IndexList sorted_missing = missing;
    std::sort(sorted_missing.begin(), sorted_missing.end());
    const IndexList observed = complement(sorted_missing, static_cast<int>(sigma.rows()));
    return conditional_covariance(sigma, cholesky(sigma, observed), missing);
}

SymMatrix conditional_covariance(const SymMatrix& sigma, const CholFactor& observed,
                                 const IndexList& missing) {
    SymMatrix out = gather(sigma, missing, missing);
    if (observed.dim() == 0 || missing.empty()) {
        return out;
    }
    Matrix w = gather(sigma, observed.perm(), missing);
    observed.lower().triangularView<Eigen::Lower>().solveInPlace(w);
    out.noalias() -= w.transpose() * w;
    symmetrize_in_place(out);
    return out;
}

SymMatrix inverse_spd(const SymMatrix& m) {
    require_square(m, "inverse_spd input");
    const CholFactor f = cholesky(m);
    const Eigen::Index n = m.rows();
    Matrix linv = Matrix::Identity(n, n);
    f.lower().triangularView<Eigen::Lower>().solveInPlace(linv);
    SymMatrix out = linv.transpose() * linv;
    return 0.5 * (out + out.transpose());
}

Matrix gather(const Matrix& m, const IndexList& rows, const IndexList& cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) {
        for (std::size_t r = 0; r < rows.size(); ++r) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = m(rows[r], cols[c]);
        }
    }
    return out;
}

IndexList complement(const IndexList& subset, int dim) {
    std::vector<char> in(static_cast<std::size_t>(dim), 0);
    for (int idx : subset) {
        in[static_cast<std::size_t>(idx)] = 1;
    }
    IndexList out;
    out.reserve(static_cast<std::size_t>(dim) - subset.size());
    for (int k = 0; k < dim; ++k) {
        if (!in[static_cast<std::size_t>(k)]) {
            out.push_back(k);
        }
    }
    return out;
}

double relative_frobenius(const Matrix& a, const Matrix& b) {
    const double denom = std::max(b.norm(), std::numeric_limits<double>::min());
    return (a - b).norm() / denom;
}

}  // namespace gmmtree

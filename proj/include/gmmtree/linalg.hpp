#pragma once

#include <Eigen/Dense>

#include <vector>

namespace gmmtree {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Dense symmetric matrix. Symmetry is a caller contract.
using SymMatrix = Eigen::MatrixXd;
using IndexList = std::vector<int>;

/// A pivot at or below this fraction of the largest source diagonal entry is
/// treated as a loss of positive definiteness.
inline constexpr double kPivotTolerance = 1e-12;

/// Lower Cholesky factor of a principal sub-matrix of some source matrix.
///
/// Row k of the factor corresponds to source variable perm()[k]. Variables
/// appended with append() always take the trailing position, and remove()
/// keeps the relative order of the remaining ones. Storage is allocated with
/// spare capacity so that a chain of appends does not reallocate.
class CholFactor {
public:
    CholFactor() = default;
    explicit CholFactor(int capacity);
    CholFactor(const CholFactor& other);
    CholFactor(CholFactor&&) noexcept = default;
    CholFactor& operator=(const CholFactor& other);
    CholFactor& operator=(CholFactor&&) noexcept = default;

    int dim() const noexcept { return dim_; }
    const IndexList& perm() const noexcept { return perm_; }
    Eigen::Block<const Matrix> lower() const { return storage_.topLeftCorner(dim_, dim_); }

    /// Position of a source variable in the factor, or -1.
    int position(int index) const noexcept;
    bool contains(int index) const noexcept { return position(index) >= 0; }

    /// log|L Lᵀ| = 2 Σ log L_kk.
    double log_det() const;
    /// L Lᵀ, in factor order.
    Matrix reconstruct() const;

    /// Grows the factor by one row for source variable `index`, reading the
    /// new row/column from `full`. O(dim²).
    void append(const SymMatrix& full, int index);
    /// Drops source variable `index` and re-triangularizes the trailing block
    /// with plane rotations. O(dim²).
    void remove(int index);

    /// z ← L⁻¹ z, z in factor order.
    void solve_lower_in_place(Eigen::Ref<Vector> z) const;
    /// z ← L⁻ᵀ z, z in factor order.
    void solve_upper_in_place(Eigen::Ref<Vector> z) const;

private:
    friend CholFactor cholesky(const SymMatrix& full, const IndexList& indices);

    void reserve(int capacity);

    Matrix storage_;
    int dim_ = 0;
    IndexList perm_;
    std::vector<double> source_diag_;
};

/// Factor of m with the identity ordering. Throws NotPositiveDefinite.
CholFactor cholesky(const SymMatrix& m);
/// Factor of full(indices, indices); perm() == indices.
CholFactor cholesky(const SymMatrix& full, const IndexList& indices);

/// w = L⁻¹ z where z lists values for the factor's variables in ascending
/// variable order (the function applies the factor's permutation).
Vector solve_lower(const CholFactor& f, const Vector& z);

CholFactor chol_insert(CholFactor f, const SymMatrix& full, int new_index);
CholFactor chol_delete(CholFactor f, int drop_index);

/// Split of matrix positions 0..dim-1 into a retained block X and block Y.
struct BlockPartition {
    IndexList x;
    IndexList y;

    void validate(int dim) const;
};

/// Inverse of the partitioned matrix [[Λ_XX, Λ_XY], [Λ_YX, Λ_YY]] given Λ_XX⁻¹
/// and the Y rows of Λ. The result is ordered (X, Y). Cost O(|Y|·|X|²).
SymMatrix ivl_extend(const SymMatrix& lambda_xx_inv, const Matrix& lambda_yx,
                     const SymMatrix& lambda_yy);

/// Recovers Λ_XX⁻¹ from the full inverse Λ⁻¹:
/// (Λ⁻¹)_XX − (Λ⁻¹)_XY ((Λ⁻¹)_YY)⁻¹ (Λ⁻¹)_YX, ordered as part.x.
SymMatrix ivl_shrink(const SymMatrix& lambda_inv, const BlockPartition& part);

/// Σ_mm − Σ_mo Σ_oo⁻¹ Σ_om computed directly, rows ordered as `missing`.
SymMatrix conditional_covariance(const SymMatrix& sigma, const IndexList& missing);
/// Same, reusing a factor of Σ_oo whose perm() lists the observed variables.
SymMatrix conditional_covariance(const SymMatrix& sigma, const CholFactor& observed,
                                 const IndexList& missing);

SymMatrix inverse_spd(const SymMatrix& m);

Matrix gather(const Matrix& m, const IndexList& rows, const IndexList& cols);

/// Indices in 0..dim-1 that are not in `subset` (ascending).
IndexList complement(const IndexList& subset, int dim);

/// ‖a − b‖_F / max(‖b‖_F, tiny).
double relative_frobenius(const Matrix& a, const Matrix& b);

}  // namespace gmmtree

#include "gmmtree/errors.hpp"
#include "gmmtree/gmm.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace gmmtree {

SymMatrix regularize(const SymMatrix& cov, double ridge, double pc_fraction) {
    if (cov.rows() != cov.cols()) {
        throw DimensionMismatch("covariance must be square");
    }
    if (!(ridge >= 0.0)) {
        throw InvalidConfig("ridge must be >= 0");
    }
    if (!(pc_fraction > 0.0 && pc_fraction <= 1.0)) {
        throw InvalidConfig("pc_fraction must lie in (0, 1]");
    }
    SymMatrix sym = 0.5 * (cov + cov.transpose());
    const Eigen::Index d = sym.rows();
    if (pc_fraction >= 1.0 || d == 0) {
        sym.diagonal().array() += ridge;
        return sym;
    }

    Eigen::SelfAdjointEigenSolver<SymMatrix> es(sym);
    Vector values = es.eigenvalues();  // ascending
    // The small slack keeps e.g. 0.9·10 from rounding up to 10.
    const auto keep = std::clamp<Eigen::Index>(
        static_cast<Eigen::Index>(std::ceil(pc_fraction * static_cast<double>(d) - 1e-9)), 1, d);
    const Eigen::Index dropped = d - keep;
    const double smallest_kept = std::max(values[dropped], 0.0);
    const double floor_value = std::max(ridge, smallest_kept * 1e-4);
    for (Eigen::Index k = 0; k < d; ++k) {
        values[k] = (k < dropped ? floor_value : std::max(values[k], 0.0)) + ridge;
    }
    const Matrix& v = es.eigenvectors();
    SymMatrix out = v * values.asDiagonal() * v.transpose();
    return 0.5 * (out + out.transpose());
}

}  // namespace gmmtree

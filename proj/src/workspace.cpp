#include "gmmtree/workspace.hpp"

#include "gmmtree/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gmmtree {

PatternWorkspace workspace_from_scratch(const GaussianComponent& c, const MissingPattern& pattern,
                                        PatternId id) {
    PatternWorkspace ws;
    ws.pattern = id;
    ws.mask = pattern.mask;
    ws.missing_order = pattern.mask.set_indices();
    const IndexList observed = pattern.mask.clear_indices();
    ws.factor = cholesky(c.cov, observed);
    ws.cond_cov = conditional_covariance(c.cov, ws.factor, ws.missing_order);
    ws.fresh = true;
    return ws;
}

namespace {

void chain_update(PatternWorkspace& ws, const IndexList& newly_missing, const IndexList& newly_observed,
                  const GaussianComponent& c) {
    for (int v : newly_missing) {
        ws.factor.remove(v);
    }
    for (int v : newly_observed) {
        ws.factor.append(c.cov, v);
    }

    if (!newly_observed.empty()) {
        // Positions inside the current missing block that become observed.
        BlockPartition part;
        IndexList kept;
        for (int k = 0; k < static_cast<int>(ws.missing_order.size()); ++k) {
            const int v = ws.missing_order[static_cast<std::size_t>(k)];
            if (std::find(newly_observed.begin(), newly_observed.end(), v) != newly_observed.end()) {
                part.y.push_back(k);
            } else {
                part.x.push_back(k);
                kept.push_back(v);
            }
        }
        ws.cond_cov = part.x.empty() ? SymMatrix(0, 0) : ivl_shrink(ws.cond_cov, part);
        ws.missing_order = std::move(kept);
    }

    if (!newly_missing.empty()) {
        const Matrix lambda_yx = gather(c.precision, newly_missing, ws.missing_order);
        const SymMatrix lambda_yy = gather(c.precision, newly_missing, newly_missing);
        ws.cond_cov = ivl_extend(ws.cond_cov, lambda_yx, lambda_yy);
        ws.missing_order.insert(ws.missing_order.end(), newly_missing.begin(), newly_missing.end());
    }
}

}  // namespace

PatternWorkspace advance_workspace(PatternWorkspace ws, const MissingPattern& to, PatternId id,
                                   const GaussianComponent& c) {
    if (ws.mask.size() != to.mask.size()) {
        throw DimensionMismatch("workspace and pattern disagree on dimension");
    }
    IndexList newly_missing;
    IndexList newly_observed;
    for (std::size_t v = 0; v < to.mask.size(); ++v) {
        const bool was = ws.mask.test(v);
        const bool now = to.mask.test(v);
        if (now && !was) {
            newly_missing.push_back(static_cast<int>(v));
        } else if (was && !now) {
            newly_observed.push_back(static_cast<int>(v));
        }
    }
    ws.pattern = id;
    ws.mask = to.mask;
    ws.fresh = false;
    if (newly_missing.empty() && newly_observed.empty()) {
        return ws;
    }
    try {
        chain_update(ws, newly_missing, newly_observed, c);
    } catch (const NotPositiveDefinite&) {
        return workspace_from_scratch(c, to, id);
    } catch (const SingularSystem&) {
        return workspace_from_scratch(c, to, id);
    }
    return ws;
}

namespace {

Vector whitened_residual(const GaussianComponent& c, const PatternWorkspace& ws, const Dataset& ds,
                         std::size_t row) {
    const IndexList& perm = ws.factor.perm();
    Vector w(static_cast<Eigen::Index>(perm.size()));
    for (std::size_t k = 0; k < perm.size(); ++k) {
        w[static_cast<Eigen::Index>(k)] = ds.value(row, static_cast<std::size_t>(perm[k])) - c.mean[perm[k]];
    }
    ws.factor.solve_lower_in_place(w);
    return w;
}

}  // namespace

double log_density_observed(const GaussianComponent& c, const PatternWorkspace& ws, const Dataset& ds,
                            std::size_t row) {
    const int n_o = ws.factor.dim();
    if (n_o == 0) {
        return 0.0;
    }
    const double quad = whitened_residual(c, ws, ds, row).squaredNorm();
    return -0.5 * (n_o * std::log(2.0 * std::numbers::pi) + ws.factor.log_det() + quad);
}

Vector impute_for_component(const GaussianComponent& c, const PatternWorkspace& ws, const Dataset& ds,
                            std::size_t row) {
    const auto d = static_cast<Eigen::Index>(ds.d());
    Vector out(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        out[k] = ws.mask.test(static_cast<std::size_t>(k)) ? c.mean[k] : ds.value(row, static_cast<std::size_t>(k));
    }
    if (ws.missing_order.empty() || ws.factor.dim() == 0) {
        return out;
    }
    Vector v = whitened_residual(c, ws, ds, row);
    ws.factor.solve_upper_in_place(v);
    const Matrix sigma_mo = gather(c.cov, ws.missing_order, ws.factor.perm());
    const Vector shift = sigma_mo * v;
    for (std::size_t k = 0; k < ws.missing_order.size(); ++k) {
        out[ws.missing_order[k]] += shift[static_cast<Eigen::Index>(k)];
    }
    return out;
}

}  // namespace gmmtree

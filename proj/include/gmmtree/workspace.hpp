#pragma once

#include "gmmtree/gmm.hpp"
#include "gmmtree/patterns.hpp"

namespace gmmtree {

/// Cached matrices for one (component, pattern) pair: the Cholesky factor
/// of Σ_oo and the conditional covariance ((Σ⁻¹)_mm)⁻¹ of the missing block.
struct PatternWorkspace {
    PatternId pattern = 0;
    Mask mask;
    CholFactor factor;        // perm(): observed variables in factor order
    SymMatrix cond_cov;       // rows/cols follow missing_order
    IndexList missing_order;
    bool fresh = false;       // built from scratch rather than chained
};

PatternWorkspace workspace_from_scratch(const GaussianComponent& c, const MissingPattern& pattern,
                                        PatternId id);

/// Moves a workspace from its parent pattern to `to`: factor rows are removed
/// for newly missing variables and appended for newly observed ones; the
/// conditional covariance is shrunk by the newly observed block and extended
/// by the newly missing one using sub-blocks of c.precision. Falls back to a
/// from-scratch rebuild if an update loses positive definiteness.
PatternWorkspace advance_workspace(PatternWorkspace parent, const MissingPattern& to, PatternId id,
                                   const GaussianComponent& c);

/// log N(x_o; μ_o, Σ_oo) of a dataset row through the workspace factor.
double log_density_observed(const GaussianComponent& c, const PatternWorkspace& ws,
                            const Dataset& ds, std::size_t row);

/// x̂ with observed coordinates copied and missing ones set to
/// μ_m + Σ_mo Σ_oo⁻¹ (x_o − μ_o).
Vector impute_for_component(const GaussianComponent& c, const PatternWorkspace& ws,
                            const Dataset& ds, std::size_t row);

}  // namespace gmmtree

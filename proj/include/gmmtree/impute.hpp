#pragma once

#include "gmmtree/data.hpp"
#include "gmmtree/gmm.hpp"

#include "json.hpp"

#include <optional>
#include <string>
#include <vector>

namespace gmmtree {

struct ImputationResult {
    Dataset filled;             // no missing cells
    std::vector<Mask> imputed;  // per row, set bit = cell was filled in
    std::string strategy;
    nlohmann::json parameters = nlohmann::json::object();

    /// Provenance as a dataset of 0/1 flags (1 = imputed).
    Dataset provenance() const;
};

/// Σ_j p_ij x̂^{i,j}: responsibility-weighted conditional means, computed
/// along the pattern tree. Observed cells are copied unchanged.
ImputationResult impute_mixture(const MixtureModel& model, const Dataset& ds);

/// Column means over the observed cells of `train_rows` (all rows when
/// omitted); a column with no such cell is filled with 0.
ImputationResult impute_global_mean(const Dataset& ds,
                                    const std::optional<std::vector<std::size_t>>& train_rows = std::nullopt);

/// Oracle nearest neighbors: distances between rows are Euclidean over all
/// columns of the complete `reference` (same shape as ds). Cell (i, c) takes
/// the mean of ds(r, c) over the k nearest rows r whose column c is observed
/// in ds, nearer first and lower row index first on ties. The query row never
/// qualifies for its own missing cells.
ImputationResult impute_knn(const Dataset& ds, const Dataset& reference, std::size_t k);

}  // namespace gmmtree

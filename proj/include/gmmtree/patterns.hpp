#pragma once

#include "gmmtree/bitmask.hpp"
#include "gmmtree/data.hpp"

#include "json.hpp"

#include <cstddef>
#include <optional>
#include <unordered_map>
#include <vector>

namespace gmmtree {

using PatternId = std::size_t;

/// A distinct missingness mask and the rows that carry it.
struct MissingPattern {
    Mask mask;
    std::vector<std::size_t> sample_ids;

    std::size_t n_missing() const noexcept { return mask.count(); }
    std::size_t n_observed() const noexcept { return mask.size() - mask.count(); }
};

struct PatternEdge {
    PatternId a = 0;
    PatternId b = 0;
    std::size_t n_d = 0;
};

struct TreeNode {
    std::optional<PatternId> parent;
    std::size_t n_d = 0;  // Hamming distance to the parent, 0 at the root
    std::size_t depth = 0;
    std::vector<PatternId> children;  // ascending
};

/// Minimum spanning tree over a group of patterns, with a pre-order walk.
struct PatternTree {
    PatternId root = 0;
    std::unordered_map<PatternId, TreeNode> nodes;
    std::vector<PatternId> visit_order;
    /// Nodes whose depth is a multiple of this are rebuilt from scratch;
    /// nullopt means only the root is.
    std::optional<std::size_t> recompute_every;

    const TreeNode& node(PatternId id) const { return nodes.at(id); }
    std::size_t total_weight() const;
    std::vector<PatternEdge> edges() const;
    bool recompute_at(PatternId id) const;
};

/// One distinct mask per pattern, ordered by first occurrence.
std::vector<MissingPattern> extract_patterns(const Dataset& ds);

/// Dense Prim over the listed patterns (all of them when `members` is empty).
/// The root is the member with the fewest missing variables, first occurrence
/// winning ties; among equal-weight candidate edges the one reaching the
/// smaller pattern id wins, then the smaller tree-side id.
PatternTree build_mst(const std::vector<MissingPattern>& patterns,
                      const std::vector<PatternId>& members = {},
                      std::optional<std::size_t> recompute_every = 16);

/// Partitions patterns into groups of at most `max_graph` by farthest-point
/// seeding and capacity-bounded Hamming k-medoids. One group when
/// patterns.size() <= max_graph. Groups list ids ascending.
std::vector<std::vector<PatternId>> cluster_patterns(const std::vector<MissingPattern>& patterns,
                                                     std::size_t max_graph);

/// Contiguous block of samples sharing one pattern, in visiting order.
struct ScheduleBlock {
    PatternId pattern = 0;
    std::size_t tree = 0;
    std::optional<PatternId> parent;
    std::size_t n_d = 0;
    std::size_t depth = 0;
    bool from_scratch = false;
    std::size_t offset = 0;  // into sample_order
    std::size_t count = 0;
};

struct PatternSchedule {
    std::vector<MissingPattern> patterns;
    std::vector<PatternTree> trees;
    std::vector<ScheduleBlock> blocks;
    std::vector<std::size_t> sample_order;

    std::size_t total_weight() const;
};

/// Orders samples so that each pattern's rows are contiguous and pattern
/// blocks follow each tree's visit order, trees in sequence.
PatternSchedule schedule(std::vector<PatternTree> trees, std::vector<MissingPattern> patterns);

struct PlanOptions {
    std::size_t max_patterns_per_tree = 4096;
    std::optional<std::size_t> recompute_every = 16;
};

/// extract_patterns → cluster_patterns → build_mst per group → schedule.
PatternSchedule plan_patterns(const Dataset& ds, const PlanOptions& opts = {});

/// Diagnostic dump: masks as hex, parent edges, weights.
nlohmann::json schedule_to_json(const PatternSchedule& s);

}  // namespace gmmtree

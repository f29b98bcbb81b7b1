#include "gmmtree/patterns.hpp"

#include "gmmtree/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <limits>
#include <tuple>

namespace gmmtree {

std::size_t PatternTree::total_weight() const {
    std::size_t total = 0;
    for (const auto& [id, node] : nodes) {
        total += node.n_d;
    }
    return total;
}

std::vector<PatternEdge> PatternTree::edges() const {
    std::vector<PatternEdge> out;
    for (PatternId id : visit_order) {
        const TreeNode& n = nodes.at(id);
        if (n.parent) {
            out.push_back({*n.parent, id, n.n_d});
        }
    }
    return out;
}

bool PatternTree::recompute_at(PatternId id) const {
    const std::size_t depth = nodes.at(id).depth;
    if (depth == 0) {
        return true;
    }
    return recompute_every && *recompute_every > 0 && depth % *recompute_every == 0;
}

std::vector<MissingPattern> extract_patterns(const Dataset& ds) {
    std::vector<MissingPattern> out;
    std::unordered_map<Mask, std::size_t, MaskHash> index;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const Mask& m = ds.row_mask(i);
        const auto [it, inserted] = index.try_emplace(m, out.size());
        if (inserted) {
            out.push_back(MissingPattern{m, {}});
        }
        out[it->second].sample_ids.push_back(i);
    }
    return out;
}

PatternTree build_mst(const std::vector<MissingPattern>& patterns,
                      const std::vector<PatternId>& members_in,
                      std::optional<std::size_t> recompute_every) {
    std::vector<PatternId> members = members_in;
    if (members.empty()) {
        members.resize(patterns.size());
        for (std::size_t k = 0; k < patterns.size(); ++k) {
            members[k] = k;
        }
    }
    if (members.empty()) {
        throw InvalidConfig("build_mst needs at least one pattern");
    }
    std::sort(members.begin(), members.end());
    const std::size_t m = members.size();

    std::size_t root_local = 0;
    for (std::size_t k = 1; k < m; ++k) {
        if (patterns[members[k]].n_missing() < patterns[members[root_local]].n_missing()) {
            root_local = k;
        }
    }

    constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> key(m, kInf);
    std::vector<std::size_t> from(m, kInf);
    std::vector<char> in_tree(m, 0);
    key[root_local] = 0;

    PatternTree tree;
    tree.root = members[root_local];
    tree.recompute_every = recompute_every;

    for (std::size_t step = 0; step < m; ++step) {
        // Smallest key; local order equals pattern-id order, so the first
        // minimum is the smaller pattern id.
        std::size_t u = kInf;
        for (std::size_t v = 0; v < m; ++v) {
            if (!in_tree[v] && (u == kInf || key[v] < key[u])) {
                u = v;
            }
        }
        in_tree[u] = 1;
        TreeNode node;
        if (from[u] != kInf) {
            node.parent = members[from[u]];
            node.n_d = key[u];
        }
        tree.nodes.emplace(members[u], std::move(node));

        const Mask& mu = patterns[members[u]].mask;
        for (std::size_t v = 0; v < m; ++v) {
            if (in_tree[v]) {
                continue;
            }
            const std::size_t w = hamming(mu, patterns[members[v]].mask);
            if (w < key[v] || (w == key[v] && u < from[v])) {
                key[v] = w;
                from[v] = u;
            }
        }
    }

    for (auto& [id, node] : tree.nodes) {
        if (node.parent) {
            tree.nodes.at(*node.parent).children.push_back(id);
        }
    }
    for (auto& [id, node] : tree.nodes) {
        std::sort(node.children.begin(), node.children.end());
    }

    std::vector<PatternId> stack{tree.root};
    while (!stack.empty()) {
        const PatternId id = stack.back();
        stack.pop_back();
        tree.visit_order.push_back(id);
        TreeNode& node = tree.nodes.at(id);
        for (auto it = node.children.rbegin(); it != node.children.rend(); ++it) {
            tree.nodes.at(*it).depth = node.depth + 1;
            stack.push_back(*it);
        }
    }
    return tree;
}

std::vector<std::vector<PatternId>> cluster_patterns(const std::vector<MissingPattern>& patterns,
                                                     std::size_t max_graph) {
    if (max_graph == 0) {
        throw InvalidConfig("max_graph must be positive");
    }
    const std::size_t p = patterns.size();
    if (p <= max_graph) {
        std::vector<PatternId> all(p);
        for (std::size_t k = 0; k < p; ++k) {
            all[k] = k;
        }
        return {all};
    }
    const std::size_t groups = (p + max_graph - 1) / max_graph;

    // Farthest-point seeding from pattern 0.
    std::vector<PatternId> medoids{0};
    std::vector<std::size_t> nearest(p, std::numeric_limits<std::size_t>::max());
    while (medoids.size() < groups) {
        const Mask& last = patterns[medoids.back()].mask;
        PatternId best = 0;
        std::size_t best_dist = 0;
        for (PatternId k = 0; k < p; ++k) {
            nearest[k] = std::min(nearest[k], hamming(last, patterns[k].mask));
            if (nearest[k] > best_dist) {
                best = k;
                best_dist = nearest[k];
            }
        }
        if (best_dist == 0) {
            break;  // cannot happen for distinct patterns, but never loop forever
        }
        medoids.push_back(best);
    }

    std::vector<std::size_t> assignment(p);
    constexpr int kMaxRounds = 10;
    for (int round = 0; round < kMaxRounds; ++round) {
        std::vector<std::tuple<std::size_t, PatternId, std::size_t>> candidates;
        candidates.reserve(p * medoids.size());
        for (PatternId k = 0; k < p; ++k) {
            for (std::size_t g = 0; g < medoids.size(); ++g) {
                candidates.emplace_back(hamming(patterns[k].mask, patterns[medoids[g]].mask), k, g);
            }
        }
        std::sort(candidates.begin(), candidates.end());
        std::vector<std::size_t> size(medoids.size(), 0);
        std::vector<char> placed(p, 0);
        for (const auto& [dist, k, g] : candidates) {
            if (!placed[k] && size[g] < max_graph) {
                placed[k] = 1;
                assignment[k] = g;
                ++size[g];
            }
        }

        bool changed = false;
        for (std::size_t g = 0; g < medoids.size(); ++g) {
            std::vector<PatternId> group;
            for (PatternId k = 0; k < p; ++k) {
                if (assignment[k] == g) {
                    group.push_back(k);
                }
            }
            std::size_t best_cost = std::numeric_limits<std::size_t>::max();
            PatternId best = medoids[g];
            for (PatternId a : group) {
                std::size_t cost = 0;
                for (PatternId b : group) {
                    cost += hamming(patterns[a].mask, patterns[b].mask);
                }
                if (cost < best_cost) {
                    best_cost = cost;
                    best = a;
                }
            }
            if (best != medoids[g]) {
                medoids[g] = best;
                changed = true;
            }
        }
        if (!changed) {
            break;
        }
    }

    std::vector<std::vector<PatternId>> out(medoids.size());
    for (PatternId k = 0; k < p; ++k) {
        out[assignment[k]].push_back(k);
    }
    std::erase_if(out, [](const auto& g) { return g.empty(); });
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return out;
}

std::size_t PatternSchedule::total_weight() const {
    std::size_t total = 0;
    for (const PatternTree& t : trees) {
        total += t.total_weight();
    }
    return total;
}

PatternSchedule schedule(std::vector<PatternTree> trees, std::vector<MissingPattern> patterns) {
    PatternSchedule out;
    for (std::size_t t = 0; t < trees.size(); ++t) {
        const PatternTree& tree = trees[t];
        for (PatternId id : tree.visit_order) {
            const TreeNode& node = tree.node(id);
            ScheduleBlock block;
            block.pattern = id;
            block.tree = t;
            block.parent = node.parent;
            block.n_d = node.n_d;
            block.depth = node.depth;
            block.from_scratch = tree.recompute_at(id);
            block.offset = out.sample_order.size();
            block.count = patterns.at(id).sample_ids.size();
            out.sample_order.insert(out.sample_order.end(), patterns[id].sample_ids.begin(),
                                    patterns[id].sample_ids.end());
            out.blocks.push_back(block);
        }
    }
    out.trees = std::move(trees);
    out.patterns = std::move(patterns);
    return out;
}

PatternSchedule plan_patterns(const Dataset& ds, const PlanOptions& opts) {
    if (ds.n() == 0) {
        throw InvalidConfig("cannot plan patterns for an empty dataset");
    }
    std::vector<MissingPattern> patterns = extract_patterns(ds);
    std::vector<PatternTree> trees;
    for (const auto& group : cluster_patterns(patterns, opts.max_patterns_per_tree)) {
        trees.push_back(build_mst(patterns, group, opts.recompute_every));
    }
    return schedule(std::move(trees), std::move(patterns));
}

nlohmann::json schedule_to_json(const PatternSchedule& s) {
    using nlohmann::json;
    json patterns = json::array();
    for (std::size_t k = 0; k < s.patterns.size(); ++k) {
        const MissingPattern& p = s.patterns[k];
        patterns.push_back({{"id", k},
                            {"mask", p.mask.to_hex()},
                            {"n_missing", p.n_missing()},
                            {"samples", p.sample_ids.size()}});
    }
    json trees = json::array();
    for (const PatternTree& t : s.trees) {
        json edges = json::array();
        for (const PatternEdge& e : t.edges()) {
            edges.push_back({{"parent", e.a}, {"child", e.b}, {"n_d", e.n_d}});
        }
        trees.push_back({{"root", t.root}, {"total_weight", t.total_weight()}, {"edges", edges}});
    }
    json visit = json::array();
    for (const ScheduleBlock& b : s.blocks) {
        visit.push_back({{"pattern", b.pattern},
                         {"tree", b.tree},
                         {"parent", b.parent ? json(*b.parent) : json(nullptr)},
                         {"n_d", b.n_d},
                         {"depth", b.depth},
                         {"from_scratch", b.from_scratch},
                         {"samples", b.count}});
    }
    return {{"d", s.patterns.empty() ? 0 : s.patterns.front().mask.size()},
            {"n_patterns", s.patterns.size()},
            {"total_weight", s.total_weight()},
            {"patterns", patterns},
            {"trees", trees},
            {"visit_order", visit}};
}

}  // namespace gmmtree

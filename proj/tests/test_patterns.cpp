#include "doctest.h"
#include "support.hpp"

#include "gmmtree/patterns.hpp"

#include <set>

using namespace gmmtree;

namespace {

Mask mask_of(std::size_t d, std::initializer_list<std::size_t> bits) {
    Mask m(d);
    for (std::size_t b : bits) {
        m.set(b);
    }
    return m;
}

std::vector<MissingPattern> patterns_of(const std::vector<Mask>& masks) {
    std::vector<MissingPattern> out;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        out.push_back({masks[i], {i}});
    }
    return out;
}

void check_tree_shape(const PatternTree& t, std::size_t p) {
    REQUIRE(t.visit_order.size() == p);
    REQUIRE(t.nodes.size() == p);
    CHECK(t.visit_order.front() == t.root);
    CHECK(t.node(t.root).depth == 0);
    CHECK(!t.node(t.root).parent);
    std::set<PatternId> seen;
    for (PatternId id : t.visit_order) {
        const TreeNode& n = t.node(id);
        if (n.parent) {
            CHECK(seen.count(*n.parent) == 1);
            CHECK(n.depth == t.node(*n.parent).depth + 1);
        }
        seen.insert(id);
    }
    CHECK(t.edges().size() == p - 1);
}

}  // namespace

TEST_CASE("extract_patterns groups rows by mask in first-occurrence order") {
    std::mt19937_64 rng(1);
    const std::vector<Mask> masks{mask_of(4, {}), mask_of(4, {2}), mask_of(4, {2}), mask_of(4, {1, 3})};
    const Dataset ds = testing::dataset_with_masks(masks, rng);
    const auto ps = extract_patterns(ds);
    REQUIRE(ps.size() == 3);
    CHECK(ps[0].sample_ids == std::vector<std::size_t>{0});
    CHECK(ps[1].sample_ids == std::vector<std::size_t>{1, 2});
    CHECK(ps[2].sample_ids == std::vector<std::size_t>{3});
    CHECK(ps[2].n_missing() == 2);
    CHECK(ps[2].n_observed() == 2);

    const auto single = extract_patterns(Dataset(5, 3));
    REQUIRE(single.size() == 1);
    CHECK(single[0].n_missing() == 0);
    CHECK(single[0].sample_ids.size() == 5);

    std::vector<Mask> distinct;
    for (std::size_t i = 0; i < 6; ++i) {
        distinct.push_back(mask_of(6, {i}));
    }
    CHECK(extract_patterns(testing::dataset_with_masks(distinct, rng)).size() == 6);
}

TEST_CASE("pattern invariants on random data") {
    std::mt19937_64 rng(2);
    std::vector<Mask> masks;
    for (int i = 0; i < 200; ++i) {
        masks.push_back(testing::random_mask(7, 0.3, rng));
    }
    const Dataset ds = testing::dataset_with_masks(masks, rng);
    const auto ps = extract_patterns(ds);
    std::vector<int> covered(ds.n(), 0);
    for (std::size_t a = 0; a < ps.size(); ++a) {
        CHECK(!ps[a].sample_ids.empty());
        for (std::size_t i : ps[a].sample_ids) {
            CHECK(ds.row_mask(i) == ps[a].mask);
            ++covered[i];
        }
        for (std::size_t b = a + 1; b < ps.size(); ++b) {
            CHECK(!(ps[a].mask == ps[b].mask));
        }
    }
    for (int c : covered) {
        CHECK(c == 1);
    }
}

TEST_CASE("build_mst small examples") {
    const auto three = patterns_of({mask_of(3, {}), mask_of(3, {1}), mask_of(3, {1, 2})});
    const PatternTree t = build_mst(three);
    check_tree_shape(t, 3);
    CHECK(t.root == 0);
    CHECK(t.total_weight() == 2);
    CHECK(*t.node(1).parent == 0);
    CHECK(*t.node(2).parent == 1);
    CHECK(t.node(2).n_d == 1);

    const PatternTree one = build_mst(patterns_of({mask_of(3, {0})}));
    check_tree_shape(one, 1);
    CHECK(one.total_weight() == 0);

    const auto four = patterns_of({mask_of(2, {}), mask_of(2, {0}), mask_of(2, {1}), mask_of(2, {0, 1})});
    CHECK(build_mst(four).total_weight() == 3);
}

TEST_CASE("root is the pattern with the fewest missing variables") {
    const auto ps = patterns_of({mask_of(4, {0, 1}), mask_of(4, {3}), mask_of(4, {2}), mask_of(4, {0, 1, 2})});
    CHECK(build_mst(ps).root == 1);
}

TEST_CASE("build_mst matches brute force on small pattern sets") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t p = 2 + trial % 6;
        std::vector<Mask> masks;
        while (masks.size() < p) {
            const Mask m = testing::random_mask(9, 0.4, rng);
            if (std::find(masks.begin(), masks.end(), m) == masks.end()) {
                masks.push_back(m);
            }
        }
        const PatternTree t = build_mst(patterns_of(masks));
        check_tree_shape(t, p);
        CHECK(t.total_weight() == testing::brute_force_mst_weight(masks));
        for (const PatternEdge& e : t.edges()) {
            CHECK(e.n_d == hamming(masks[e.a], masks[e.b]));
            CHECK(e.n_d >= 1);
        }
        // Never worse than chaining patterns in first-occurrence order.
        std::size_t chain = 0;
        for (std::size_t k = 1; k < p; ++k) {
            chain += hamming(masks[k - 1], masks[k]);
        }
        CHECK(t.total_weight() <= chain);
    }
}

TEST_CASE("recompute points follow depth") {
    std::vector<Mask> masks;
    for (std::size_t k = 0; k <= 6; ++k) {
        Mask m(8);
        for (std::size_t b = 0; b < k; ++b) {
            m.set(b);
        }
        masks.push_back(m);
    }
    const auto ps = patterns_of(masks);
    const PatternTree t = build_mst(ps, {}, 3);
    for (PatternId id : t.visit_order) {
        CHECK(t.recompute_at(id) == (t.node(id).depth % 3 == 0));
    }
    const PatternTree roots_only = build_mst(ps, {}, std::nullopt);
    for (PatternId id : roots_only.visit_order) {
        CHECK(roots_only.recompute_at(id) == (id == roots_only.root));
    }
}

TEST_CASE("schedule concatenates pattern blocks in visit order") {
    Dataset ds(4, 2);
    ds.set_missing(1, 1);
    ds.set_missing(2, 1);
    auto ps = extract_patterns(ds);
    REQUIRE(ps.size() == 2);
    CHECK(ps[0].sample_ids == std::vector<std::size_t>{0, 3});
    const PatternSchedule s = schedule({build_mst(ps)}, ps);
    CHECK(s.sample_order == std::vector<std::size_t>{0, 3, 1, 2});
    REQUIRE(s.blocks.size() == 2);
    CHECK(s.blocks[1].n_d == 1);
    CHECK(s.blocks[1].offset == 2);

    const Dataset complete(5, 3);
    const PatternSchedule trivial = plan_patterns(complete);
    CHECK(trivial.sample_order == std::vector<std::size_t>{0, 1, 2, 3, 4});
}

TEST_CASE("schedule covers every sample once and matches tree weights") {
    std::mt19937_64 rng(3);
    std::vector<Mask> masks;
    for (int i = 0; i < 400; ++i) {
        masks.push_back(testing::random_mask(10, 0.25, rng));
    }
    const Dataset ds = testing::dataset_with_masks(masks, rng);
    const PatternSchedule s = plan_patterns(ds);
    std::vector<int> seen(ds.n(), 0);
    for (std::size_t i : s.sample_order) {
        ++seen[i];
    }
    for (int c : seen) {
        CHECK(c == 1);
    }
    std::size_t weight = 0;
    for (const ScheduleBlock& b : s.blocks) {
        for (std::size_t k = b.offset; k < b.offset + b.count; ++k) {
            CHECK(ds.row_mask(s.sample_order[k]) == s.patterns[b.pattern].mask);
        }
        if (b.parent) {
            CHECK(hamming(s.patterns[b.pattern].mask, s.patterns[*b.parent].mask) == b.n_d);
        }
        weight += b.n_d;
    }
    CHECK(weight == s.total_weight());
    std::size_t tree_weight = 0;
    for (const PatternTree& t : s.trees) {
        tree_weight += t.total_weight();
    }
    CHECK(weight == tree_weight);

    const PatternSchedule again = plan_patterns(ds);
    CHECK(again.sample_order == s.sample_order);
}

TEST_CASE("cluster_patterns partitions under the size bound") {
    std::mt19937_64 rng(5);
    std::vector<Mask> masks;
    while (masks.size() < 250) {
        const Mask m = testing::random_mask(16, 0.5, rng);
        if (std::find(masks.begin(), masks.end(), m) == masks.end()) {
            masks.push_back(m);
        }
    }
    const auto ps = patterns_of(masks);

    const std::vector<MissingPattern> ten(ps.begin(), ps.begin() + 10);
    const auto small = cluster_patterns(ten, 100);
    REQUIRE(small.size() == 1);
    CHECK(small[0].size() == 10);

    const auto groups = cluster_patterns(ps, 100);
    CHECK(groups.size() >= 3);
    std::vector<int> seen(ps.size(), 0);
    for (const auto& g : groups) {
        CHECK(g.size() <= 100);
        CHECK(!g.empty());
        for (PatternId id : g) {
            ++seen[id];
        }
    }
    for (int c : seen) {
        CHECK(c == 1);
    }

    // Each group gets its own tree, rooted from scratch.
    const Dataset ds = testing::dataset_with_masks(masks, rng);
    PlanOptions opts;
    opts.max_patterns_per_tree = 100;
    const PatternSchedule s = plan_patterns(ds, opts);
    CHECK(s.trees.size() == groups.size());
    std::size_t roots = 0;
    for (const ScheduleBlock& b : s.blocks) {
        if (!b.parent) {
            ++roots;
            CHECK(b.from_scratch);
        }
    }
    CHECK(roots == s.trees.size());
}

TEST_CASE("schedule dump lists masks and parents") {
    Dataset ds(3, 5);
    ds.set_missing(1, 4);
    ds.set_missing(2, 0);
    const auto j = schedule_to_json(plan_patterns(ds));
    CHECK(j.dump().find(Mask::from_hex("10", 5).to_hex()) != std::string::npos);
}

TEST_CASE("mask hex round trip and hamming") {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t d = 1 + trial * 7;
        const Mask a = testing::random_mask(d, 0.5, rng);
        const Mask b = testing::random_mask(d, 0.5, rng);
        CHECK(Mask::from_hex(a.to_hex(), d) == a);
        std::size_t diff = 0;
        for (std::size_t k = 0; k < d; ++k) {
            diff += a.test(k) != b.test(k);
        }
        CHECK(hamming(a, b) == diff);
        CHECK(a.set_indices().size() + a.clear_indices().size() == d);
    }
}

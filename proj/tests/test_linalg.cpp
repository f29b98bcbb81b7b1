#include "doctest.h"
#include "support.hpp"

#include "gmmtree/errors.hpp"
#include "gmmtree/linalg.hpp"

#include <cmath>
#include <numeric>

using namespace gmmtree;
using testing::direct_inverse;
using testing::random_spd;
using testing::rel_err;
using testing::sub;

namespace {

SymMatrix m2(double a, double b, double c) {
    SymMatrix m(2, 2);
    m << a, b, b, c;
    return m;
}

IndexList iota_list(int n) {
    IndexList out(n);
    std::iota(out.begin(), out.end(), 0);
    return out;
}

}  // namespace

TEST_CASE("cholesky of small matrices") {
    const CholFactor f = cholesky(m2(4, 2, 5));
    Matrix expected(2, 2);
    expected << 2, 0, 1, 2;
    CHECK((f.lower() - expected).norm() < 1e-15);
    CHECK((f.reconstruct() - m2(4, 2, 5)).norm() < 1e-14);

    SymMatrix one(1, 1);
    one << 1;
    CHECK(cholesky(one).lower()(0, 0) == 1.0);

    CHECK_THROWS_AS(cholesky(m2(2, 3, 1)), NotPositiveDefinite);
}

TEST_CASE("solve_lower") {
    const CholFactor f = cholesky(m2(4, 2, 5));
    Vector z2(2);
    z2 << 2, 3;
    const Vector w = solve_lower(f, z2);
    CHECK(std::abs(w[0] - 1.0) < 1e-15);
    CHECK(std::abs(w[1] - 1.0) < 1e-15);
    CHECK(std::abs(w.squaredNorm() - 2.0) < 1e-14);

    SymMatrix one(1, 1);
    one << 1;
    CHECK(solve_lower(cholesky(one), Vector::Zero(1))[0] == 0.0);

    const Vector z = Vector::LinSpaced(3, 1, 3);
    CHECK((solve_lower(cholesky(SymMatrix::Identity(3, 3)), z) - z).norm() == 0.0);

    CHECK_THROWS_AS(solve_lower(f, Vector::Ones(3)), DimensionMismatch);
}

TEST_CASE("solve_lower quadratic form matches direct inversion") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const int d = 2 + trial;
        const SymMatrix s = random_spd(d, rng);
        IndexList obs;
        for (int i = 0; i < d; i += 2) {
            obs.push_back(i);
        }
        const Vector z = testing::random_matrix(static_cast<int>(obs.size()), 1, rng);
        const CholFactor f = cholesky(s, obs);
        const double via_factor = solve_lower(f, z).squaredNorm();
        const double direct = z.dot(direct_inverse(sub(s, obs, obs)) * z);
        CHECK(std::abs(via_factor - direct) < 1e-9 * std::max(1.0, std::abs(direct)));
    }
}

TEST_CASE("chol_insert examples") {
    SymMatrix four(1, 1);
    four << 4;
    const CholFactor f = chol_insert(cholesky(four), m2(4, 2, 5), 1);
    Matrix expected(2, 2);
    expected << 2, 0, 1, 2;
    CHECK((f.lower() - expected).norm() < 1e-15);
    CHECK(f.perm() == IndexList{0, 1});

    SymMatrix nine(1, 1);
    nine << 9;
    const CholFactor g = chol_insert(CholFactor(1), nine, 0);
    CHECK(g.dim() == 1);
    CHECK(g.lower()(0, 0) == 3.0);

    CHECK_THROWS_AS(chol_insert(f, m2(4, 2, 5), 0), IndexAlreadyPresent);
    CHECK_THROWS_AS(chol_insert(cholesky(four), m2(4, 2, 1), 1), NotPositiveDefinite);
}

TEST_CASE("chol_delete examples") {
    const CholFactor f = chol_delete(cholesky(m2(4, 2, 5)), 0);
    CHECK(f.dim() == 1);
    CHECK(f.perm() == IndexList{1});
    CHECK(std::abs(f.lower()(0, 0) - std::sqrt(5.0)) < 1e-15);

    std::mt19937_64 rng(5);
    const SymMatrix s = random_spd(6, rng);
    const CholFactor full = cholesky(s);
    const CholFactor truncated = chol_delete(full, 5);
    CHECK((truncated.lower() - full.lower().topLeftCorner(5, 5)).norm() == 0.0);

    CHECK_THROWS_AS(chol_delete(full, 9), IndexNotPresent);
}

TEST_CASE("randomized insert and delete reconstruct the source") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 40; ++trial) {
        const int d = 10;
        const SymMatrix s = random_spd(d, rng);
        std::vector<int> order = iota_list(d);
        std::shuffle(order.begin(), order.end(), rng);
        IndexList start(order.begin(), order.begin() + 5);
        CholFactor f = cholesky(s, start);
        for (int k = 5; k < d; ++k) {
            f = chol_insert(std::move(f), s, order[k]);
            CHECK(rel_err(f.reconstruct(), sub(s, f.perm(), f.perm())) < 1e-10);
        }
        for (int k = 0; k < 6; ++k) {
            const int drop = f.perm()[std::uniform_int_distribution<int>(0, f.dim() - 1)(rng)];
            f = chol_delete(std::move(f), drop);
            CHECK(!f.contains(drop));
            CHECK(rel_err(f.reconstruct(), sub(s, f.perm(), f.perm())) < 1e-10);
        }
        const CholFactor scratch = cholesky(s, f.perm());
        CHECK(rel_err(f.lower(), scratch.lower()) < 1e-10);
    }
}

TEST_CASE("log determinant") {
    std::mt19937_64 rng(2);
    for (int d : {1, 3, 12, 40}) {
        const SymMatrix s = random_spd(d, rng);
        const CholFactor f = cholesky(s);
        double expected = 0.0;
        for (int k = 0; k < d; ++k) {
            expected += 2.0 * std::log(f.lower()(k, k));
        }
        CHECK(std::abs(f.log_det() - expected) < 1e-10);
        const double lu = std::log(Eigen::FullPivLU<Matrix>(s).determinant());
        CHECK(std::abs(f.log_det() - lu) < 1e-9 * std::max(1.0, std::abs(lu)));
    }
}

TEST_CASE("ivl_extend examples") {
    SymMatrix xx_inv(1, 1);
    xx_inv << 1;
    Matrix yx(1, 1);
    yx << 0.5;
    SymMatrix yy(1, 1);
    yy << 1;
    const SymMatrix inv = ivl_extend(xx_inv, yx, yy);
    Matrix expected(2, 2);
    expected << 4.0 / 3, -2.0 / 3, -2.0 / 3, 4.0 / 3;
    CHECK((inv - expected).norm() < 1e-14);

    // Block diagonal: B = 0.
    std::mt19937_64 rng(8);
    const SymMatrix a = random_spd(3, rng);
    const SymMatrix b = random_spd(2, rng);
    const SymMatrix block = ivl_extend(direct_inverse(a), Matrix::Zero(2, 3), b);
    CHECK(rel_err(block.topLeftCorner(3, 3), direct_inverse(a)) < 1e-12);
    CHECK(rel_err(block.bottomRightCorner(2, 2), direct_inverse(b)) < 1e-12);
    CHECK(block.topRightCorner(3, 2).norm() < 1e-14);

    SymMatrix bad_yy(1, 1);
    bad_yy << 0.25;
    CHECK_THROWS_AS(ivl_extend(xx_inv, yx, bad_yy), NotPositiveDefinite);
}

TEST_CASE("ivl_extend matches direct inversion") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        const int d = trial < 15 ? 8 : 2 + trial;
        const int ny = trial < 15 ? 2 : 1 + trial % 4;
        const SymMatrix lambda = random_spd(d, rng);
        const IndexList x = iota_list(d - ny);
        IndexList y;
        for (int k = d - ny; k < d; ++k) {
            y.push_back(k);
        }
        const SymMatrix inv =
            ivl_extend(direct_inverse(sub(lambda, x, x)), sub(lambda, y, x), sub(lambda, y, y));
        CHECK(rel_err(inv, direct_inverse(lambda)) < 1e-9);
        CHECK((inv * lambda - Matrix::Identity(d, d)).norm() < 1e-9);
    }
}

TEST_CASE("ivl_extend times the matrix is the identity up to dimension 50") {
    std::mt19937_64 rng(4);
    for (int d : {2, 10, 25, 50}) {
        const SymMatrix lambda = random_spd(d, rng);
        const IndexList x = iota_list(d - 1 - d / 5);
        const IndexList y = complement(x, d);
        const SymMatrix inv =
            ivl_extend(direct_inverse(sub(lambda, x, x)), sub(lambda, y, x), sub(lambda, y, y));
        CHECK((inv * lambda - Matrix::Identity(d, d)).norm() < 1e-9);
    }
}

TEST_CASE("ivl_shrink examples and round trip") {
    Matrix inv(2, 2);
    inv << 4.0 / 3, -2.0 / 3, -2.0 / 3, 4.0 / 3;
    const SymMatrix xx_inv = ivl_shrink(inv, {{0}, {1}});
    CHECK(std::abs(xx_inv(0, 0) - 1.0) < 1e-14);

    const SymMatrix diag = Vector::LinSpaced(4, 1, 4).asDiagonal();
    CHECK((ivl_shrink(diag, {{0, 2}, {1, 3}}) - sub(diag, {0, 2}, {0, 2})).norm() < 1e-15);

    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        const int d = 3 + trial % 12;
        const int ny = 1 + trial % 3;
        const SymMatrix lambda = random_spd(d, rng);
        const IndexList x = iota_list(d - ny);
        const IndexList y = complement(x, d);
        const SymMatrix a = direct_inverse(sub(lambda, x, x));
        const SymMatrix extended = ivl_extend(a, sub(lambda, y, x), sub(lambda, y, y));
        CHECK(rel_err(ivl_shrink(extended, {x, y}), a) < 1e-10);

        // Unsorted, interleaved partitions against direct inversion.
        std::vector<int> order = iota_list(d);
        std::shuffle(order.begin(), order.end(), rng);
        const IndexList keep(order.begin(), order.begin() + (d - ny));
        const IndexList drop(order.begin() + (d - ny), order.end());
        const SymMatrix shrunk = ivl_shrink(direct_inverse(lambda), {keep, drop});
        CHECK(rel_err(shrunk, direct_inverse(sub(lambda, keep, keep))) < 1e-9);
    }
}

TEST_CASE("block partitions are validated") {
    CHECK_NOTHROW(BlockPartition{{0, 2}, {1}}.validate(3));
    CHECK_THROWS(BlockPartition{{0, 1}, {1}}.validate(3));
    CHECK_THROWS(BlockPartition{{0}, {1}}.validate(3));
}

TEST_CASE("conditional covariance") {
    const SymMatrix s = m2(1, 0.5, 1);
    CHECK(std::abs(conditional_covariance(s, {1})(0, 0) - 0.75) < 1e-15);
    CHECK((conditional_covariance(s, {0, 1}) - s).norm() == 0.0);

    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        const int d = 3 + trial;
        const SymMatrix sigma = random_spd(d, rng);
        IndexList missing;
        std::bernoulli_distribution pick(0.4);
        for (int k = 0; k < d; ++k) {
            if (pick(rng)) {
                missing.push_back(k);
            }
        }
        if (missing.empty()) {
            missing.push_back(0);
        }
        const SymMatrix oracle = direct_inverse(sub(direct_inverse(sigma), missing, missing));
        CHECK(rel_err(conditional_covariance(sigma, missing), oracle) < 1e-10);
        const CholFactor observed = cholesky(sigma, complement(missing, d));
        CHECK(rel_err(conditional_covariance(sigma, observed, missing), oracle) < 1e-10);
    }
}

TEST_CASE("factor copies are independent") {
    std::mt19937_64 rng(1);
    const SymMatrix s = random_spd(5, rng);
    CholFactor a = cholesky(s, {0, 1, 2});
    CholFactor b = a;
    b = chol_insert(std::move(b), s, 4);
    CHECK(a.dim() == 3);
    CHECK(b.dim() == 4);
    CHECK(rel_err(a.reconstruct(), sub(s, {0, 1, 2}, {0, 1, 2})) < 1e-14);
    CholFactor c;
    c = b;
    CHECK(rel_err(c.reconstruct(), sub(s, c.perm(), c.perm())) < 1e-12);
}

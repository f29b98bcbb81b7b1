#pragma once

#include "gmmtree/bitmask.hpp"
#include "gmmtree/data.hpp"
#include "gmmtree/linalg.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace testing {

using gmmtree::Matrix;
using gmmtree::SymMatrix;
using gmmtree::Vector;

inline Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (int c = 0; c < cols; ++c) {
        for (int r = 0; r < rows; ++r) {
            m(r, c) = normal(rng);
        }
    }
    return m;
}

/// A·Aᵀ/d + shift·I, well conditioned for moderate shift.
inline SymMatrix random_spd(int d, std::mt19937_64& rng, double shift = 0.5) {
    const Matrix a = random_matrix(d, d, rng);
    SymMatrix s = a * a.transpose() / d;
    s.diagonal().array() += shift;
    return 0.5 * (s + s.transpose());
}

/// Inverse by LU with full pivoting; independent of the Cholesky code.
inline Matrix direct_inverse(const Matrix& m) { return Eigen::FullPivLU<Matrix>(m).inverse(); }

inline Matrix sub(const Matrix& m, const std::vector<int>& rows, const std::vector<int>& cols) {
    Matrix out(rows.size(), cols.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            out(r, c) = m(rows[r], cols[c]);
        }
    }
    return out;
}

inline double rel_err(const Matrix& a, const Matrix& b) {
    return (a - b).norm() / std::max(b.norm(), 1e-300);
}

/// Minimum total Hamming weight over every labeled spanning tree on the
/// masks, enumerated through Prüfer sequences.
inline std::size_t brute_force_mst_weight(const std::vector<gmmtree::Mask>& masks) {
    const std::size_t p = masks.size();
    if (p <= 1) {
        return 0;
    }
    if (p == 2) {
        return hamming(masks[0], masks[1]);
    }
    std::vector<std::size_t> seq(p - 2, 0);
    std::size_t best = std::numeric_limits<std::size_t>::max();
    while (true) {
        std::vector<std::size_t> degree(p, 1);
        for (std::size_t v : seq) {
            ++degree[v];
        }
        std::size_t total = 0;
        for (std::size_t v : seq) {
            std::size_t leaf = 0;
            while (degree[leaf] != 1) {
                ++leaf;
            }
            total += hamming(masks[leaf], masks[v]);
            --degree[leaf];
            --degree[v];
        }
        std::size_t u = p;
        std::size_t w = p;
        for (std::size_t v = 0; v < p; ++v) {
            if (degree[v] == 1) {
                (u == p ? u : w) = v;
            }
        }
        total += hamming(masks[u], masks[w]);
        best = std::min(best, total);

        std::size_t k = 0;
        while (k < seq.size() && ++seq[k] == p) {
            seq[k++] = 0;
        }
        if (k == seq.size()) {
            break;
        }
    }
    return best;
}

inline gmmtree::Mask random_mask(std::size_t d, double fraction, std::mt19937_64& rng) {
    std::bernoulli_distribution flip(fraction);
    gmmtree::Mask m(d);
    for (std::size_t b = 0; b < d; ++b) {
        m.set(b, flip(rng));
    }
    return m;
}

/// Dataset whose rows carry the given masks; values are random normals.
inline gmmtree::Dataset dataset_with_masks(const std::vector<gmmtree::Mask>& masks, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t d = masks.empty() ? 0 : masks.front().size();
    gmmtree::Dataset ds(masks.size(), d);
    for (std::size_t i = 0; i < masks.size(); ++i) {
        for (std::size_t c = 0; c < d; ++c) {
            if (masks[i].test(c)) {
                ds.set_missing(i, c);
            } else {
                ds.set(i, c, normal(rng));
            }
        }
    }
    return ds;
}

}  // namespace testing

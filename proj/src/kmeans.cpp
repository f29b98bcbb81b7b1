#include "gmmtree/errors.hpp"
#include "gmmtree/gmm.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace gmmtree {

namespace {

// Squared distance over the sample's observed coordinates.
double observed_distance(const Dataset& ds, std::size_t row, const Vector& centroid) {
    double acc = 0.0;
    for (std::size_t c = 0; c < ds.d(); ++c) {
        if (!ds.missing(row, c)) {
            const double diff = ds.value(row, c) - centroid[static_cast<Eigen::Index>(c)];
            acc += diff * diff;
        }
    }
    return acc;
}

// Samples with missing cells zeroed, plus the observed-cell indicator.
struct DenseView {
    Eigen::ArrayXXd x;
    Eigen::ArrayXXd seen;
    Vector sq_norm;
};

DenseView dense_view(const Dataset& ds) {
    const auto n = static_cast<Eigen::Index>(ds.n());
    const auto d = static_cast<Eigen::Index>(ds.d());
    DenseView v{Eigen::ArrayXXd::Zero(n, d), Eigen::ArrayXXd::Zero(n, d), Vector()};
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t c = 0; c < ds.d(); ++c) {
            if (!ds.missing(i, c)) {
                v.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = ds.value(i, c);
                v.seen(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = 1.0;
            }
        }
    }
    v.sq_norm = v.x.square().rowwise().sum().matrix();
    return v;
}

// observed_distance for every sample against every centroid, expanded as
// Σ o·x² − 2 Σ o·x·μ + Σ o·μ² so the work is two matrix products.
Matrix observed_distances(const DenseView& v, const std::vector<Vector>& centroids) {
    const auto k = static_cast<Eigen::Index>(centroids.size());
    Matrix mu(v.x.cols(), k);
    for (Eigen::Index j = 0; j < k; ++j) {
        mu.col(j) = centroids[static_cast<std::size_t>(j)];
    }
    Matrix out = -2.0 * (v.x.matrix() * mu);
    out.noalias() += v.seen.matrix() * mu.array().square().matrix();
    out.colwise() += v.sq_norm;
    return out.cwiseMax(0.0);
}

struct ColumnStats {
    Vector mean;
    Vector var;
    std::vector<char> observed;
};

ColumnStats column_stats(const Dataset& ds, double ridge) {
    const auto d = static_cast<Eigen::Index>(ds.d());
    ColumnStats s{Vector::Zero(d), Vector::Zero(d), std::vector<char>(ds.d(), 0)};
    for (std::size_t c = 0; c < ds.d(); ++c) {
        double sum = 0.0;
        double sq = 0.0;
        std::size_t count = 0;
        for (std::size_t i = 0; i < ds.n(); ++i) {
            if (!ds.missing(i, c)) {
                sum += ds.value(i, c);
                ++count;
            }
        }
        if (count == 0) {
            s.var[static_cast<Eigen::Index>(c)] = ridge > 0.0 ? ridge : 1.0;
            continue;
        }
        const double mean = sum / static_cast<double>(count);
        for (std::size_t i = 0; i < ds.n(); ++i) {
            if (!ds.missing(i, c)) {
                sq += (ds.value(i, c) - mean) * (ds.value(i, c) - mean);
            }
        }
        s.mean[static_cast<Eigen::Index>(c)] = mean;
        s.var[static_cast<Eigen::Index>(c)] = sq / static_cast<double>(count);
        s.observed[c] = 1;
    }
    return s;
}

Vector seed_centroid(const Dataset& ds, std::size_t row, const ColumnStats& stats) {
    Vector out = stats.mean;
    for (std::size_t c = 0; c < ds.d(); ++c) {
        if (!ds.missing(row, c)) {
            out[static_cast<Eigen::Index>(c)] = ds.value(row, c);
        }
    }
    return out;
}

std::vector<Vector> plus_plus_seeds(const Dataset& ds, const DenseView& view, std::size_t L,
                                    const ColumnStats& stats, std::mt19937_64& rng) {
    std::vector<Vector> centroids;
    std::uniform_int_distribution<std::size_t> pick(0, ds.n() - 1);
    centroids.push_back(seed_centroid(ds, pick(rng), stats));
    std::vector<double> dist(ds.n(), std::numeric_limits<double>::infinity());
    while (centroids.size() < L) {
        double total = 0.0;
        const Vector latest = observed_distances(view, {centroids.back()});
        for (std::size_t i = 0; i < ds.n(); ++i) {
            dist[i] = std::min(dist[i], latest[static_cast<Eigen::Index>(i)]);
            total += dist[i];
        }
        std::size_t chosen = pick(rng);
        if (total > 0.0) {
            std::uniform_real_distribution<double> u(0.0, total);
            double target = u(rng);
            for (std::size_t i = 0; i < ds.n(); ++i) {
                target -= dist[i];
                if (target <= 0.0 && dist[i] > 0.0) {
                    chosen = i;
                    break;
                }
            }
        }
        centroids.push_back(seed_centroid(ds, chosen, stats));
    }
    return centroids;
}

// Covariance of a cluster around `mean`, each entry averaged over the rows
// where both coordinates are observed, then floored to positive definite.
SymMatrix pairwise_covariance(const Dataset& ds, const std::vector<std::size_t>& rows,
                              const Vector& mean, const ColumnStats& stats, double ridge) {
    const auto d = static_cast<Eigen::Index>(ds.d());
    const auto m = static_cast<Eigen::Index>(rows.size());
    Matrix centered = Matrix::Zero(m, d);
    Matrix seen = Matrix::Zero(m, d);
    for (Eigen::Index k = 0; k < m; ++k) {
        const std::size_t i = rows[static_cast<std::size_t>(k)];
        for (Eigen::Index c = 0; c < d; ++c) {
            if (!ds.missing(i, static_cast<std::size_t>(c))) {
                seen(k, c) = 1.0;
                centered(k, c) = ds.value(i, static_cast<std::size_t>(c)) - mean[c];
            }
        }
    }
    Matrix sum(d, d);
    sum.noalias() = centered.transpose() * centered;
    Matrix count(d, d);
    count.noalias() = seen.transpose() * seen;
    SymMatrix cov = Matrix::Zero(d, d);
    for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = 0; b < d; ++b) {
            if (count(a, b) > 0.0) {
                cov(a, b) = sum(a, b) / count(a, b);
            }
        }
        if (count(a, a) == 0.0) {
            // Nothing seen in this cluster: fall back to the column-wide spread.
            for (Eigen::Index b = 0; b < d; ++b) {
                cov(a, b) = cov(b, a) = 0.0;
            }
            cov(a, a) = stats.var[a];
        }
    }
    // Pairwise estimates need not be PSD, and tiny clusters are rank
    // deficient; floor the spectrum of the observed block relative to its
    // average variance. Columns never observed stay decoupled.
    IndexList known;
    for (Eigen::Index a = 0; a < d; ++a) {
        if (stats.observed[static_cast<std::size_t>(a)]) {
            known.push_back(static_cast<int>(a));
        }
    }
    SymMatrix block = gather(cov, known, known);
    if (!known.empty()) {
        const double avg_var = std::max(block.trace() / static_cast<double>(known.size()), 1e-12);
        const double floor_value = std::max(ridge, 1e-3 * avg_var);
        Eigen::SelfAdjointEigenSolver<SymMatrix> es(block);
        if (es.eigenvalues().minCoeff() < floor_value) {
            const Vector values = es.eigenvalues().cwiseMax(floor_value);
            block = es.eigenvectors() * values.asDiagonal() * es.eigenvectors().transpose();
            block = 0.5 * (block + block.transpose());
        } else {
            block = regularize(block, ridge, 1.0);
        }
    }
    SymMatrix out = SymMatrix::Zero(d, d);
    for (Eigen::Index a = 0; a < d; ++a) {
        out(a, a) = ridge > 0.0 ? ridge : 1.0;
    }
    for (std::size_t a = 0; a < known.size(); ++a) {
        for (std::size_t b = 0; b < known.size(); ++b) {
            out(known[a], known[b]) = block(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
        }
    }
    return out;
}

}  // namespace

MixtureModel kmeans_init(const Dataset& ds, const TrainConfig& config) {
    config.validate();
    const std::size_t L = config.components;
    if (ds.d() == 0) {
        throw InvalidConfig("dataset has no columns");
    }
    if (L > ds.n()) {
        throw InvalidConfig("more components (" + std::to_string(L) + ") than samples (" +
                            std::to_string(ds.n()) + ")");
    }
    std::mt19937_64 rng(config.seed);
    const ColumnStats stats = column_stats(ds, config.ridge);
    const DenseView view = dense_view(ds);
    std::vector<Vector> centroids = plus_plus_seeds(ds, view, L, stats, rng);
    std::uniform_int_distribution<std::size_t> pick(0, ds.n() - 1);

    std::vector<std::size_t> assign(ds.n(), L);
    for (std::size_t iter = 0; iter <= config.kmeans_iters; ++iter) {
        bool changed = false;
        const Matrix dists = observed_distances(view, centroids);
        for (std::size_t i = 0; i < ds.n(); ++i) {
            std::size_t best = 0;
            double best_dist = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < L; ++j) {
                const double dist = dists(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (dist < best_dist) {
                    best = j;
                    best_dist = dist;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
        }
        if (!changed || iter == config.kmeans_iters) {
            break;
        }

        // Per-cluster sums and observed counts as products with the
        // assignment indicator matrix.
        Matrix indicator = Matrix::Zero(static_cast<Eigen::Index>(ds.n()), static_cast<Eigen::Index>(L));
        std::vector<std::size_t> members(L, 0);
        for (std::size_t i = 0; i < ds.n(); ++i) {
            indicator(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(assign[i])) = 1.0;
            ++members[assign[i]];
        }
        const Matrix sums = indicator.transpose() * view.x.matrix();
        const Matrix counts = indicator.transpose() * view.seen.matrix();
        for (std::size_t j = 0; j < L; ++j) {
            if (members[j] == 0) {
                centroids[j] = seed_centroid(ds, pick(rng), stats);
                continue;
            }
            const auto jj = static_cast<Eigen::Index>(j);
            for (Eigen::Index c = 0; c < sums.cols(); ++c) {
                if (counts(jj, c) > 0.0) {
                    centroids[j][c] = sums(jj, c) / counts(jj, c);
                }
            }
        }
    }

    std::vector<std::vector<std::size_t>> rows(L);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        rows[assign[i]].push_back(i);
    }
    // A cluster can still be empty after the final assignment; give it the
    // sample farthest from its own centroid so every component starts with data.
    for (std::size_t j = 0; j < L; ++j) {
        if (!rows[j].empty()) {
            continue;
        }
        std::size_t far = 0;
        double far_dist = -1.0;
        for (std::size_t i = 0; i < ds.n(); ++i) {
            const std::size_t owner = assign[i];
            if (rows[owner].size() < 2) {
                continue;
            }
            const double dist = observed_distance(ds, i, centroids[owner]);
            if (dist > far_dist) {
                far = i;
                far_dist = dist;
            }
        }
        if (far_dist >= 0.0) {
            std::erase(rows[assign[far]], far);
            assign[far] = j;
            rows[j].push_back(far);
            centroids[j] = seed_centroid(ds, far, stats);
        }
    }

    MixtureModel model;
    model.d = ds.d();
    model.config = config;
    for (std::size_t j = 0; j < L; ++j) {
        GaussianComponent comp;
        comp.mean = centroids[j];
        for (std::size_t c = 0; c < ds.d(); ++c) {
            if (!stats.observed[c]) {
                comp.mean[static_cast<Eigen::Index>(c)] = 0.0;
            }
        }
        comp.cov = pairwise_covariance(ds, rows[j], comp.mean, stats, config.ridge);
        const double share = std::max<double>(static_cast<double>(rows[j].size()), 1.0);
        comp.log_weight = std::log(share / static_cast<double>(ds.n()));
        model.components.push_back(std::move(comp));
    }
    double total = 0.0;
    for (const auto& comp : model.components) {
        total += std::exp(comp.log_weight);
    }
    for (auto& comp : model.components) {
        comp.log_weight -= std::log(total);
    }
    model.refresh();
    return model;
}

}  // namespace gmmtree

#include "gmmtree/data.hpp"

#include "gmmtree/errors.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace gmmtree {

namespace {
constexpr double kMissingSlot = std::numeric_limits<double>::quiet_NaN();
}

Dataset::Dataset(std::size_t n, std::size_t d)
    : d_(d), values_(RowMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d))),
      masks_(n, Mask(d)) {}

Dataset Dataset::from_matrix(const Matrix& values) {
    Dataset ds(static_cast<std::size_t>(values.rows()), static_cast<std::size_t>(values.cols()));
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t c = 0; c < ds.d(); ++c) {
            const double v = values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
            if (std::isnan(v)) {
                ds.set_missing(i, c);
            } else {
                ds.set(i, c, v);
            }
        }
    }
    return ds;
}

void Dataset::set(std::size_t row, std::size_t col, double v) {
    values_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = v;
    masks_[row].set(col, false);
}

void Dataset::set_missing(std::size_t row, std::size_t col) {
    values_(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = kMissingSlot;
    masks_[row].set(col, true);
}

std::size_t Dataset::missing_count() const noexcept {
    std::size_t total = 0;
    for (const Mask& m : masks_) {
        total += m.count();
    }
    return total;
}

Dataset Dataset::rows(const std::vector<std::size_t>& ids) const {
    Dataset out(ids.size(), d_);
    out.column_names = column_names;
    for (std::size_t k = 0; k < ids.size(); ++k) {
        out.values_.row(static_cast<Eigen::Index>(k)) = values_.row(static_cast<Eigen::Index>(ids[k]));
        out.masks_[k] = masks_[ids[k]];
    }
    return out;
}

Dataset Dataset::columns(const std::vector<std::size_t>& ids) const {
    Dataset out(n(), ids.size());
    for (std::size_t c = 0; c < ids.size(); ++c) {
        if (ids[c] >= d_) {
            throw DimensionMismatch("column " + std::to_string(ids[c]) + " out of range");
        }
        if (!column_names.empty()) {
            out.column_names.push_back(column_names[ids[c]]);
        }
    }
    for (std::size_t i = 0; i < n(); ++i) {
        for (std::size_t c = 0; c < ids.size(); ++c) {
            if (missing(i, ids[c])) {
                out.set_missing(i, c);
            } else {
                out.set(i, c, value(i, ids[c]));
            }
        }
    }
    return out;
}

Dataset Normalizer::normalize(const Dataset& ds) const {
    if (static_cast<std::size_t>(mean.size()) != ds.d()) {
        throw DimensionMismatch("normalizer width differs from dataset");
    }
    Dataset out = ds;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t c = 0; c < ds.d(); ++c) {
            if (!ds.missing(i, c)) {
                const auto k = static_cast<Eigen::Index>(c);
                out.set(i, c, (ds.value(i, c) - mean[k]) / stddev[k]);
            }
        }
    }
    return out;
}

Dataset Normalizer::denormalize(const Dataset& ds) const {
    if (static_cast<std::size_t>(mean.size()) != ds.d()) {
        throw DimensionMismatch("normalizer width differs from dataset");
    }
    Dataset out = ds;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t c = 0; c < ds.d(); ++c) {
            if (!ds.missing(i, c)) {
                const auto k = static_cast<Eigen::Index>(c);
                out.set(i, c, ds.value(i, c) * stddev[k] + mean[k]);
            }
        }
    }
    return out;
}

Normalizer fit_normalizer(const Dataset& ds, const std::vector<std::size_t>& train_rows) {
    if (train_rows.empty()) {
        throw InvalidConfig("normalizer needs at least one training row");
    }
    const auto d = static_cast<Eigen::Index>(ds.d());
    Normalizer norm{Vector::Zero(d), Vector::Ones(d)};
    for (std::size_t c = 0; c < ds.d(); ++c) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i : train_rows) {
            if (!ds.missing(i, c)) {
                sum += ds.value(i, c);
                ++count;
            }
        }
        if (count == 0) {
            continue;
        }
        const double mu = sum / static_cast<double>(count);
        double ss = 0.0;
        for (std::size_t i : train_rows) {
            if (!ds.missing(i, c)) {
                const double dv = ds.value(i, c) - mu;
                ss += dv * dv;
            }
        }
        const double sd = std::sqrt(ss / static_cast<double>(count));
        const auto k = static_cast<Eigen::Index>(c);
        norm.mean[k] = mu;
        norm.stddev[k] = sd > 0.0 ? sd : 1.0;
    }
    return norm;
}

Dataset mask_mcar(const Dataset& ds, double fraction, std::uint64_t seed,
                  const std::optional<std::vector<std::size_t>>& columns) {
    if (!(fraction >= 0.0 && fraction < 1.0)) {
        throw InvalidConfig("missing fraction must lie in [0, 1)");
    }
    std::vector<char> eligible(ds.d(), columns ? 0 : 1);
    if (columns) {
        for (std::size_t c : *columns) {
            if (c >= ds.d()) {
                throw DimensionMismatch("masking column out of range");
            }
            eligible[c] = 1;
        }
    }
    Dataset out = ds;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        for (std::size_t c = 0; c < ds.d(); ++c) {
            // One draw per cell regardless of eligibility keeps masks aligned
            // across column subsets.
            const double u = unit(rng);
            if (eligible[c] && !ds.missing(i, c) && u < fraction) {
                out.set_missing(i, c);
            }
        }
    }
    return out;
}

Dataset mask_square(const Dataset& images, std::size_t h, std::size_t w, std::size_t s,
                    std::uint64_t seed) {
    if (images.d() != h * w) {
        throw ShapeMismatch("image width " + std::to_string(images.d()) + " is not " +
                            std::to_string(h) + "x" + std::to_string(w));
    }
    if (s == 0 || s > h || s > w) {
        throw ShapeMismatch("square side must be in 1..min(h, w)");
    }
    Dataset out = images;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> top(0, h - s);
    std::uniform_int_distribution<std::size_t> left(0, w - s);
    for (std::size_t i = 0; i < images.n(); ++i) {
        const std::size_t r0 = top(rng);
        const std::size_t c0 = left(rng);
        for (std::size_t r = r0; r < r0 + s; ++r) {
            for (std::size_t c = c0; c < c0 + s; ++c) {
                out.set_missing(i, r * w + c);
            }
        }
    }
    return out;
}

Dataset mask_runs(const Dataset& ds, std::size_t min_len, std::size_t max_len, std::uint64_t seed) {
    if (min_len > max_len || max_len >= ds.d()) {
        throw InvalidConfig("run lengths must satisfy min_len <= max_len < d");
    }
    Dataset out = ds;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> start(0, ds.d() - 1);
    std::uniform_int_distribution<std::size_t> length(min_len, max_len);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const std::size_t s = start(rng);
        const std::size_t len = length(rng);
        for (std::size_t k = 0; k < len; ++k) {
            out.set_missing(i, (s + k) % ds.d());
        }
    }
    return out;
}

GeneratedMixture gen_mixture(std::size_t n, std::size_t d, std::size_t L, double separation,
                             std::uint64_t seed) {
    if (L == 0 || n < L || d == 0) {
        throw InvalidConfig("gen_mixture needs n >= L >= 1 and d >= 1");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto dd = static_cast<Eigen::Index>(d);

    GeneratedMixture out;
    out.weights.assign(L, 1.0 / static_cast<double>(L));
    std::vector<Matrix> chol;
    for (std::size_t j = 0; j < L; ++j) {
        Vector dir(dd);
        for (Eigen::Index k = 0; k < dd; ++k) {
            dir[k] = normal(rng);
        }
        const double len = dir.norm();
        out.means.push_back(len > 0.0 ? Vector(separation * dir / len) : Vector::Zero(dd));
        Matrix a(dd, dd);
        for (Eigen::Index r = 0; r < dd; ++r) {
            for (Eigen::Index c = 0; c < dd; ++c) {
                a(r, c) = normal(rng);
            }
        }
        SymMatrix cov = a * a.transpose() / static_cast<double>(d);
        cov.diagonal().array() += 1.0;
        out.covariances.push_back(cov);
        chol.push_back(cholesky(cov).lower());
    }

    out.data = Dataset(n, d);
    std::uniform_int_distribution<std::size_t> pick(0, L - 1);
    Vector z(dd);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i < L ? i : pick(rng);
        out.labels.push_back(j);
        for (Eigen::Index k = 0; k < dd; ++k) {
            z[k] = normal(rng);
        }
        const Vector x = out.means[j] + chol[j] * z;
        for (std::size_t c = 0; c < d; ++c) {
            out.data.set(i, c, x[static_cast<Eigen::Index>(c)]);
        }
    }
    return out;
}

Dataset gen_images(std::size_t n, std::size_t h, std::size_t w, std::size_t classes,
                   std::uint64_t seed) {
    if (classes == 0 || h == 0 || w == 0) {
        throw InvalidConfig("gen_images needs positive sizes");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::size_t d = h * w;
    const auto dd = static_cast<Eigen::Index>(d);

    auto blob = [&](double cy, double cx, double radius) {
        Vector img(dd);
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                const double dy = static_cast<double>(r) - cy;
                const double dx = static_cast<double>(c) - cx;
                img[static_cast<Eigen::Index>(r * w + c)] =
                    std::exp(-(dx * dx + dy * dy) / (2.0 * radius * radius));
            }
        }
        return img;
    };
    const double hh = static_cast<double>(h);
    const double ww = static_cast<double>(w);

    constexpr std::size_t kBlobsPerPrototype = 3;
    constexpr std::size_t kDeformations = 4;
    std::vector<Vector> prototypes;
    std::vector<std::vector<Vector>> deformations;
    for (std::size_t k = 0; k < classes; ++k) {
        Vector proto = Vector::Zero(dd);
        for (std::size_t b = 0; b < kBlobsPerPrototype; ++b) {
            proto += blob(unit(rng) * (hh - 1), unit(rng) * (ww - 1), 0.8 + 1.2 * unit(rng));
        }
        prototypes.push_back(proto);
        std::vector<Vector> fields;
        for (std::size_t f = 0; f < kDeformations; ++f) {
            fields.push_back(0.6 * blob(unit(rng) * (hh - 1), unit(rng) * (ww - 1), 1.0 + unit(rng)));
        }
        deformations.push_back(std::move(fields));
    }

    Dataset out(n, d);
    std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = pick(rng);
        Vector img = prototypes[k];
        for (const Vector& field : deformations[k]) {
            img += normal(rng) * field;
        }
        for (std::size_t p = 0; p < d; ++p) {
            out.set(i, p, img[static_cast<Eigen::Index>(p)] + 0.05 * normal(rng));
        }
    }
    return out;
}

}  // namespace gmmtree

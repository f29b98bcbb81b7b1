#pragma once

#include "gmmtree/bitmask.hpp"
#include "gmmtree/linalg.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace gmmtree {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// n×d table of reals with a per-cell missingness mask.
///
/// Missing cells hold a quiet NaN in the value slot, so any consumer that
/// reads one by accident poisons its result instead of silently using a stale
/// number.
class Dataset {
public:
    Dataset() = default;
    /// Fully observed n×d table of zeros.
    Dataset(std::size_t n, std::size_t d);
    /// Takes NaN entries of `values` as missing.
    static Dataset from_matrix(const Matrix& values);

    std::size_t n() const noexcept { return masks_.size(); }
    std::size_t d() const noexcept { return d_; }

    bool missing(std::size_t row, std::size_t col) const noexcept { return masks_[row].test(col); }
    double value(std::size_t row, std::size_t col) const noexcept { return values_(row, col); }
    const Mask& row_mask(std::size_t row) const noexcept { return masks_[row]; }
    const RowMatrix& values() const noexcept { return values_; }

    void set(std::size_t row, std::size_t col, double v);
    void set_missing(std::size_t row, std::size_t col);

    std::size_t missing_count() const noexcept;
    bool complete() const noexcept { return missing_count() == 0; }

    /// New dataset with the listed rows, in order.
    Dataset rows(const std::vector<std::size_t>& ids) const;
    /// New dataset with the listed columns, in order.
    Dataset columns(const std::vector<std::size_t>& ids) const;

    std::vector<std::string> column_names;

private:
    std::size_t d_ = 0;
    RowMatrix values_;
    std::vector<Mask> masks_;
};

/// Per-column affine map fitted on observed cells of a set of training rows.
struct Normalizer {
    Vector mean;
    Vector stddev;

    Dataset normalize(const Dataset& ds) const;
    Dataset denormalize(const Dataset& ds) const;
};

/// Population (divide-by-count) statistics over observed training cells.
/// Columns with no spread, or no observation, get stddev 1 (and mean 0 when
/// unobserved).
Normalizer fit_normalizer(const Dataset& ds, const std::vector<std::size_t>& train_rows);

// ---------------------------------------------------------------------------
// CSV

struct CsvOptions {
    std::vector<std::string> missing_markers{"", "NA", "NaN"};
    bool header = false;
    char delimiter = ',';
};

Dataset parse_csv(std::istream& in, const CsvOptions& opts = {});
Dataset load_csv(const std::string& path, const CsvOptions& opts = {});

/// Writes values with 17 significant digits; missing cells as "NA".
void write_csv(std::ostream& out, const Dataset& ds, bool header = false);
void save_csv(const std::string& path, const Dataset& ds, bool header = false);
/// One 0/1 flag per cell (1 = missing).
void write_mask_csv(std::ostream& out, const Dataset& ds);

// ---------------------------------------------------------------------------
// Missingness generators

/// Masks each observed cell independently with probability `fraction`.
/// If `columns` is given, only those columns are eligible.
Dataset mask_mcar(const Dataset& ds, double fraction, std::uint64_t seed,
                  const std::optional<std::vector<std::size_t>>& columns = std::nullopt);

/// Rows are h×w images stored row-major. Each row gets one s×s square of
/// pixels masked, placed uniformly among positions fully inside the image.
Dataset mask_square(const Dataset& images, std::size_t h, std::size_t w, std::size_t s,
                    std::uint64_t seed);

/// Each row gets one cyclic run of consecutive variables masked, with start
/// uniform in 0..d-1 and length uniform in [min_len, max_len]. Runs give many
/// distinct patterns that differ from their neighbors in a few positions.
Dataset mask_runs(const Dataset& ds, std::size_t min_len, std::size_t max_len,
                  std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic data

struct GeneratedMixture {
    Dataset data;
    std::vector<double> weights;
    std::vector<Vector> means;
    std::vector<SymMatrix> covariances;
    std::vector<std::size_t> labels;
};

/// n samples from an L-component full-covariance mixture in d dimensions.
/// Component means are `separation` times random unit vectors; covariances
/// are A·Aᵀ/d + I with Gaussian A. The first L samples take components
/// 0..L-1 in turn, so n == L still uses every component.
GeneratedMixture gen_mixture(std::size_t n, std::size_t d, std::size_t L, double separation,
                             std::uint64_t seed);

/// Smooth low-rank "digit-like" h×w images: each of `classes` prototypes is a
/// sum of Gaussian blobs; samples add random combinations of a few smooth
/// deformation fields and small pixel noise.
Dataset gen_images(std::size_t n, std::size_t h, std::size_t w, std::size_t classes,
                   std::uint64_t seed);

}  // namespace gmmtree

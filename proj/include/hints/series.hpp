#ifndef HINTS_SERIES_HPP
#define HINTS_SERIES_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "hints/mat.hpp"

namespace hints {

// D-variable, T-step multivariate series. values is [D][T] (row = variable).
// Immutable by convention after construction; validate() enforces the
// invariants (finite values, unique names, D >= 1, T >= 2).
struct MultivariateSeries {
    Mat values;
    std::vector<std::string> names;
    std::vector<std::string> timestamps; // optional, size T when present

    std::size_t dims() const { return values.rows(); }
    std::size_t length() const { return values.cols(); }

    void validate() const;
};

// Half-open index range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t length() const { return end - begin; }
};

struct SplitSpec {
    double train_frac = 0.7;
    double val_frac = 0.1;
    double test_frac = 0.2;

    void validate() const;
};

struct SplitIndices {
    IndexRange train, val, test;
};

// Contiguous, time-ordered train < val < test split of [0, T).
SplitIndices make_splits(std::size_t T, const SplitSpec& spec);

// Copy of columns [range.begin, range.end).
Mat slice_cols(const Mat& values, IndexRange range);

// Lookback/horizon pair. input covers the L steps immediately preceding
// target's h steps: input = series[:, start .. start+L), target =
// series[:, start+L .. start+L+h).
struct WindowPair {
    Mat input;  // [D][L]
    Mat target; // [D][h]
    std::size_t start = 0;
};

// Windows over values[:, range). Starts at range.begin, advancing by stride.
// Count = floor((T' - L - h) / stride) + 1 with T' = range.length().
// Throws SeriesTooShort when T' < L + h.
std::vector<WindowPair> make_windows(const Mat& values, IndexRange range,
                                     std::size_t L, std::size_t h, std::size_t stride);

std::vector<WindowPair> make_windows(const MultivariateSeries& series,
                                     std::size_t L, std::size_t h, std::size_t stride);

// Per-variable z-score normalizer fit on the train range only. Population
// standard deviation (divisor N). Throws ConstantVariable when sigma_d = 0.
struct Normalizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    Mat transform(const Mat& values) const;
    Mat inverse(const Mat& values) const;
};

Normalizer fit_normalizer(const Mat& values, IndexRange train_range);

// ---- CSV ingestion ---------------------------------------------------------

struct CsvSchema {
    // Ordered list of columns to ingest; empty = every column except the
    // timestamp column, in file order.
    std::vector<std::string> columns;
    char delimiter = ',';
    // Excluded from D when present; its cells become `timestamps`.
    std::string timestamp_column = "date";
};

// Header row required. Every mapped cell must parse as a finite real.
// Errors: EmptyFile, MissingColumn, NonNumericCell(row, col) with 1-based
// data-row / mapped-column coordinates.
MultivariateSeries load_csv(const std::string& path, const CsvSchema& schema = {});

// Writes a header + data CSV of the series (timestamps first when present).
void save_csv(const MultivariateSeries& series, const std::string& path);

} // namespace hints

#endif

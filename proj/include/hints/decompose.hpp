#ifndef HINTS_DECOMPOSE_HPP
#define HINTS_DECOMPOSE_HPP

#include <cstddef>
#include <string>
#include <vector>

#include "hints/mat.hpp"
#include "hints/series.hpp"

namespace hints {

enum class DecompMode { classical, stl };

DecompMode decomp_mode_from_string(const std::string& s);
std::string to_string(DecompMode m);

struct DecompConfig {
    std::size_t period = 24;
    DecompMode mode = DecompMode::classical;
    // STL only: LOESS span of the cycle-subseries smoother, in cycles (odd).
    std::size_t stl_seasonal_span = 7;
};

// Additive decomposition; trend + seasonal + residual reconstructs the
// input exactly (residual is defined as the remainder).
//
// classical: trend is a full-length moving-average window clamped inside
// the series (length `period` for odd periods; length period+1 with
// half-weighted endpoints for even periods, the 2xP convention). Any
// zero-mean period-P signal is annihilated exactly at every t, including
// the edges, and no value is ever extrapolated. seasonal is the per-phase
// mean of the detrended series over fully-centered interior points,
// recentered to zero sum over one period.
//
// stl: Cleveland-style STL, degree-1 LOESS, n_inner=2, n_outer=1
// (no robustness reweighting): per-cycle-subseries LOESS (span
// stl_seasonal_span cycles), low-pass MA(P)*MA(P)*MA(3) + LOESS, trend
// LOESS on the deseasonalized series.
struct Decomposition {
    Mat trend, seasonal, residual; // each [D][T]
    std::size_t period = 0;
};

// Throws PeriodTooLarge when T < 2*period.
Decomposition decompose(const Mat& values, const DecompConfig& cfg);
Decomposition decompose(const MultivariateSeries& series, const DecompConfig& cfg);

// One CSV per variable: columns (t, value, trend, seasonal, residual).
void dump_decomposition_csv(const Decomposition& d, const Mat& values,
                            const std::vector<std::string>& names,
                            const std::string& out_dir);

// Degree-1 LOESS smoother used by the stl mode; exposed for tests.
// Smooths y (indexed 0..n-1) with tricube weights over `span` nearest
// neighbours and evaluates at positions `eval` (may lie outside [0,n-1]).
std::vector<double> loess_smooth(const std::vector<double>& y, std::size_t span,
                                 const std::vector<double>& eval);

} // namespace hints

#endif

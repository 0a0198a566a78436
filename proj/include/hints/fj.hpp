#ifndef HINTS_FJ_HPP
#define HINTS_FJ_HPP

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hints/mat.hpp"
#include "hints/series.hpp"

namespace hints {

// Coefficients of the expected Human Factor update. beta weights social
// influence, delta self-memory, 1-beta-delta the rolling-bias term;
// lambda is the susceptibility to new residual signals. Time is 0-based
// throughout: the update is defined for t in [1, T-1].
struct FjConfig {
    double beta = 0.4;
    double delta = 0.4;
    double lambda = 0.5;
    std::size_t bias_window = 24;

    void validate() const;
};

// Row-normalized absolute-correlation weights, zero diagonal. A row whose
// correlations all vanish stays all-zero and is flagged.
struct InfluenceMatrix {
    Mat w; // [D][D]
    std::vector<std::uint8_t> zero_row;

    std::size_t dims() const { return w.rows(); }
    void save_csv(const std::string& path, const std::vector<std::string>& names) const;
};

// w_ij = |pearson(R_i, R_j)| for i != j, then each row divided by its sum.
// Requires T >= 3 columns; throws DegenerateVariable for zero-variance rows.
InfluenceMatrix build_influence_matrix(const Mat& residuals);

// B_i(t) = mean of R_i(tau) over tau in [max(0, t-W), t-1]; shrinking
// window near the start. Requires t >= 1.
std::vector<double> rolling_bias(const Mat& residuals, std::size_t W, std::size_t t);

struct FjTerms {
    std::vector<double> social, memory, bias; // each [D]
};

// The three update terms at time t (0-based, t >= 1), kept separate so
// partition properties and ablations can inspect them:
//   social_i = beta * sum_j w_ij * (lambda*R_j(t-1) + (1-lambda)*Hhat_j(t-1))
//   memory_i = delta *            (lambda*R_i(t-1) + (1-lambda)*Hhat_i(t-1))
//   bias_i   = (1-beta-delta) * B_i(t)
FjTerms expected_human_factor_terms(const Mat& R, const Mat& Hhat, const InfluenceMatrix& w,
                                    const FjConfig& cfg, std::size_t t);

// Sum of the three terms; the expected Human Factor H_i(t).
std::vector<double> expected_human_factor(const Mat& R, const Mat& Hhat, const InfluenceMatrix& w,
                                          const FjConfig& cfg, std::size_t t);

// All columns t in [1, T-1] at once (column 0 is zero). O(D^2 T) with the
// rolling bias kept as a running sum.
Mat expected_human_factor_series(const Mat& R, const Mat& Hhat, const InfluenceMatrix& w,
                                 const FjConfig& cfg);

// ---- reference opinion-dynamics simulators ---------------------------------

// Friedkin-Johnsen state: public opinions z, intrinsic opinions s,
// susceptibilities lam in [0,1], row-stochastic weights w_sim.
struct OpinionState {
    std::vector<double> z;
    std::vector<double> s;
    std::vector<double> lam;
    Mat w_sim;

    void validate() const;
};

// Iterates z_i <- lam_i * sum_j w_ij z_j + (1 - lam_i) s_i. Returns all
// intermediate z vectors as columns [N][steps].
Mat simulate_fj(OpinionState state, std::size_t steps);

// Iterates x_i <- sum_j w_ij x_j (consensus averaging).
Mat simulate_degroot(const std::vector<double>& z0, const Mat& w_sim, std::size_t steps);

// ---- planted synthetic data -------------------------------------------------

struct PlantedConfig {
    FjConfig fj;
    std::size_t D = 5;
    std::size_t T = 2000;
    std::uint64_t seed = 1;
    double noise_scale = 0.05;  // white noise added on top of the composite
    double latent_noise = 0.05; // innovation scale of the latent recursion
    double latent_scale = 8.0;  // spread of the latent's persistent initial state
    double trend_slope = 5e-4;
    double seasonal_amp = 1.0;
    std::size_t seasonal_period = 24;
    double burst = 2.0;    // volatility clustering of the latent innovations
    double momentum = 0.8; // burst-gated directional persistence (herding)
};

struct PlantedSeries {
    MultivariateSeries series;
    // Raw FJ-driven trajectory (gain applied). Satisfies the expected
    // Human Factor recursion up to its innovations, so an identity
    // extractor attains the loss floor on it.
    Mat latent;
    // Residual component of the noise-free composite under classical
    // decomposition at seasonal_period: what a perfect decomposition
    // recovers from the generated series when noise_scale = 0.
    Mat expected_residual;
    // The row-stochastic coupling the latent recursion actually used.
    Mat influence;
};

// series = trend + seasonal + (FJ-driven latent + white noise), with the
// latent iterating h_i(t) = beta * sum_j w_ij h_j(t-1) + delta h_i(t-1)
// + (1-beta-delta) B_i(t) + eta_i(t) u, eta volatility-clustered.
// Deterministic for a given seed.
PlantedSeries generate_planted_series(const PlantedConfig& cfg);

} // namespace hints

#endif

#include "hints/fj.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "hints/decompose.hpp"
#include "hints/errors.hpp"
#include "hints/rng.hpp"

namespace hints {

void FjConfig::validate() const {
    auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
    if (!in01(beta) || !in01(delta) || !in01(lambda))
        throw UsageError("beta, delta, lambda must lie in [0,1]");
    if (beta + delta > 1.0 + 1e-12)
        throw UsageError("beta + delta must be <= 1 (dynamic-bias coefficient 1-beta-delta >= 0)");
    if (bias_window == 0) throw UsageError("bias window must be positive");
}

void InfluenceMatrix::save_csv(const std::string& path,
                               const std::vector<std::string>& names) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write influence matrix: " + path);
    out.precision(17);
    out << "variable";
    for (std::size_t j = 0; j < dims(); ++j) out << ',' << (j < names.size() ? names[j] : "v" + std::to_string(j));
    out << '\n';
    for (std::size_t i = 0; i < dims(); ++i) {
        out << (i < names.size() ? names[i] : "v" + std::to_string(i));
        for (std::size_t j = 0; j < dims(); ++j) out << ',' << w(i, j);
        out << '\n';
    }
}

InfluenceMatrix build_influence_matrix(const Mat& residuals) {
    const std::size_t D = residuals.rows();
    const std::size_t T = residuals.cols();
    if (T < 3) throw UsageError("influence matrix needs at least 3 time steps");

    std::vector<double> mean(D), sd(D);
    for (std::size_t d = 0; d < D; ++d) {
        const double* r = residuals.row(d);
        double mu = std::accumulate(r, r + T, 0.0) / static_cast<double>(T);
        double ss = 0.0;
        for (std::size_t t = 0; t < T; ++t) ss += (r[t] - mu) * (r[t] - mu);
        if (ss == 0.0) throw DegenerateVariable(d);
        mean[d] = mu;
        sd[d] = std::sqrt(ss);
    }

    InfluenceMatrix m;
    m.w = Mat(D, D);
    m.zero_row.assign(D, 0);
    for (std::size_t i = 0; i < D; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < D; ++j) {
            if (i == j) continue;
            double cov = 0.0;
            const double* ri = residuals.row(i);
            const double* rj = residuals.row(j);
            for (std::size_t t = 0; t < T; ++t) cov += (ri[t] - mean[i]) * (rj[t] - mean[j]);
            const double corr = cov / (sd[i] * sd[j]);
            m.w(i, j) = std::abs(corr);
            row_sum += m.w(i, j);
        }
        if (row_sum > 0.0) {
            for (std::size_t j = 0; j < D; ++j) m.w(i, j) /= row_sum;
        } else {
            m.zero_row[i] = 1;
        }
    }
    return m;
}

std::vector<double> rolling_bias(const Mat& residuals, std::size_t W, std::size_t t) {
    if (t < 1 || t > residuals.cols()) throw UsageError("rolling bias needs t in [1, T]");
    const std::size_t lo = t > W ? t - W : 0;
    const std::size_t n = t - lo;
    std::vector<double> out(residuals.rows());
    for (std::size_t d = 0; d < residuals.rows(); ++d) {
        const double* r = residuals.row(d);
        double acc = 0.0;
        for (std::size_t tau = lo; tau < t; ++tau) acc += r[tau];
        out[d] = acc / static_cast<double>(n);
    }
    return out;
}

FjTerms expected_human_factor_terms(const Mat& R, const Mat& Hhat, const InfluenceMatrix& w,
                                    const FjConfig& cfg, std::size_t t) {
    if (!R.same_shape(Hhat)) throw ShapeMismatch("R and Hhat differ");
    if (w.dims() != R.rows()) throw ShapeMismatch("influence matrix D != residual D");
    if (t < 1 || t >= R.cols()) throw UsageError("expected human factor needs t in [1, T-1]");
    const std::size_t D = R.rows();

    std::vector<double> mixed(D);
    for (std::size_t j = 0; j < D; ++j)
        mixed[j] = cfg.lambda * R(j, t - 1) + (1.0 - cfg.lambda) * Hhat(j, t - 1);

    FjTerms terms;
    terms.social.resize(D);
    terms.memory.resize(D);
    terms.bias = rolling_bias(R, cfg.bias_window, t);
    const double bias_coeff = 1.0 - cfg.beta - cfg.delta;
    for (std::size_t i = 0; i < D; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < D; ++j) acc += w.w(i, j) * mixed[j];
        terms.social[i] = cfg.beta * acc;
        terms.memory[i] = cfg.delta * mixed[i];
        terms.bias[i] *= bias_coeff;
    }
    return terms;
}

std::vector<double> expected_human_factor(const Mat& R, const Mat& Hhat, const InfluenceMatrix& w,
                                          const FjConfig& cfg, std::size_t t) {
    const FjTerms terms = expected_human_factor_terms(R, Hhat, w, cfg, t);
    std::vector<double> out(R.rows());
    for (std::size_t i = 0; i < R.rows(); ++i)
        out[i] = terms.social[i] + terms.memory[i] + terms.bias[i];
    return out;
}

Mat expected_human_factor_series(const Mat& R, const Mat& Hhat, const InfluenceMatrix& w,
                                 const FjConfig& cfg) {
    if (!R.same_shape(Hhat)) throw ShapeMismatch("R and Hhat differ");
    if (w.dims() != R.rows()) throw ShapeMismatch("influence matrix D != residual D");
    const std::size_t D = R.rows();
    const std::size_t T = R.cols();
    const double bias_coeff = 1.0 - cfg.beta - cfg.delta;
    const std::size_t W = cfg.bias_window;

    Mat H(D, T, 0.0);
    std::vector<double> run_sum(D, 0.0); // sum of R over the bias window ending at t-1
    std::vector<double> mixed(D);
    for (std::size_t t = 1; t < T; ++t) {
        for (std::size_t d = 0; d < D; ++d) {
            run_sum[d] += R(d, t - 1);
            if (t > W) run_sum[d] -= R(d, t - 1 - W);
        }
        const double win = static_cast<double>(std::min(t, W));
        for (std::size_t j = 0; j < D; ++j)
            mixed[j] = cfg.lambda * R(j, t - 1) + (1.0 - cfg.lambda) * Hhat(j, t - 1);
        for (std::size_t i = 0; i < D; ++i) {
            double acc = 0.0;
            const double* wrow = w.w.row(i);
            for (std::size_t j = 0; j < D; ++j) acc += wrow[j] * mixed[j];
            H(i, t) = cfg.beta * acc + cfg.delta * mixed[i] + bias_coeff * run_sum[i] / win;
        }
    }
    return H;
}

// ---- simulators -------------------------------------------------------------

void OpinionState::validate() const {
    const std::size_t N = z.size();
    if (s.size() != N || lam.size() != N || w_sim.rows() != N || w_sim.cols() != N)
        throw ShapeMismatch("opinion state fields disagree on N");
    for (double l : lam)
        if (l < 0.0 || l > 1.0) throw UsageError("susceptibilities must lie in [0,1]");
    for (std::size_t i = 0; i < N; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            if (w_sim(i, j) < 0.0) throw UsageError("simulator weights must be nonnegative");
            row += w_sim(i, j);
        }
        if (std::abs(row - 1.0) > 1e-9)
            throw UsageError("simulator weight row " + std::to_string(i) + " does not sum to 1");
    }
}

Mat simulate_fj(OpinionState state, std::size_t steps) {
    state.validate();
    const std::size_t N = state.z.size();
    Mat traj(N, steps);
    std::vector<double> next(N);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < N; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < N; ++j) acc += state.w_sim(i, j) * state.z[j];
            next[i] = state.lam[i] * acc + (1.0 - state.lam[i]) * state.s[i];
        }
        state.z = next;
        for (std::size_t i = 0; i < N; ++i) traj(i, t) = state.z[i];
    }
    return traj;
}

Mat simulate_degroot(const std::vector<double>& z0, const Mat& w_sim, std::size_t steps) {
    const std::size_t N = z0.size();
    if (w_sim.rows() != N || w_sim.cols() != N) throw ShapeMismatch("degroot weights vs z0");
    Mat traj(N, steps);
    std::vector<double> z = z0, next(N);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t i = 0; i < N; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < N; ++j) acc += w_sim(i, j) * z[j];
            next[i] = acc;
        }
        z = next;
        for (std::size_t i = 0; i < N; ++i) traj(i, t) = z[i];
    }
    return traj;
}

// ---- planted generator -------------------------------------------------------

PlantedSeries generate_planted_series(const PlantedConfig& cfg) {
    cfg.fj.validate();
    const std::size_t D = cfg.D;
    const std::size_t T = cfg.T;
    if (D < 1 || T < 2 * cfg.seasonal_period)
        throw UsageError("planted series needs D >= 1 and T >= 2*seasonal_period");

    auto rng_w = make_rng(cfg.seed, "planted.influence");
    auto rng_h = make_rng(cfg.seed, "planted.latent");
    auto rng_shape = make_rng(cfg.seed, "planted.shape");
    auto rng_noise = make_rng(cfg.seed, "planted.noise");

    // Dense positive influence weights, zero diagonal, row-stochastic.
    // The first half of the variables act as leaders (large own
    // innovations); the rest are followers whose rows concentrate on the
    // leaders, so their dynamics are mostly socially transmitted.
    const std::size_t n_leaders = (D + 1) / 2;
    Mat w(D, D, 0.0);
    for (std::size_t i = 0; i < D; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < D; ++j) {
            if (i == j) continue;
            const bool to_leader = j < n_leaders;
            const double hi = (i >= n_leaders && to_leader) ? 1.0 : 0.4;
            w(i, j) = uniform(rng_w, 0.1, hi);
            row += w(i, j);
        }
        if (row > 0.0)
            for (std::size_t j = 0; j < D; ++j) w(i, j) /= row;
    }

    const double beta = cfg.fj.beta;
    const double delta = cfg.fj.delta;
    const double bias_coeff = 1.0 - beta - delta;
    const std::size_t W = cfg.fj.bias_window;

    // Per-variable innovation scales, trend slopes, seasonal amplitude/phase
    // and measurement-noise gains. Heterogeneity lives in the innovations:
    // per-variable output gains would break the update recursion the latent
    // is meant to satisfy. Followers get small own innovations.
    std::vector<double> eta0(D), slope(D), amp(D), phase(D), noise_gain(D);
    for (std::size_t d = 0; d < D; ++d) {
        const double own = d < n_leaders ? uniform(rng_shape, 0.8, 1.4) : uniform(rng_shape, 0.1, 0.25);
        eta0[d] = cfg.latent_noise * own;
        slope[d] = cfg.trend_slope * uniform(rng_shape, 0.5, 1.5) * (uniform01(rng_shape) < 0.5 ? -1.0 : 1.0);
        amp[d] = cfg.seasonal_amp * uniform(rng_shape, 0.5, 1.5);
        phase[d] = uniform(rng_shape, 0.0, 6.283185307179586);
        noise_gain[d] = uniform(rng_shape, 0.4, 1.8);
    }

    // The update coefficients sum to one, so the consensus projection of the
    // initial state persists forever; a wide initial spread gives the latent
    // a large predictable component on top of its innovations.
    Mat h(D, T);
    for (std::size_t d = 0; d < D; ++d) h(d, 0) = cfg.latent_scale * gauss(rng_h);
    std::vector<double> run_sum(D, 0.0);
    for (std::size_t t = 1; t < T; ++t) {
        const double win = static_cast<double>(std::min(t, W));
        for (std::size_t d = 0; d < D; ++d) {
            run_sum[d] += h(d, t - 1);
            if (t > W) run_sum[d] -= h(d, t - 1 - W);
        }
        for (std::size_t i = 0; i < D; ++i) {
            double social = 0.0;
            for (std::size_t j = 0; j < D; ++j) social += w(i, j) * h(j, t - 1);
            const double drift = beta * social + delta * h(i, t - 1) + bias_coeff * run_sum[i] / win;
            // Innovations cluster and herd: a large latest own increment
            // raises the innovation scale (burst) and biases its direction
            // (momentum), so a leader's big moves arrive in directional
            // runs that followers pick up through the social term.
            double eta = eta0[i];
            double herd = 0.0;
            if (t >= 2) {
                const double incr = h(i, t - 1) - h(i, t - 2);
                const double gate = std::tanh(0.5 * std::abs(incr) / cfg.latent_noise);
                eta *= 1.0 + cfg.burst * gate;
                herd = cfg.momentum * eta0[i] * gate * (incr < 0.0 ? -1.0 : 1.0);
            }
            h(i, t) = drift + herd + eta * gauss(rng_h);
        }
    }

    PlantedSeries out;
    out.latent = h;
    Mat noiseless(D, T);
    out.series.values = Mat(D, T);
    const double two_pi = 6.283185307179586476925286766559;
    for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t t = 0; t < T; ++t) {
            const double tc = static_cast<double>(t) - 0.5 * static_cast<double>(T);
            const double trend = slope[d] * tc;
            const double seas =
                amp[d] * std::sin(two_pi * static_cast<double>(t % cfg.seasonal_period) /
                                      static_cast<double>(cfg.seasonal_period) +
                                  phase[d]);
            noiseless(d, t) = trend + seas + h(d, t);
            out.series.values(d, t) =
                noiseless(d, t) + cfg.noise_scale * noise_gain[d] * gauss(rng_noise);
        }
    }

    DecompConfig dc;
    dc.period = cfg.seasonal_period;
    dc.mode = DecompMode::classical;
    out.expected_residual = decompose(noiseless, dc).residual;

    out.influence = std::move(w);
    out.series.names.resize(D);
    for (std::size_t d = 0; d < D; ++d) out.series.names[d] = "v" + std::to_string(d);
    out.series.validate();
    return out;
}

} // namespace hints

#include "hints/decompose.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "hints/errors.hpp"

namespace hints {

DecompMode decomp_mode_from_string(const std::string& s) {
    if (s == "classical") return DecompMode::classical;
    if (s == "stl") return DecompMode::stl;
    throw UsageError("unknown decomposition mode: " + s);
}

std::string to_string(DecompMode m) {
    return m == DecompMode::classical ? "classical" : "stl";
}

namespace {

// Full-length moving average, window clamped inside [0, n). Odd period:
// uniform window of length P. Even period: window of length P+1 with
// half-weighted endpoints, so the effective span is exactly P and the
// weights stay centered.
std::vector<double> clamped_full_ma(const std::vector<double>& y, std::size_t period) {
    const std::size_t n = y.size();
    std::vector<double> out(n);
    if (period <= 1) {
        out = y;
        return out;
    }
    const bool even = period % 2 == 0;
    const std::size_t win = even ? period + 1 : period; // points touched
    const std::size_t half = win / 2;
    for (std::size_t t = 0; t < n; ++t) {
        std::size_t start = t > half ? t - half : 0;
        if (start + win > n) start = n - win;
        double acc = 0.0;
        if (even) {
            acc += 0.5 * y[start] + 0.5 * y[start + win - 1];
            for (std::size_t j = 1; j + 1 < win; ++j) acc += y[start + j];
        } else {
            for (std::size_t j = 0; j < win; ++j) acc += y[start + j];
        }
        out[t] = acc / static_cast<double>(period);
    }
    return out;
}

void classical_one(const double* y, std::size_t T, std::size_t P,
                   double* trend, double* seasonal, double* residual) {
    std::vector<double> yv(y, y + T);
    std::vector<double> tr = clamped_full_ma(yv, P);

    // Per-phase means of the detrended series over fully-centered points
    // only; edge windows are shifted and would bias the buckets.
    const std::size_t half = (P % 2 == 0 ? P + 1 : P) / 2;
    std::vector<double> bucket(P, 0.0);
    std::vector<std::size_t> count(P, 0);
    for (std::size_t t = half; t + half < T; ++t) {
        bucket[t % P] += yv[t] - tr[t];
        count[t % P] += 1;
    }
    double bucket_mean = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
        bucket[p] = count[p] ? bucket[p] / static_cast<double>(count[p]) : 0.0;
        bucket_mean += bucket[p];
    }
    bucket_mean /= static_cast<double>(P);
    for (std::size_t p = 0; p < P; ++p) bucket[p] -= bucket_mean;

    for (std::size_t t = 0; t < T; ++t) {
        trend[t] = tr[t];
        seasonal[t] = bucket[t % P];
        residual[t] = yv[t] - tr[t] - seasonal[t];
    }
}

double tricube(double u) {
    const double a = 1.0 - u * u * u;
    return a * a * a;
}

// Plain moving average of width w; output length n - w + 1.
std::vector<double> ma(const std::vector<double>& y, std::size_t w) {
    std::vector<double> out(y.size() - w + 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < w; ++i) acc += y[i];
    out[0] = acc / static_cast<double>(w);
    for (std::size_t i = 1; i < out.size(); ++i) {
        acc += y[i + w - 1] - y[i - 1];
        out[i] = acc / static_cast<double>(w);
    }
    return out;
}

std::size_t next_odd(std::size_t v) { return v % 2 == 0 ? v + 1 : v; }

void stl_one(const double* yp, std::size_t T, std::size_t P, std::size_t n_s,
             double* trend_out, double* seasonal_out, double* residual_out) {
    const std::vector<double> y(yp, yp + T);
    std::vector<double> trend(T, 0.0), seasonal(T, 0.0);

    const std::size_t n_l = next_odd(P);
    const double denom = 1.0 - 1.5 / static_cast<double>(n_s);
    const std::size_t n_t =
        next_odd(static_cast<std::size_t>(std::ceil(1.5 * static_cast<double>(P) / denom)));

    const int n_inner = 2;
    for (int it = 0; it < n_inner; ++it) {
        // 1. detrend
        std::vector<double> detr(T);
        for (std::size_t t = 0; t < T; ++t) detr[t] = y[t] - trend[t];

        // 2. cycle-subseries smoothing, extended one period each side
        std::vector<double> C(T + 2 * P, 0.0); // indexed from t = -P
        for (std::size_t p = 0; p < P; ++p) {
            std::vector<double> sub;
            for (std::size_t t = p; t < T; t += P) sub.push_back(detr[t]);
            std::vector<double> eval(sub.size() + 2);
            eval[0] = -1.0;
            for (std::size_t i = 0; i < sub.size(); ++i) eval[i + 1] = static_cast<double>(i);
            eval.back() = static_cast<double>(sub.size());
            const auto sm = loess_smooth(sub, n_s, eval);
            for (std::size_t i = 0; i < sm.size(); ++i) {
                // cycle index i maps to time p + (i-1)*P, offset by +P into C
                const long idx = static_cast<long>(p) + (static_cast<long>(i) - 1) * static_cast<long>(P) +
                                 static_cast<long>(P);
                if (idx >= 0 && idx < static_cast<long>(C.size())) C[static_cast<std::size_t>(idx)] = sm[i];
            }
        }

        // 3. low-pass: MA(P), MA(P), MA(3), then LOESS(n_l)
        auto lp = ma(ma(ma(C, P), P), 3); // length T
        std::vector<double> eval_all(lp.size());
        for (std::size_t i = 0; i < lp.size(); ++i) eval_all[i] = static_cast<double>(i);
        lp = loess_smooth(lp, n_l, eval_all);

        // 4. seasonal = smoothed subseries minus low-pass
        for (std::size_t t = 0; t < T; ++t) seasonal[t] = C[t + P] - lp[t];

        // 5.-6. deseasonalize and smooth the trend
        std::vector<double> des(T);
        for (std::size_t t = 0; t < T; ++t) des[t] = y[t] - seasonal[t];
        std::vector<double> eval_t(T);
        for (std::size_t t = 0; t < T; ++t) eval_t[t] = static_cast<double>(t);
        trend = loess_smooth(des, n_t, eval_t);
    }

    for (std::size_t t = 0; t < T; ++t) {
        trend_out[t] = trend[t];
        seasonal_out[t] = seasonal[t];
        residual_out[t] = y[t] - trend[t] - seasonal[t];
    }
}

} // namespace

std::vector<double> loess_smooth(const std::vector<double>& y, std::size_t span,
                                 const std::vector<double>& eval) {
    const std::size_t n = y.size();
    std::vector<double> out(eval.size());
    if (n == 0) return out;
    if (n == 1) {
        std::fill(out.begin(), out.end(), y[0]);
        return out;
    }
    const std::size_t q = std::max<std::size_t>(2, std::min(span, n));
    for (std::size_t e = 0; e < eval.size(); ++e) {
        const double x0 = eval[e];
        // q nearest integer positions to x0 form a contiguous block
        long lo = static_cast<long>(std::floor(x0)) - static_cast<long>(q / 2);
        lo = std::clamp<long>(lo, 0, static_cast<long>(n - q));
        // slide the block while a closer point exists on the right
        while (lo + static_cast<long>(q) < static_cast<long>(n) &&
               std::abs(static_cast<double>(lo + static_cast<long>(q)) - x0) <
                   std::abs(static_cast<double>(lo) - x0))
            ++lo;
        const std::size_t start = static_cast<std::size_t>(lo);
        double dmax = 0.0;
        for (std::size_t j = 0; j < q; ++j)
            dmax = std::max(dmax, std::abs(static_cast<double>(start + j) - x0));
        if (span > n) // Cleveland: inflate the bandwidth when span exceeds n
            dmax += static_cast<double>(span - n) / 2.0;
        if (dmax <= 0.0) dmax = 1.0;

        // weighted degree-1 least squares evaluated at x0
        double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
        for (std::size_t j = 0; j < q; ++j) {
            const double x = static_cast<double>(start + j);
            const double u = std::abs(x - x0) / dmax;
            if (u >= 1.0) continue;
            const double w = tricube(u);
            sw += w;
            swx += w * x;
            swy += w * y[start + j];
            swxx += w * x * x;
            swxy += w * x * y[start + j];
        }
        if (sw <= 0.0) {
            out[e] = y[std::min<std::size_t>(static_cast<std::size_t>(std::max(0.0, x0)), n - 1)];
            continue;
        }
        const double det = sw * swxx - swx * swx;
        if (std::abs(det) < 1e-12 * std::max(1.0, sw * swxx)) {
            out[e] = swy / sw; // degenerate: fall back to weighted mean
        } else {
            const double slope = (sw * swxy - swx * swy) / det;
            const double intercept = (swy - slope * swx) / sw;
            out[e] = intercept + slope * x0;
        }
    }
    return out;
}

Decomposition decompose(const Mat& values, const DecompConfig& cfg) {
    const std::size_t D = values.rows();
    const std::size_t T = values.cols();
    if (cfg.period < 1) throw UsageError("period must be positive");
    if (T < 2 * cfg.period) throw PeriodTooLarge(T, cfg.period);

    Decomposition d;
    d.period = cfg.period;
    d.trend = Mat(D, T);
    d.seasonal = Mat(D, T);
    d.residual = Mat(D, T);
    for (std::size_t v = 0; v < D; ++v) {
        if (cfg.mode == DecompMode::classical)
            classical_one(values.row(v), T, cfg.period, d.trend.row(v), d.seasonal.row(v),
                          d.residual.row(v));
        else
            stl_one(values.row(v), T, cfg.period, next_odd(std::max<std::size_t>(3, cfg.stl_seasonal_span)),
                    d.trend.row(v), d.seasonal.row(v), d.residual.row(v));
    }
    return d;
}

Decomposition decompose(const MultivariateSeries& series, const DecompConfig& cfg) {
    return decompose(series.values, cfg);
}

void dump_decomposition_csv(const Decomposition& d, const Mat& values,
                            const std::vector<std::string>& names,
                            const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    for (std::size_t v = 0; v < values.rows(); ++v) {
        std::ofstream out(out_dir + "/decomp_" + names[v] + ".csv");
        if (!out) throw Error("cannot write decomposition dump in " + out_dir);
        out.precision(17);
        out << "t,value,trend,seasonal,residual\n";
        for (std::size_t t = 0; t < values.cols(); ++t)
            out << t << ',' << values(v, t) << ',' << d.trend(v, t) << ',' << d.seasonal(v, t)
                << ',' << d.residual(v, t) << '\n';
    }
}

} // namespace hints

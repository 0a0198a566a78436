// Built-in oracle/invariant suite behind `hints selftest`. Each check prints
// one [ok]/[FAIL] line; the exit code is the number of failures.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "hints/config.hpp"
#include "hints/decompose.hpp"
#include "hints/errors.hpp"
#include "hints/fj.hpp"
#include "hints/grad.hpp"
#include "hints/harness.hpp"
#include "hints/rng.hpp"
#include "hints/series.hpp"
#include "hints/stage1.hpp"
#include "hints/stage2.hpp"

namespace {

int failures = 0;

void check(bool ok, const std::string& name) {
    std::cout << (ok ? "[ok]   " : "[FAIL] ") << name << "\n";
    if (!ok) ++failures;
}

hints::Mat random_mat(std::size_t r, std::size_t c, std::uint64_t seed, double scale = 1.0) {
    auto rng = hints::make_rng(seed, "selftest");
    hints::Mat m(r, c);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * hints::gauss(rng);
    return m;
}

void check_normalizer() {
    const hints::Mat x = random_mat(3, 50, 11);
    const auto nm = hints::fit_normalizer(x, {0, 50});
    const hints::Mat back = nm.inverse(nm.transform(x));
    check(hints::max_abs_diff(back, x) < 1e-12, "normalizer round trip < 1e-12");
}

void check_windows() {
    const hints::Mat x = random_mat(2, 100, 12);
    const auto w = hints::make_windows(x, {0, 100}, 24, 12, 12);
    bool ok = w.size() == 6;
    for (std::size_t i = 0; ok && i < w.size(); ++i)
        ok = w[i].start == i * 12 && w[i].input(0, 0) == x(0, i * 12) &&
             w[i].target(0, 0) == x(0, i * 12 + 24);
    check(ok, "window count and contiguity (T=100, L=24, h=12, stride=12)");
}

void check_decomposition() {
    for (auto mode : {hints::DecompMode::classical, hints::DecompMode::stl}) {
        const hints::Mat x = random_mat(4, 120, 13);
        hints::DecompConfig cfg;
        cfg.period = 12;
        cfg.mode = mode;
        const auto d = hints::decompose(x, cfg);
        double err = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            err = std::max(err, std::abs(d.trend.data()[i] + d.seasonal.data()[i] +
                                         d.residual.data()[i] - x.data()[i]));
        check(err < 1e-9, "decomposition reconstruction < 1e-9 (" + to_string(mode) + ")");
    }
    hints::Mat sine(1, 240);
    for (std::size_t t = 0; t < 240; ++t)
        sine(0, t) = std::sin(2.0 * 3.14159265358979323846 * static_cast<double>(t) / 24.0);
    hints::DecompConfig cfg;
    cfg.period = 24;
    const auto d = hints::decompose(sine, cfg);
    double mx = 0.0;
    for (std::size_t t = 0; t < 240; ++t) mx = std::max(mx, std::abs(d.residual(0, t)));
    check(mx < 1e-6, "pure sine residual < 1e-6 (classical)");
}

void check_influence() {
    const hints::Mat r = random_mat(3, 60, 14);
    const auto m = hints::build_influence_matrix(r);
    // naive pairwise Pearson, abs, zero diagonal, row normalize
    bool ok = true;
    for (std::size_t i = 0; i < 3 && ok; ++i) {
        double row[3] = {0, 0, 0}, sum = 0;
        for (std::size_t j = 0; j < 3; ++j) {
            if (i == j) continue;
            double mi = 0, mj = 0;
            for (std::size_t t = 0; t < 60; ++t) {
                mi += r(i, t);
                mj += r(j, t);
            }
            mi /= 60;
            mj /= 60;
            double cov = 0, vi = 0, vj = 0;
            for (std::size_t t = 0; t < 60; ++t) {
                cov += (r(i, t) - mi) * (r(j, t) - mj);
                vi += (r(i, t) - mi) * (r(i, t) - mi);
                vj += (r(j, t) - mj) * (r(j, t) - mj);
            }
            row[j] = std::abs(cov / std::sqrt(vi * vj));
            sum += row[j];
        }
        for (std::size_t j = 0; j < 3; ++j)
            if (std::abs((i == j ? 0.0 : row[j] / sum) - m.w(i, j)) > 1e-12) ok = false;
    }
    check(ok, "influence matrix matches naive Pearson oracle < 1e-12");
}

void check_expected_h() {
    const hints::Mat R = random_mat(3, 10, 15);
    const hints::Mat Hh = random_mat(3, 10, 16);
    const auto w = hints::build_influence_matrix(R);
    hints::FjConfig cfg;
    cfg.beta = 0.4;
    cfg.delta = 0.4;
    cfg.lambda = 0.5;
    cfg.bias_window = 3;
    bool ok = true;
    for (std::size_t t = 1; t < 10 && ok; ++t) {
        const auto got = hints::expected_human_factor(R, Hh, w, cfg, t);
        for (std::size_t i = 0; i < 3; ++i) {
            double social = 0.0;
            for (std::size_t j = 0; j < 3; ++j)
                social += w.w(i, j) * (cfg.lambda * R(j, t - 1) + (1 - cfg.lambda) * Hh(j, t - 1));
            const std::size_t lo = t > 3 ? t - 3 : 0;
            double bias = 0.0;
            for (std::size_t tau = lo; tau < t; ++tau) bias += R(i, tau);
            bias /= static_cast<double>(t - lo);
            const double want = cfg.beta * social +
                                cfg.delta * (cfg.lambda * R(i, t - 1) + (1 - cfg.lambda) * Hh(i, t - 1)) +
                                (1 - cfg.beta - cfg.delta) * bias;
            if (std::abs(want - got[i]) > 1e-12) ok = false;
        }
    }
    check(ok, "expected human factor matches triple-loop oracle < 1e-12");
}

void check_simulators() {
    hints::OpinionState st;
    st.z = {0.0, 1.0};
    st.s = {0.0, 1.0};
    st.lam = {0.5, 0.5};
    st.w_sim = hints::Mat(2, 2);
    st.w_sim(0, 1) = 1.0;
    st.w_sim(1, 0) = 1.0;
    const auto traj = hints::simulate_fj(st, 200);
    // closed form (I - Lam w)^-1 (I - Lam) s for the 2x2 instance
    const double a = 1.0, b = -0.5, c = -0.5, d = 1.0;
    const double det = a * d - b * c;
    const double r0 = 0.5 * st.s[0], r1 = 0.5 * st.s[1];
    const double z0 = (d * r0 - b * r1) / det;
    const double z1 = (-c * r0 + a * r1) / det;
    const bool fixed_ok =
        std::abs(traj(0, 199) - z0) < 1e-8 && std::abs(traj(1, 199) - z1) < 1e-8;
    check(fixed_ok, "FJ 2x2 fixed point < 1e-8 by 200 steps");

    st.lam = {1.0, 1.0};
    const auto fj1 = hints::simulate_fj(st, 50);
    const auto dg = hints::simulate_degroot(st.z, st.w_sim, 50);
    check(hints::max_abs_diff(fj1, dg) < 1e-12, "lambda=1 reduces to consensus iteration < 1e-12");
}

void check_gradients() {
    auto rng = hints::make_rng(7, "selftest.grad");
    {
        hints::ParamModule m;
        m.add_tensor("W", {3, 4});
        m.add_tensor("b", {3});
        hints::init_uniform(m.tensor("W"), 12, 4, rng);
        hints::init_uniform(m.tensor("b"), 3, 4, rng);
        const hints::Mat x = random_mat(4, 5, 19);
        auto loss = [&]() {
            const hints::Mat y = hints::affine_forward(m.mat("W"), m.tensor("b"), x);
            double acc = 0;
            for (std::size_t i = 0; i < y.size(); ++i) acc += y.data()[i] * y.data()[i];
            return acc;
        };
        const hints::Mat y = hints::affine_forward(m.mat("W"), m.tensor("b"), x);
        hints::Mat gy(y.rows(), y.cols());
        for (std::size_t i = 0; i < y.size(); ++i) gy.data()[i] = 2.0 * y.data()[i];
        std::vector<double> grads(m.size(), 0.0);
        hints::affine_backward(m.mat("W"), x, gy,
                               hints::MatView{grads.data(), 3, 4}, grads.data() + 12, nullptr);
        check(hints::grad_check(m, loss, grads).max_rel_error < 1e-4,
              "affine gradient check < 1e-4");
    }
    {
        hints::ParamModule m;
        m.add_tensor("K", {2, 5});
        m.add_tensor("bias", {2});
        hints::init_uniform(m.tensor("K"), 10, 5, rng);
        hints::init_uniform(m.tensor("bias"), 2, 5, rng);
        const hints::Mat x = random_mat(2, 16, 23);
        const hints::Mat target = random_mat(2, 16, 24);
        auto loss = [&]() {
            const auto c = hints::conv1d_forward(x, m.mat("K"), m.tensor("bias"));
            return hints::mse(hints::softmax_over_time(hints::tanh_forward(c)), target);
        };
        const auto c = hints::conv1d_forward(x, m.mat("K"), m.tensor("bias"));
        const auto th = hints::tanh_forward(c);
        const auto sm = hints::softmax_over_time(th);
        const auto gsm = hints::mse_backward(sm, target);
        const auto gth = hints::softmax_over_time_backward(sm, gsm);
        const auto gc = hints::tanh_backward(th, gth);
        std::vector<double> grads(m.size(), 0.0);
        hints::conv1d_backward(x, m.mat("K"), gc, hints::MatView{grads.data(), 2, 5},
                               grads.data() + 10, nullptr);
        check(hints::grad_check(m, loss, grads).max_rel_error < 1e-3,
              "conv->tanh->softmax->mse gradient check < 1e-3");
    }
}

void check_checkpoint(const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::string path = out_dir + "/selftest.ckpt";
    auto model = hints::ExtractorModel::create(4, true, 99);
    model.save(path);
    const auto back = hints::ExtractorModel::load(path, 4);
    const hints::Mat r = random_mat(4, 12, 31);
    check(hints::max_abs_diff(model.extract(r), back.extract(r)) == 0.0,
          "checkpoint round trip is bit-exact");

    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    std::filesystem::resize_file(path, size / 2, ec);
    bool threw = false;
    try {
        hints::ExtractorModel::load(path, 4);
    } catch (const hints::CorruptCheckpoint&) {
        threw = true;
    }
    check(threw, "truncated checkpoint raises a corruption error");
    std::filesystem::remove(path, ec);
}

void check_gamma_zero(const hints::RunConfig& base) {
    hints::PlantedConfig pc = base.planted();
    pc.D = 3;
    pc.T = 420;
    pc.seed = 5;
    const auto planted = hints::generate_planted_series(pc);
    hints::RunConfig cfg = base;
    cfg.stage2.L = 48;
    cfg.stage2.h = 12;
    cfg.stage2.epochs = 3;
    cfg.stage2.patience = 0;
    cfg.decomp.period = pc.seasonal_period;
    cfg.stage1.epochs = 30;
    const auto data = hints::prepare_data(planted.series, cfg);
    const auto rec_base = hints::run_single(data, cfg, hints::Variant::baseline, 5, 12);
    cfg.stage2.gamma = 0.0;
    const auto rec_zero = hints::run_single(data, cfg, hints::Variant::hints, 5, 12);
    check(rec_base.metrics.mse == rec_zero.metrics.mse &&
              rec_base.metrics.mae == rec_zero.metrics.mae,
          "gamma=0 pipeline equals bare backbone bitwise");
}

void check_improvement_arithmetic() {
    const double imp_mse = hints::improvement_avg_pct({0.081, 0.157, 0.305, 0.643},
                                                      {0.077, 0.150, 0.258, 0.550});
    const double imp_mae = hints::improvement_avg_pct({0.203, 0.293, 0.414, 0.601},
                                                      {0.198, 0.284, 0.380, 0.579});
    check(std::abs(imp_mse - 12.7) < 0.1 && std::abs(imp_mae - 4.63) < 0.1,
          "improvement arithmetic reproduces published 12.7%/4.63%");
}

} // namespace

int hints_selftest(const hints::RunConfig& cfg) {
    check_normalizer();
    check_windows();
    check_decomposition();
    check_influence();
    check_expected_h();
    check_simulators();
    check_gradients();
    check_checkpoint(cfg.out_dir);
    check_gamma_zero(cfg);
    check_improvement_arithmetic();
    std::cout << (failures == 0 ? "selftest passed" : "selftest FAILED") << "\n";
    return failures;
}

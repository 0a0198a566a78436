#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "hints/errors.hpp"
#include "hints/fj.hpp"
#include "hints/series.hpp"
#include "hints/stage2.hpp"
#include "helpers.hpp"

using namespace hints;

namespace {

std::vector<WindowPair> toy_windows(std::size_t count, std::size_t D, std::size_t L,
                                    std::size_t h, std::uint64_t seed) {
    const Mat series = test::random_mat(D, count + L + h - 1, seed);
    return make_windows(series, {0, series.cols()}, L, h, 1);
}

DecompConfig small_decomp() {
    DecompConfig d;
    d.period = 6;
    return d;
}

} // namespace

TEST_CASE("attention of a constant factor window is uniform away from the padding") {
    // Zero padding makes the convolution of a constant differ in the first
    // and last (k-1)/2 steps; the interior is exactly uniform.
    const auto block = AttentionBlock::create(3, 5, 1);
    const std::size_t L = 20;
    const Mat flat(3, L, 0.37);
    const Mat A = block.attention_map(flat);
    for (std::size_t d = 0; d < 3; ++d) {
        double sum = 0.0;
        for (std::size_t t = 0; t < L; ++t) sum += A(d, t);
        CHECK(std::abs(sum - 1.0) < 1e-9);
        for (std::size_t t = 2; t + 2 < L; ++t)
            CHECK(A(d, t) == doctest::Approx(A(d, 2)).epsilon(1e-12));
        // edges stay within a few percent of uniform for a fresh block
        for (std::size_t t = 0; t < L; ++t) {
            CHECK(A(d, t) > 0.5 / static_cast<double>(L));
            CHECK(A(d, t) < 2.0 / static_cast<double>(L));
        }
    }
}

TEST_CASE("attention rows sum to one and stay nonnegative") {
    const auto block = AttentionBlock::create(2, 5, 2);
    for (std::uint64_t trial = 0; trial < 200; ++trial) {
        const Mat h = test::random_mat(2, 24, 900 + trial, 2.0);
        const Mat A = block.attention_map(h);
        for (std::size_t d = 0; d < 2; ++d) {
            double sum = 0.0;
            for (std::size_t t = 0; t < 24; ++t) {
                CHECK(A(d, t) >= 0.0);
                sum += A(d, t);
            }
            CHECK(std::abs(sum - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("a delta-like kernel concentrates attention near a factor spike") {
    auto block = AttentionBlock::create(1, 5, 3);
    // hand-set kernel: passthrough of the centred tap
    double* K = block.params().tensor("attn.conv.weight");
    for (int j = 0; j < 5; ++j) K[j] = j == 2 ? 1.0 : 0.0;
    block.params().tensor("attn.conv.bias")[0] = 0.0;

    Mat h(1, 40, 0.0);
    h(0, 23) = 3.0; // spike
    const Mat A = block.attention_map(h);
    std::size_t argmax = 0;
    for (std::size_t t = 1; t < 40; ++t)
        if (A(0, t) > A(0, argmax)) argmax = t;
    CHECK(std::abs(static_cast<long>(argmax) - 23L) <= 2); // within (k-1)/2
}

TEST_CASE("modulation identity at gamma zero is bitwise") {
    const Mat X = test::random_mat(3, 16, 91);
    const Mat A = test::random_mat(3, 16, 92);
    const Mat out = modulate(X, A, 0.0);
    for (std::size_t i = 0; i < X.size(); ++i)
        CHECK(std::memcmp(&out.data()[i], &X.data()[i], sizeof(double)) == 0);
}

TEST_CASE("modulation arithmetic") {
    const std::size_t L = 10;
    const Mat X = test::random_mat(2, L, 93);
    const Mat A(2, L, 1.0 / L);
    const Mat out = modulate(X, A, 1.0);
    for (std::size_t i = 0; i < X.size(); ++i)
        CHECK(out.data()[i] == doctest::Approx(X.data()[i] * (1.0 + 1.0 / L)).epsilon(1e-15));

    // elementwise loop oracle on random inputs
    const Mat Ar = softmax_over_time(test::random_mat(2, L, 94));
    const double gamma = 0.7;
    const Mat got = modulate(X, Ar, gamma);
    for (std::size_t d = 0; d < 2; ++d)
        for (std::size_t t = 0; t < L; ++t)
            CHECK(std::abs(got(d, t) - X(d, t) * (1.0 + gamma * Ar(d, t))) < 1e-12);
}

TEST_CASE("modulation perturbation is bounded by gamma times the input") {
    const Mat X = test::random_mat(4, 32, 95, 3.0);
    const Mat A = softmax_over_time(test::random_mat(4, 32, 96));
    double xmax = 0.0;
    for (std::size_t i = 0; i < X.size(); ++i) xmax = std::max(xmax, std::abs(X.data()[i]));
    for (double gamma : {0.1, 0.5, 1.0}) {
        const Mat out = modulate(X, A, gamma);
        double dmax = 0.0;
        for (std::size_t i = 0; i < X.size(); ++i)
            dmax = std::max(dmax, std::abs(out.data()[i] - X.data()[i]));
        CHECK(dmax <= gamma * xmax + 1e-12);
    }
}

TEST_CASE("backbone zero input yields the bias terms") {
    auto backbone = DLinearBackbone::create(8, 4, 3, 5);
    double* tb = backbone.params().tensor("trend.bias");
    double* rb = backbone.params().tensor("rem.bias");
    const Mat zero(3, 8, 0.0);
    const Mat y = backbone.forecast(zero);
    for (std::size_t d = 0; d < 3; ++d)
        for (std::size_t s = 0; s < 4; ++s)
            CHECK(y(d, s) == doctest::Approx(tb[s] + rb[s]).epsilon(1e-12));
}

TEST_CASE("identity-configured backbone reproduces its input") {
    const std::size_t L = 6;
    auto backbone = DLinearBackbone::create(L, L, 1, 6); // m=1: remainder is zero
    MatView tw = backbone.params().mat("trend.weight");
    MatView rw = backbone.params().mat("rem.weight");
    for (std::size_t i = 0; i < L; ++i)
        for (std::size_t j = 0; j < L; ++j) {
            tw(i, j) = i == j ? 1.0 : 0.0;
            rw(i, j) = 0.33; // multiplied by a zero remainder
        }
    std::fill_n(backbone.params().tensor("trend.bias"), L, 0.0);
    std::fill_n(backbone.params().tensor("rem.bias"), L, 0.0);
    const Mat x = test::random_mat(2, L, 97);
    CHECK(max_abs_diff(backbone.forecast(x), x) < 1e-12);
}

TEST_CASE("backbone matches a naive per-channel matmul oracle") {
    const std::size_t L = 12, h = 5, m = 3;
    auto backbone = DLinearBackbone::create(L, h, m, 7);
    const Mat x = test::random_mat(4, L, 98);
    const Mat got = backbone.forecast(x);

    const CMatView tw = backbone.params().mat("trend.weight");
    const CMatView rw = backbone.params().mat("rem.weight");
    const double* tb = backbone.params().tensor("trend.bias");
    const double* rb = backbone.params().tensor("rem.bias");
    for (std::size_t d = 0; d < 4; ++d) {
        // naive trend split with edge replication
        std::vector<double> trend(L, 0.0);
        for (long t = 0; t < static_cast<long>(L); ++t) {
            double acc = 0.0;
            for (long j = -1; j <= 1; ++j)
                acc += x(d, static_cast<std::size_t>(std::clamp<long>(t + j, 0, L - 1)));
            trend[static_cast<std::size_t>(t)] = acc / 3.0;
        }
        for (std::size_t s = 0; s < h; ++s) {
            double acc = tb[s] + rb[s];
            for (std::size_t t = 0; t < L; ++t)
                acc += tw(s, t) * trend[t] + rw(s, t) * (x(d, t) - trend[t]);
            CHECK(std::abs(got(d, s) - acc) < 1e-10);
        }
    }
}

TEST_CASE("backbone is affine: superposition holds") {
    auto backbone = DLinearBackbone::create(10, 4, 3, 8);
    const Mat x1 = test::random_mat(2, 10, 99);
    const Mat x2 = test::random_mat(2, 10, 100);
    const double a = 1.7, b = -0.6;
    Mat mix(2, 10);
    for (std::size_t i = 0; i < mix.size(); ++i)
        mix.data()[i] = a * x1.data()[i] + b * x2.data()[i];
    const Mat y_mix = backbone.forecast(mix);
    const Mat y1 = backbone.forecast(x1);
    const Mat y2 = backbone.forecast(x2);
    const Mat y0 = backbone.forecast(Mat(2, 10, 0.0));
    for (std::size_t i = 0; i < y_mix.size(); ++i)
        CHECK(std::abs(y_mix.data()[i] - (a * y1.data()[i] + b * y2.data()[i] -
                                          (a + b - 1.0) * y0.data()[i])) < 1e-9);
}

TEST_CASE("end-to-end gradients through modulate+forecast+mse pass the check") {
    const std::size_t D = 2, L = 12, h = 4;
    auto attention = AttentionBlock::create(D, 5, 11);
    auto backbone = DLinearBackbone::create(L, h, 3, 11);
    const Mat hhat = test::random_mat(D, L, 101);
    const Mat x = test::random_mat(D, L, 102);
    const Mat target = test::random_mat(D, h, 103);
    const double gamma = 0.8;

    auto forward_loss = [&]() {
        const Mat A = attention.attention_map(hhat);
        const Mat xt = modulate(x, A, gamma);
        return mse(backbone.forecast(xt), target);
    };

    // analytic gradients via the training chain
    const auto af = attention.forward(hhat);
    const Mat xt = modulate(x, af.attn, gamma);
    const auto bf = backbone.forward(xt);
    const Mat gpred = mse_backward(bf.pred, target);
    std::vector<double> g_backbone(backbone.params().size(), 0.0);
    Mat gxt(D, L, 0.0);
    backbone.backward(bf, gpred, g_backbone, &gxt);
    Mat gA(D, L);
    for (std::size_t i = 0; i < gA.size(); ++i)
        gA.data()[i] = gamma * x.data()[i] * gxt.data()[i];
    std::vector<double> g_attn(attention.params().size(), 0.0);
    attention.backward(hhat, af, gA, g_attn);

    CHECK(grad_check(backbone.params(), forward_loss, g_backbone).max_rel_error < 1e-3);
    CHECK(grad_check(attention.params(), forward_loss, g_attn).max_rel_error < 1e-3);
}

TEST_CASE("gamma-zero training equals the bare backbone bitwise") {
    const auto train = toy_windows(30, 2, 16, 4, 104);
    const auto val = toy_windows(8, 2, 16, 4, 105);
    const auto extractor = ExtractorModel::identity(2);
    Stage2Config cfg;
    cfg.L = 16;
    cfg.h = 4;
    cfg.epochs = 4;
    cfg.seed = 77;
    cfg.ma_window = 3;
    cfg.patience = 0;
    DecompConfig dec;
    dec.period = 5;

    Stage2Config bare = cfg;
    bare.use_attention = false;
    const auto bare_run = train_stage2(train, val, extractor, dec, bare);

    Stage2Config zero = cfg;
    zero.gamma = 0.0;
    const auto zero_run = train_stage2(train, val, extractor, dec, zero);

    REQUIRE(bare_run.train_curve.size() == zero_run.train_curve.size());
    for (std::size_t i = 0; i < bare_run.train_curve.size(); ++i) {
        CHECK(bare_run.train_curve[i] == zero_run.train_curve[i]);
        CHECK(bare_run.val_curve[i] == zero_run.val_curve[i]);
    }
    const auto& pb = bare_run.backbone.params().params();
    const auto& pz = zero_run.backbone.params().params();
    REQUIRE(pb.size() == pz.size());
    for (std::size_t i = 0; i < pb.size(); ++i) CHECK(pb[i] == pz[i]);

    // and the attention parameters were never touched at gamma zero
    const auto fresh = AttentionBlock::create(2, cfg.kernel, cfg.seed);
    const auto& pa = zero_run.attention.params().params();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == fresh.params().params()[i]);
}

TEST_CASE("perfect linear targets are fit to numerical precision") {
    // targets are an exact linear readout of the inputs: realizable
    const std::size_t L = 8, h = 3;
    const Mat series = test::random_mat(1, 160, 106);
    auto windows = make_windows(series, {0, 160}, L, h, 1);
    for (auto& w : windows)
        for (std::size_t s = 0; s < h; ++s)
            w.target(0, s) = 0.5 * w.input(0, L - 1) - 0.25 * w.input(0, 0) + 0.1;

    const auto extractor = ExtractorModel::identity(1);
    Stage2Config cfg;
    cfg.L = L;
    cfg.h = h;
    cfg.epochs = 4000;
    cfg.lr = 0.05;
    cfg.seed = 3;
    cfg.ma_window = 3;
    cfg.patience = 0;
    cfg.use_attention = false;
    DecompConfig dec;
    dec.period = 4;
    const auto run = train_stage2(windows, {}, extractor, dec, cfg);
    CHECK(run.train_curve.back() < 1e-6);
}

TEST_CASE("evaluate computes per-window means and error paths") {
    const auto extractor = ExtractorModel::identity(2);
    auto backbone = DLinearBackbone::create(6, 2, 3, 9);
    DecompConfig dec;
    dec.period = 3;

    CHECK_THROWS_AS(evaluate({}, extractor, nullptr, backbone, dec, 0.0, false), EmptyTestSet);

    // prediction == target -> (0, 0); +1 everywhere -> (1, 1)
    auto windows = toy_windows(5, 2, 6, 2, 107);
    for (auto& w : windows) w.target = backbone.forecast(w.input);
    auto m = evaluate(windows, extractor, nullptr, backbone, dec, 0.0, false);
    CHECK(m.mse == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(m.mae == doctest::Approx(0.0).epsilon(1e-15));

    for (auto& w : windows)
        for (std::size_t i = 0; i < w.target.size(); ++i) w.target.data()[i] += 1.0;
    m = evaluate(windows, extractor, nullptr, backbone, dec, 0.0, false);
    CHECK(m.mse == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.mae == doctest::Approx(1.0).epsilon(1e-12));

    // naive accumulation oracle on random targets
    auto rnd = toy_windows(4, 2, 6, 2, 108);
    m = evaluate(rnd, extractor, nullptr, backbone, dec, 0.0, false);
    double acc_mse = 0, acc_mae = 0;
    for (const auto& w : rnd) {
        const Mat p = backbone.forecast(w.input);
        double se = 0, ae = 0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            se += (p.data()[i] - w.target.data()[i]) * (p.data()[i] - w.target.data()[i]);
            ae += std::abs(p.data()[i] - w.target.data()[i]);
        }
        acc_mse += se / static_cast<double>(p.size());
        acc_mae += ae / static_cast<double>(p.size());
    }
    CHECK(std::abs(m.mse - acc_mse / 4.0) < 1e-12);
    CHECK(std::abs(m.mae - acc_mae / 4.0) < 1e-12);
}

TEST_CASE("frozen extractor hash is unchanged by stage-2 training") {
    PlantedConfig pc;
    pc.D = 3;
    pc.T = 400;
    pc.seed = 31;
    const auto planted = generate_planted_series(pc);
    const auto windows = make_windows(planted.series.values, {0, 300}, 48, 6, 2);
    const auto val = make_windows(planted.series.values, {300, 400}, 48, 6, 2);

    Stage1Config s1;
    s1.fj = pc.fj;
    s1.epochs = 50;
    DecompConfig dec;
    dec.period = pc.seasonal_period;
    const auto extractor =
        train_stage1(decompose(slice_cols(planted.series.values, {0, 300}), dec).residual, s1)
            .model;
    const auto hash_before = extractor.params().content_hash();

    Stage2Config cfg;
    cfg.L = 48;
    cfg.h = 6;
    cfg.epochs = 2;
    cfg.patience = 0;
    const auto run = train_stage2(windows, val, extractor, dec, cfg);
    CHECK(extractor.params().content_hash() == hash_before);
    CHECK(run.best_val_mse > 0.0);
}

TEST_CASE("bundle checkpoint round trip") {
    const auto dir = test::scratch_dir("stage2_bundle");
    ModelBundle b;
    b.attention = AttentionBlock::create(3, 5, 41);
    b.backbone = DLinearBackbone::create(12, 4, 3, 41);
    b.gamma = 0.9;
    b.use_attention = true;
    b.extractor_hash = 0xDEADBEEFCAFEBABEull;
    save_bundle(b, dir + "/bundle.ckpt");
    const auto back = load_bundle(dir + "/bundle.ckpt");
    CHECK(back.gamma == 0.9);
    CHECK(back.use_attention);
    CHECK(back.extractor_hash == b.extractor_hash);
    CHECK(back.attention.kernel() == 5);
    CHECK(back.backbone.lookback() == 12);
    CHECK(back.backbone.horizon() == 4);
    const Mat x = test::random_mat(3, 12, 109);
    CHECK(max_abs_diff(back.backbone.forecast(x), b.backbone.forecast(x)) == 0.0);
    CHECK(max_abs_diff(back.attention.attention_map(x), b.attention.attention_map(x)) == 0.0);
}

TEST_CASE("prediction dump has one row per (window, variable, step)") {
    const auto dir = test::scratch_dir("stage2_dump");
    auto backbone = DLinearBackbone::create(6, 2, 3, 10);
    const auto windows = toy_windows(3, 2, 6, 2, 110);
    std::vector<Mat> preds;
    for (const auto& w : windows) preds.push_back(backbone.forecast(w.input));
    dump_predictions_csv(windows, preds, {"a", "b"}, dir + "/preds.csv");
    std::ifstream in(dir + "/preds.csv");
    std::string line;
    int rows = -1; // header
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 3 * 2 * 2);
}

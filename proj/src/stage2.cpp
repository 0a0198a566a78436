#include "hints/stage2.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>

#include "hints/errors.hpp"
#include "hints/rng.hpp"

namespace hints {

// ---- attention -----------------------------------------------------------------

AttentionBlock AttentionBlock::create(std::size_t D, std::size_t kernel, std::uint64_t seed) {
    if (kernel % 2 == 0) throw UsageError("attention kernel size must be odd");
    AttentionBlock b;
    b.kernel_ = kernel;
    auto rng = make_rng(seed, "stage2.attention.init");
    double* w = b.params_.add_tensor("attn.conv.weight", {D, kernel});
    init_uniform(w, D * kernel, kernel, rng);
    b.params_.add_tensor("attn.conv.bias", {D}); // zeros
    return b;
}

AttentionBlock::Forward AttentionBlock::forward(const Mat& hhat_window) const {
    Forward f;
    const Mat conv = conv1d_forward(hhat_window, params_.mat("attn.conv.weight"),
                                    params_.tensor("attn.conv.bias"));
    f.tanh_out = tanh_forward(conv);
    f.attn = softmax_over_time(f.tanh_out);
    return f;
}

Mat AttentionBlock::attention_map(const Mat& hhat_window) const {
    return forward(hhat_window).attn;
}

void AttentionBlock::backward(const Mat& hhat_window, const Forward& f, const Mat& gA,
                              std::vector<double>& grads) const {
    const Mat gtanh = softmax_over_time_backward(f.attn, gA);
    const Mat gconv = tanh_backward(f.tanh_out, gtanh);
    const auto& wspec = params_.spec("attn.conv.weight");
    const auto& bspec = params_.spec("attn.conv.bias");
    MatView gK{grads.data() + wspec.offset, wspec.shape[0], wspec.shape[1]};
    conv1d_backward(hhat_window, params_.mat("attn.conv.weight"), gconv, gK,
                    grads.data() + bspec.offset, nullptr);
}

Mat modulate(const Mat& X, const Mat& A, double gamma) {
    if (!X.same_shape(A)) throw ShapeMismatch("modulate operands");
    if (gamma < 0.0 || gamma > 1.0) throw UsageError("gamma must lie in [0,1]");
    if (gamma == 0.0) return X; // exact identity, bit for bit
    Mat out(X.rows(), X.cols());
    for (std::size_t i = 0; i < X.size(); ++i)
        out.data()[i] = X.data()[i] * (1.0 + gamma * A.data()[i]);
    return out;
}

// ---- backbone ------------------------------------------------------------------

DLinearBackbone DLinearBackbone::create(std::size_t L, std::size_t h, std::size_t ma_window,
                                        std::uint64_t seed) {
    if (ma_window % 2 == 0) throw UsageError("backbone moving-average window must be odd");
    DLinearBackbone b;
    b.L_ = L;
    b.h_ = h;
    b.m_ = ma_window;
    auto rng = make_rng(seed, "stage2.backbone.init");
    double* tw = b.params_.add_tensor("trend.weight", {h, L});
    init_uniform(tw, h * L, L, rng);
    b.params_.add_tensor("trend.bias", {h});
    double* rw = b.params_.add_tensor("rem.weight", {h, L});
    init_uniform(rw, h * L, L, rng);
    b.params_.add_tensor("rem.bias", {h});
    return b;
}

DLinearBackbone::Forward DLinearBackbone::forward(const Mat& x) const {
    if (x.cols() != L_) throw ShapeMismatch("backbone lookback L=" + std::to_string(L_) +
                                            ", window has " + std::to_string(x.cols()));
    Forward f;
    f.trend_in = moving_average_replicate(x, m_);
    f.rem_in = Mat(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i)
        f.rem_in.data()[i] = x.data()[i] - f.trend_in.data()[i];

    // heads are channel-shared: treat time as the input axis, channels as batch
    const Mat yt = affine_forward(params_.mat("trend.weight"), params_.tensor("trend.bias"),
                                  transpose(f.trend_in));
    const Mat yr = affine_forward(params_.mat("rem.weight"), params_.tensor("rem.bias"),
                                  transpose(f.rem_in));
    Mat sum(yt.rows(), yt.cols());
    for (std::size_t i = 0; i < yt.size(); ++i) sum.data()[i] = yt.data()[i] + yr.data()[i];
    f.pred = transpose(sum);
    return f;
}

Mat DLinearBackbone::forecast(const Mat& x) const { return forward(x).pred; }

void DLinearBackbone::backward(const Forward& f, const Mat& gpred, std::vector<double>& grads,
                               Mat* gx) const {
    const Mat gy = transpose(gpred); // [h][D]
    const auto& tw = params_.spec("trend.weight");
    const auto& tb = params_.spec("trend.bias");
    const auto& rw = params_.spec("rem.weight");
    const auto& rb = params_.spec("rem.bias");

    const Mat trend_in_t = transpose(f.trend_in); // [L][D]
    const Mat rem_in_t = transpose(f.rem_in);

    Mat g_trend_t(trend_in_t.rows(), trend_in_t.cols(), 0.0);
    Mat g_rem_t(rem_in_t.rows(), rem_in_t.cols(), 0.0);
    affine_backward(params_.mat("trend.weight"), trend_in_t, gy,
                    MatView{grads.data() + tw.offset, tw.shape[0], tw.shape[1]},
                    grads.data() + tb.offset, &g_trend_t);
    affine_backward(params_.mat("rem.weight"), rem_in_t, gy,
                    MatView{grads.data() + rw.offset, rw.shape[0], rw.shape[1]},
                    grads.data() + rb.offset, &g_rem_t);

    if (gx) {
        // x feeds the remainder branch directly and both branches through the
        // moving average: gx = g_rem + ma_adj(g_trend - g_rem).
        const Mat g_trend = transpose(g_trend_t);
        const Mat g_rem = transpose(g_rem_t);
        if (!gx->same_shape(g_rem)) throw ShapeMismatch("backbone backward gx");
        Mat diff(g_trend.rows(), g_trend.cols());
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff.data()[i] = g_trend.data()[i] - g_rem.data()[i];
        for (std::size_t i = 0; i < gx->size(); ++i) gx->data()[i] += g_rem.data()[i];
        moving_average_replicate_backward(diff, m_, *gx);
    }
}

// ---- training --------------------------------------------------------------------

void Stage2Config::validate() const {
    if (gamma < 0.0 || gamma > 1.0) throw UsageError("gamma must lie in [0,1]");
    if (lr <= 0.0) throw UsageError("stage 2 learning rate must be positive");
    if (epochs < 1) throw UsageError("stage 2 needs at least 1 epoch");
    if (L < 1 || h < 1) throw UsageError("L and h must be positive");
    if (kernel % 2 == 0) throw UsageError("attention kernel size must be odd");
    if (ma_window % 2 == 0) throw UsageError("backbone moving-average window must be odd");
}

namespace {

// Residual of the lookback window itself, through the frozen extractor.
Mat window_factor(const Mat& x_window, const ExtractorModel& extractor,
                  const DecompConfig& decomp) {
    const Decomposition d = decompose(x_window, decomp);
    return extractor.extract(d.residual);
}

struct Precomputed {
    std::vector<Mat> hhat; // per window
};

Precomputed precompute_factors(const std::vector<WindowPair>& windows,
                               const ExtractorModel& extractor, const DecompConfig& decomp) {
    Precomputed p;
    p.hhat.reserve(windows.size());
    for (const auto& w : windows) p.hhat.push_back(window_factor(w.input, extractor, decomp));
    return p;
}

} // namespace

Stage2Result train_stage2(const std::vector<WindowPair>& train_windows,
                          const std::vector<WindowPair>& val_windows,
                          const ExtractorModel& extractor, const DecompConfig& decomp,
                          const Stage2Config& cfg) {
    cfg.validate();
    if (train_windows.empty()) throw EmptyTestSet();
    const std::size_t D = train_windows.front().input.rows();
    const std::uint64_t extractor_hash_before = extractor.params().content_hash();

    const bool attend = cfg.use_attention && cfg.gamma > 0.0;

    Stage2Result res;
    res.attention = AttentionBlock::create(D, cfg.kernel, cfg.seed);
    res.backbone = DLinearBackbone::create(cfg.L, cfg.h, cfg.ma_window, cfg.seed);

    Precomputed train_pre, val_pre;
    if (attend) {
        train_pre = precompute_factors(train_windows, extractor, decomp);
        val_pre = precompute_factors(val_windows, extractor, decomp);
    }

    SgdOptimizer opt_backbone(res.backbone.params().size(), cfg.lr, cfg.momentum);
    SgdOptimizer opt_attn(res.attention.params().size(), cfg.lr, cfg.momentum);
    std::vector<double> g_backbone(res.backbone.params().size());
    std::vector<double> g_attn(res.attention.params().size());

    auto rng_shuffle = make_rng(cfg.seed, "stage2.shuffle");
    std::vector<std::size_t> order(train_windows.size());
    std::iota(order.begin(), order.end(), 0);

    auto eval_loss = [&](const std::vector<WindowPair>& windows, const Precomputed& pre) {
        if (windows.empty()) return 0.0;
        double acc = 0.0;
        for (std::size_t i = 0; i < windows.size(); ++i) {
            Mat x = windows[i].input;
            if (attend) {
                const Mat A = res.attention.attention_map(pre.hhat[i]);
                x = modulate(x, A, cfg.gamma);
            }
            acc += mse(res.backbone.forecast(x), windows[i].target);
        }
        return acc / static_cast<double>(windows.size());
    };

    std::vector<double> best_backbone = res.backbone.params().params();
    std::vector<double> best_attn = res.attention.params().params();
    double best_val = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng_shuffle);
        double train_acc = 0.0;
        for (std::size_t idx : order) {
            const WindowPair& w = train_windows[idx];
            std::fill(g_backbone.begin(), g_backbone.end(), 0.0);

            AttentionBlock::Forward af;
            Mat x = w.input;
            if (attend) {
                af = res.attention.forward(train_pre.hhat[idx]);
                x = modulate(w.input, af.attn, cfg.gamma);
            }
            const DLinearBackbone::Forward bf = res.backbone.forward(x);
            train_acc += mse(bf.pred, w.target);
            const Mat gpred = mse_backward(bf.pred, w.target);

            if (attend) {
                Mat gx(x.rows(), x.cols(), 0.0);
                res.backbone.backward(bf, gpred, g_backbone, &gx);
                // X~ = X (1 + gamma A): dX~/dA = gamma * X
                Mat gA(x.rows(), x.cols());
                for (std::size_t i = 0; i < gA.size(); ++i)
                    gA.data()[i] = cfg.gamma * w.input.data()[i] * gx.data()[i];
                std::fill(g_attn.begin(), g_attn.end(), 0.0);
                res.attention.backward(train_pre.hhat[idx], af, gA, g_attn);
                opt_attn.step(res.attention.params().params(), g_attn);
            } else {
                res.backbone.backward(bf, gpred, g_backbone, nullptr);
            }
            opt_backbone.step(res.backbone.params().params(), g_backbone);
        }
        res.train_curve.push_back(train_acc / static_cast<double>(train_windows.size()));
        if (!std::isfinite(res.train_curve.back()))
            throw NumericalError("stage 2 loss diverged at epoch " + std::to_string(epoch) +
                                 "; lower stage2.lr");

        const double val = val_windows.empty() ? res.train_curve.back()
                                               : eval_loss(val_windows, val_pre);
        res.val_curve.push_back(val);
        if (val < best_val) {
            best_val = val;
            best_epoch = epoch;
            best_backbone = res.backbone.params().params();
            best_attn = res.attention.params().params();
            since_best = 0;
        } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
            break;
        }
    }

    res.backbone.params().params() = best_backbone;
    res.attention.params().params() = best_attn;
    res.best_epoch = best_epoch;
    res.best_val_mse = best_val;

    if (extractor.params().content_hash() != extractor_hash_before)
        throw Error("frozen extractor changed during stage 2");
    return res;
}

Mat forecast_window(const Mat& x_window, const ExtractorModel& extractor,
                    const AttentionBlock* attention, const DLinearBackbone& backbone,
                    const DecompConfig& decomp, double gamma, bool use_attention) {
    Mat x = x_window;
    if (use_attention && gamma > 0.0) {
        if (!attention) throw UsageError("attention block required when gamma > 0");
        const Mat hhat = window_factor(x_window, extractor, decomp);
        x = modulate(x_window, attention->attention_map(hhat), gamma);
    }
    return backbone.forecast(x);
}

Metrics evaluate(const std::vector<WindowPair>& windows, const ExtractorModel& extractor,
                 const AttentionBlock* attention, const DLinearBackbone& backbone,
                 const DecompConfig& decomp, double gamma, bool use_attention) {
    if (windows.empty()) throw EmptyTestSet();
    Metrics m;
    for (const auto& w : windows) {
        const Mat pred =
            forecast_window(w.input, extractor, attention, backbone, decomp, gamma, use_attention);
        m.mse += mse(pred, w.target);
        m.mae += mae(pred, w.target);
    }
    m.mse /= static_cast<double>(windows.size());
    m.mae /= static_cast<double>(windows.size());
    return m;
}

void dump_predictions_csv(const std::vector<WindowPair>& windows,
                          const std::vector<Mat>& predictions,
                          const std::vector<std::string>& names, const std::string& path) {
    if (windows.size() != predictions.size()) throw ShapeMismatch("windows vs predictions");
    std::ofstream out(path);
    if (!out) throw Error("cannot write predictions: " + path);
    out.precision(17);
    out << "window,variable,step,prediction,target\n";
    for (std::size_t w = 0; w < windows.size(); ++w)
        for (std::size_t d = 0; d < predictions[w].rows(); ++d)
            for (std::size_t s = 0; s < predictions[w].cols(); ++s)
                out << w << ',' << (d < names.size() ? names[d] : "v" + std::to_string(d)) << ','
                    << s << ',' << predictions[w](d, s) << ',' << windows[w].target(d, s) << '\n';
}

// ---- bundle ---------------------------------------------------------------------

void save_bundle(const ModelBundle& b, const std::string& path) {
    ParamModule out;
    auto copy_in = [&](const ParamModule& src) {
        for (const auto& spec : src.tensors()) {
            double* dst = out.add_tensor(spec.name, spec.shape);
            std::copy(src.params().begin() + static_cast<long>(spec.offset),
                      src.params().begin() + static_cast<long>(spec.offset + spec.size), dst);
        }
    };
    copy_in(b.attention.params());
    copy_in(b.backbone.params());
    double* meta = out.add_tensor("bundle.meta", {8});
    meta[0] = b.gamma;
    meta[1] = b.use_attention ? 1.0 : 0.0;
    meta[2] = static_cast<double>(b.attention.kernel());
    meta[3] = static_cast<double>(b.backbone.lookback());
    meta[4] = static_cast<double>(b.backbone.horizon());
    meta[5] = static_cast<double>(b.backbone.ma_window());
    std::memcpy(&meta[6], &b.extractor_hash, sizeof(b.extractor_hash));
    meta[7] = 0.0;
    out.save(path);
}

ModelBundle load_bundle(const std::string& path) {
    const ParamModule in = ParamModule::load(path);
    if (!in.has("bundle.meta")) throw CorruptCheckpoint("bundle meta missing in " + path);
    const double* meta = in.tensor("bundle.meta");
    ModelBundle b;
    b.gamma = meta[0];
    b.use_attention = meta[1] != 0.0;
    const auto kernel = static_cast<std::size_t>(meta[2]);
    const auto L = static_cast<std::size_t>(meta[3]);
    const auto h = static_cast<std::size_t>(meta[4]);
    const auto m = static_cast<std::size_t>(meta[5]);
    std::memcpy(&b.extractor_hash, &meta[6], sizeof(b.extractor_hash));

    const auto& conv = in.spec("attn.conv.weight");
    b.attention = AttentionBlock::create(conv.shape[0], kernel, 0);
    b.backbone = DLinearBackbone::create(L, h, m, 0);
    auto copy_out = [&](ParamModule& dst) {
        for (const auto& spec : dst.tensors()) {
            const auto& src_spec = in.spec(spec.name);
            if (src_spec.size != spec.size)
                throw VersionMismatch("bundle tensor " + spec.name + " has size " +
                                      std::to_string(src_spec.size) + ", expected " +
                                      std::to_string(spec.size));
            std::copy(in.params().begin() + static_cast<long>(src_spec.offset),
                      in.params().begin() + static_cast<long>(src_spec.offset + src_spec.size),
                      dst.params().begin() + static_cast<long>(spec.offset));
        }
    };
    copy_out(b.attention.params());
    copy_out(b.backbone.params());
    return b;
}

} // namespace hints

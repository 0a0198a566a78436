#include "hints/stage1.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include "hints/errors.hpp"
#include "hints/rng.hpp"

namespace hints {

namespace {
constexpr const char* kWeight = "f.weight";
constexpr const char* kBias = "f.bias";
constexpr const char* kMeta = "meta"; // {D, per_variable}
} // namespace

ExtractorModel ExtractorModel::create(std::size_t D, bool per_variable, std::uint64_t seed) {
    ExtractorModel m;
    m.per_variable_ = per_variable;
    m.dims_ = D;
    const std::size_t n = per_variable ? D : 1;
    auto rng = make_rng(seed, "stage1.init");
    double* w = m.params_.add_tensor(kWeight, {n});
    init_uniform(w, n, 1, rng);
    m.params_.add_tensor(kBias, {n}); // zeros
    double* meta = m.params_.add_tensor(kMeta, {2});
    meta[0] = static_cast<double>(D);
    meta[1] = per_variable ? 1.0 : 0.0;
    return m;
}

ExtractorModel ExtractorModel::identity(std::size_t D, bool per_variable) {
    ExtractorModel m = create(D, per_variable, 0);
    double* w = m.params_.tensor(kWeight);
    double* b = m.params_.tensor(kBias);
    const std::size_t n = per_variable ? D : 1;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = 1.0;
        b[i] = 0.0;
    }
    return m;
}

Mat ExtractorModel::extract(const Mat& residuals) const {
    if (per_variable_ && residuals.rows() != dims_)
        throw ShapeMismatch("extractor built for D=" + std::to_string(dims_) + ", got D=" +
                            std::to_string(residuals.rows()));
    const double* w = params_.tensor(kWeight);
    const double* b = params_.tensor(kBias);
    Mat out(residuals.rows(), residuals.cols());
    for (std::size_t d = 0; d < residuals.rows(); ++d) {
        const double a = per_variable_ ? w[d] : w[0];
        const double bb = per_variable_ ? b[d] : b[0];
        const double* r = residuals.row(d);
        double* o = out.row(d);
        for (std::size_t t = 0; t < residuals.cols(); ++t) o[t] = a * r[t] + bb;
    }
    return out;
}

void ExtractorModel::save(const std::string& path) const { params_.save(path); }

ExtractorModel ExtractorModel::load(const std::string& path, std::size_t expected_D) {
    ParamModule p = ParamModule::load(path);
    if (!p.has(kWeight) || !p.has(kBias) || !p.has(kMeta))
        throw CorruptCheckpoint("extractor tensors missing in " + path);
    ExtractorModel m;
    const double* meta = p.tensor(kMeta);
    m.dims_ = static_cast<std::size_t>(meta[0]);
    m.per_variable_ = meta[1] != 0.0;
    if (m.per_variable_ && m.dims_ != expected_D)
        throw VersionMismatch("extractor checkpoint D=" + std::to_string(m.dims_) +
                              ", data has D=" + std::to_string(expected_D));
    const std::size_t n = m.per_variable_ ? m.dims_ : 1;
    if (p.spec(kWeight).size != n || p.spec(kBias).size != n)
        throw VersionMismatch("extractor tensor sizes disagree with meta (weight size " +
                              std::to_string(p.spec(kWeight).size) + ", expected " +
                              std::to_string(n) + ")");
    m.dims_ = expected_D; // shared models adopt the data's D
    m.params_ = std::move(p);
    return m;
}

double fj_loss(const Mat& Hhat, const Mat& residuals, const InfluenceMatrix& w,
               const FjConfig& cfg, bool sum_reduction) {
    if (!Hhat.same_shape(residuals)) throw ShapeMismatch("fj_loss operands");
    const Mat H = expected_human_factor_series(residuals, Hhat, w, cfg);
    const std::size_t D = residuals.rows();
    const std::size_t T = residuals.cols();
    double acc = 0.0;
    for (std::size_t d = 0; d < D; ++d)
        for (std::size_t t = 1; t < T; ++t) {
            const double e = Hhat(d, t) - H(d, t);
            acc += e * e;
        }
    if (sum_reduction) return acc;
    return acc / static_cast<double>(D * (T - 1));
}

Stage1Result train_stage1(const Mat& R, const Stage1Config& cfg) {
    cfg.fj.validate();
    const std::size_t D = R.rows();
    const std::size_t T = R.cols();
    if (T < 3) throw UsageError("stage 1 needs at least 3 time steps");
    if (cfg.epochs < 1) throw UsageError("stage 1 needs at least 1 epoch");

    Stage1Result res;
    res.influence = build_influence_matrix(R);
    res.model = ExtractorModel::create(D, cfg.per_variable, cfg.seed);

    ParamModule& pm = res.model.params();
    const std::size_t n_param = cfg.per_variable ? D : 1;
    const std::size_t w_off = pm.spec("f.weight").offset;
    const std::size_t b_off = pm.spec("f.bias").offset;

    SgdOptimizer opt(pm.size(), cfg.lr, cfg.momentum);
    std::vector<double> grads(pm.size(), 0.0);

    const double norm = cfg.sum_reduction ? 1.0 : 1.0 / static_cast<double>(D * (T - 1));
    const double one_minus_lambda = 1.0 - cfg.fj.lambda;

    res.loss_curve.reserve(cfg.epochs + 1);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const Mat Hhat = res.model.extract(R);
        const Mat H = expected_human_factor_series(R, Hhat, res.influence, cfg.fj);

        double loss = 0.0;
        Mat gH(D, T, 0.0); // dLoss/dHhat
        for (std::size_t d = 0; d < D; ++d)
            for (std::size_t t = 1; t < T; ++t) {
                const double e = Hhat(d, t) - H(d, t);
                loss += e * e;
                gH(d, t) += 2.0 * norm * e;
            }
        loss *= norm;
        if (!std::isfinite(loss))
            throw NumericalError("stage 1 loss diverged at epoch " + std::to_string(epoch) +
                                 "; lower stage1.lr");
        res.loss_curve.push_back(loss);

        if (!cfg.target_detached) {
            // The target H(i,t) contains Hhat(j,t-1); flow gradients through it.
            for (std::size_t t = 1; t < T; ++t)
                for (std::size_t i = 0; i < D; ++i) {
                    const double up = -2.0 * norm * (Hhat(i, t) - H(i, t));
                    for (std::size_t j = 0; j < D; ++j) {
                        double dH = cfg.fj.beta * res.influence.w(i, j) * one_minus_lambda;
                        if (i == j) dH += cfg.fj.delta * one_minus_lambda;
                        gH(j, t - 1) += up * dH;
                    }
                }
        }

        std::fill(grads.begin(), grads.end(), 0.0);
        for (std::size_t d = 0; d < D; ++d) {
            const std::size_t slot = cfg.per_variable ? d : 0;
            const double* r = R.row(d);
            const double* g = gH.row(d);
            double gw = 0.0, gb = 0.0;
            for (std::size_t t = 0; t < T; ++t) {
                gw += g[t] * r[t];
                gb += g[t];
            }
            grads[w_off + slot] += gw;
            grads[b_off + slot] += gb;
        }
        (void)n_param;
        opt.step(pm.params(), grads);
    }

    {
        const Mat Hhat = res.model.extract(R);
        res.loss_curve.push_back(fj_loss(Hhat, R, res.influence, cfg.fj, cfg.sum_reduction));
    }

    // Monitor: epoch-averaged windows of width 5 should be non-increasing.
    const std::size_t width = 5;
    double prev = 0.0;
    bool have_prev = false;
    for (std::size_t i = 0; i + width <= res.loss_curve.size(); i += width) {
        double m = 0.0;
        for (std::size_t j = 0; j < width; ++j) m += res.loss_curve[i + j];
        m /= static_cast<double>(width);
        if (have_prev && m > prev * (1.0 + 1e-9)) {
            res.monotone_warning = true;
            break;
        }
        prev = m;
        have_prev = true;
    }
    if (res.monotone_warning)
        std::cerr << "[stage1] warning: loss curve not non-increasing over width-5 windows\n";
    return res;
}

void save_loss_curve_csv(const std::vector<double>& curve, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write loss curve: " + path);
    out.precision(17);
    out << "epoch,loss\n";
    for (std::size_t i = 0; i < curve.size(); ++i) out << i << ',' << curve[i] << '\n';
}

} // namespace hints

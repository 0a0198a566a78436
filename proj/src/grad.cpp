#include "hints/grad.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "hints/errors.hpp"

namespace hints {

// ---- ParamModule ----------------------------------------------------------------

double* ParamModule::add_tensor(const std::string& name, std::vector<std::size_t> shape) {
    if (has(name)) throw Error("duplicate tensor: " + name);
    TensorSpec spec;
    spec.name = name;
    spec.shape = std::move(shape);
    spec.size = 1;
    for (std::size_t s : spec.shape) spec.size *= s;
    spec.offset = params_.size();
    params_.resize(params_.size() + spec.size, 0.0);
    specs_.push_back(std::move(spec));
    return params_.data() + specs_.back().offset;
}

bool ParamModule::has(const std::string& name) const {
    for (const auto& s : specs_)
        if (s.name == name) return true;
    return false;
}

const TensorSpec& ParamModule::spec(const std::string& name) const {
    for (const auto& s : specs_)
        if (s.name == name) return s;
    throw Error("unknown tensor: " + name);
}

double* ParamModule::tensor(const std::string& name) { return params_.data() + spec(name).offset; }
const double* ParamModule::tensor(const std::string& name) const {
    return params_.data() + spec(name).offset;
}

MatView ParamModule::mat(const std::string& name) {
    const auto& s = spec(name);
    if (s.shape.size() != 2) throw ShapeMismatch("tensor " + name + " is not 2-D");
    return {params_.data() + s.offset, s.shape[0], s.shape[1]};
}

CMatView ParamModule::mat(const std::string& name) const {
    const auto& s = spec(name);
    if (s.shape.size() != 2) throw ShapeMismatch("tensor " + name + " is not 2-D");
    return {params_.data() + s.offset, s.shape[0], s.shape[1]};
}

std::uint64_t ParamModule::content_hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    for (double v : params_) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xFF;
            h *= 1099511628211ULL;
        }
    }
    return h;
}

namespace {

std::uint64_t fnv_bytes(const void* data, std::size_t n, std::uint64_t h = 1469598103934665603ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace

void ParamModule::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path);
    out << "HINTSCKPT 1\n";
    out << "tensors " << specs_.size() << "\n";
    for (const auto& s : specs_) {
        out << "tensor " << s.name << " " << s.shape.size();
        for (std::size_t d : s.shape) out << " " << d;
        out << "\n";
    }
    out << "data\n";
    // Raw little-endian doubles (this library targets little-endian hosts).
    out.write(reinterpret_cast<const char*>(params_.data()),
              static_cast<std::streamsize>(params_.size() * sizeof(double)));
    const std::uint64_t checksum = fnv_bytes(params_.data(), params_.size() * sizeof(double));
    out.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
    if (!out) throw Error("short write on checkpoint: " + path);
}

ParamModule ParamModule::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorruptCheckpoint("cannot open " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "HINTSCKPT") throw CorruptCheckpoint("bad magic in " + path);
    if (version != 1) throw VersionMismatch("checkpoint format version " + std::to_string(version) +
                                            ", expected 1");
    std::string kw;
    std::size_t count = 0;
    in >> kw >> count;
    if (kw != "tensors") throw CorruptCheckpoint("missing tensor count");

    ParamModule m;
    for (std::size_t i = 0; i < count; ++i) {
        std::string name;
        std::size_t ndim = 0;
        in >> kw >> name >> ndim;
        if (kw != "tensor" || !in) throw CorruptCheckpoint("bad tensor header");
        std::vector<std::size_t> shape(ndim);
        for (auto& d : shape) in >> d;
        if (!in) throw CorruptCheckpoint("bad tensor shape");
        m.add_tensor(name, std::move(shape));
    }
    in >> kw;
    if (kw != "data") throw CorruptCheckpoint("missing data section");
    in.get(); // newline after "data"
    in.read(reinterpret_cast<char*>(m.params_.data()),
            static_cast<std::streamsize>(m.params_.size() * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(m.params_.size() * sizeof(double)))
        throw CorruptCheckpoint("truncated parameter payload");
    std::uint64_t stored = 0;
    in.read(reinterpret_cast<char*>(&stored), sizeof(stored));
    if (in.gcount() != sizeof(stored)) throw CorruptCheckpoint("missing checksum");
    if (stored != fnv_bytes(m.params_.data(), m.params_.size() * sizeof(double)))
        throw CorruptCheckpoint("checksum mismatch");
    return m;
}

void init_uniform(double* p, std::size_t n, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, fan_in)));
    for (std::size_t i = 0; i < n; ++i) p[i] = uniform(rng, -bound, bound);
}

// ---- blocks --------------------------------------------------------------------

Mat affine_forward(CMatView W, const double* b, const Mat& x) {
    if (W.cols != x.rows()) throw ShapeMismatch("affine: W cols != x rows");
    Mat y(W.rows, x.cols());
    for (std::size_t o = 0; o < W.rows; ++o) {
        double* yo = y.row(o);
        for (std::size_t n = 0; n < x.cols(); ++n) yo[n] = b ? b[o] : 0.0;
        for (std::size_t i = 0; i < W.cols; ++i) {
            const double w = W(o, i);
            const double* xi = x.row(i);
            for (std::size_t n = 0; n < x.cols(); ++n) yo[n] += w * xi[n];
        }
    }
    return y;
}

void affine_backward(CMatView W, const Mat& x, const Mat& gy, MatView gW, double* gb, Mat* gx) {
    if (gy.rows() != W.rows || gy.cols() != x.cols()) throw ShapeMismatch("affine backward");
    for (std::size_t o = 0; o < W.rows; ++o) {
        const double* g = gy.row(o);
        if (gb) {
            double acc = 0.0;
            for (std::size_t n = 0; n < gy.cols(); ++n) acc += g[n];
            gb[o] += acc;
        }
        for (std::size_t i = 0; i < W.cols; ++i) {
            const double* xi = x.row(i);
            double acc = 0.0;
            for (std::size_t n = 0; n < gy.cols(); ++n) acc += g[n] * xi[n];
            gW(o, i) += acc;
        }
    }
    if (gx) {
        if (!gx->same_shape(x)) throw ShapeMismatch("affine backward gx");
        for (std::size_t i = 0; i < W.cols; ++i) {
            double* gxi = gx->row(i);
            for (std::size_t o = 0; o < W.rows; ++o) {
                const double w = W(o, i);
                const double* g = gy.row(o);
                for (std::size_t n = 0; n < gy.cols(); ++n) gxi[n] += w * g[n];
            }
        }
    }
}

Mat conv1d_forward(const Mat& x, CMatView kernel, const double* bias) {
    if (kernel.rows != x.rows()) throw ShapeMismatch("conv1d: kernel rows != channels");
    const std::size_t k = kernel.cols;
    if (k % 2 == 0) throw UsageError("conv1d kernel size must be odd");
    const std::size_t T = x.cols();
    const long half = static_cast<long>(k / 2);
    Mat y(x.rows(), T);
    for (std::size_t d = 0; d < x.rows(); ++d) {
        const double* xd = x.row(d);
        double* yd = y.row(d);
        for (long t = 0; t < static_cast<long>(T); ++t) {
            double acc = bias ? bias[d] : 0.0;
            for (long j = -half; j <= half; ++j) {
                const long src = t + j;
                if (src < 0 || src >= static_cast<long>(T)) continue;
                acc += kernel(d, static_cast<std::size_t>(j + half)) * xd[src];
            }
            yd[t] = acc;
        }
    }
    return y;
}

void conv1d_backward(const Mat& x, CMatView kernel, const Mat& gy, MatView gK, double* gbias,
                     Mat* gx) {
    if (!gy.same_shape(x)) throw ShapeMismatch("conv1d backward");
    const std::size_t k = kernel.cols;
    const long half = static_cast<long>(k / 2);
    const long T = static_cast<long>(x.cols());
    for (std::size_t d = 0; d < x.rows(); ++d) {
        const double* xd = x.row(d);
        const double* g = gy.row(d);
        if (gbias) {
            double acc = 0.0;
            for (long t = 0; t < T; ++t) acc += g[t];
            gbias[d] += acc;
        }
        for (long j = -half; j <= half; ++j) {
            double acc = 0.0;
            for (long t = 0; t < T; ++t) {
                const long src = t + j;
                if (src < 0 || src >= T) continue;
                acc += g[t] * xd[src];
            }
            gK(d, static_cast<std::size_t>(j + half)) += acc;
        }
        if (gx) {
            double* gxd = gx->row(d);
            for (long t = 0; t < T; ++t) {
                for (long j = -half; j <= half; ++j) {
                    const long src = t + j;
                    if (src < 0 || src >= T) continue;
                    gxd[src] += kernel(d, static_cast<std::size_t>(j + half)) * g[t];
                }
            }
        }
    }
}

Mat tanh_forward(const Mat& x) {
    Mat y(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = std::tanh(x.data()[i]);
    return y;
}

Mat tanh_backward(const Mat& y, const Mat& gy) {
    if (!y.same_shape(gy)) throw ShapeMismatch("tanh backward");
    Mat gx(y.rows(), y.cols());
    for (std::size_t i = 0; i < y.size(); ++i)
        gx.data()[i] = gy.data()[i] * (1.0 - y.data()[i] * y.data()[i]);
    return gx;
}

Mat softmax_over_time(const Mat& x) {
    Mat y(x.rows(), x.cols());
    for (std::size_t d = 0; d < x.rows(); ++d) {
        const double* xd = x.row(d);
        double* yd = y.row(d);
        double mx = xd[0];
        for (std::size_t t = 1; t < x.cols(); ++t) mx = std::max(mx, xd[t]);
        double sum = 0.0;
        for (std::size_t t = 0; t < x.cols(); ++t) {
            yd[t] = std::exp(xd[t] - mx);
            sum += yd[t];
        }
        for (std::size_t t = 0; t < x.cols(); ++t) yd[t] /= sum;
    }
    return y;
}

Mat softmax_over_time_backward(const Mat& y, const Mat& gy) {
    if (!y.same_shape(gy)) throw ShapeMismatch("softmax backward");
    Mat gx(y.rows(), y.cols());
    for (std::size_t d = 0; d < y.rows(); ++d) {
        const double* yd = y.row(d);
        const double* g = gy.row(d);
        double dot = 0.0;
        for (std::size_t t = 0; t < y.cols(); ++t) dot += g[t] * yd[t];
        double* gxd = gx.row(d);
        for (std::size_t t = 0; t < y.cols(); ++t) gxd[t] = yd[t] * (g[t] - dot);
    }
    return gx;
}

Mat moving_average_replicate(const Mat& x, std::size_t m) {
    if (m % 2 == 0) throw UsageError("moving-average window must be odd");
    const long half = static_cast<long>(m / 2);
    const long T = static_cast<long>(x.cols());
    Mat y(x.rows(), x.cols());
    for (std::size_t d = 0; d < x.rows(); ++d) {
        const double* xd = x.row(d);
        double* yd = y.row(d);
        for (long t = 0; t < T; ++t) {
            double acc = 0.0;
            for (long j = -half; j <= half; ++j)
                acc += xd[std::clamp<long>(t + j, 0, T - 1)];
            yd[t] = acc / static_cast<double>(m);
        }
    }
    return y;
}

void moving_average_replicate_backward(const Mat& gy, std::size_t m, Mat& gx_accum) {
    if (!gy.same_shape(gx_accum)) throw ShapeMismatch("moving-average backward");
    const long half = static_cast<long>(m / 2);
    const long T = static_cast<long>(gy.cols());
    const double inv = 1.0 / static_cast<double>(m);
    for (std::size_t d = 0; d < gy.rows(); ++d) {
        const double* g = gy.row(d);
        double* gx = gx_accum.row(d);
        for (long t = 0; t < T; ++t)
            for (long j = -half; j <= half; ++j)
                gx[std::clamp<long>(t + j, 0, T - 1)] += g[t] * inv;
    }
}

double mse(const Mat& pred, const Mat& target) {
    if (!pred.same_shape(target)) throw ShapeMismatch("mse operands");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred.data()[i] - target.data()[i];
        acc += d * d;
    }
    return acc / static_cast<double>(pred.size());
}

Mat mse_backward(const Mat& pred, const Mat& target) {
    if (!pred.same_shape(target)) throw ShapeMismatch("mse operands");
    Mat g(pred.rows(), pred.cols());
    const double scale = 2.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i)
        g.data()[i] = scale * (pred.data()[i] - target.data()[i]);
    return g;
}

double mae(const Mat& pred, const Mat& target) {
    if (!pred.same_shape(target)) throw ShapeMismatch("mae operands");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        acc += std::abs(pred.data()[i] - target.data()[i]);
    return acc / static_cast<double>(pred.size());
}

// ---- optimizer -----------------------------------------------------------------

SgdOptimizer::SgdOptimizer(std::size_t n, double lr, double momentum)
    : lr_(lr), momentum_(momentum), velocity_(n, 0.0) {
    if (lr < 0.0) throw UsageError("learning rate must be nonnegative");
    if (momentum < 0.0 || momentum >= 1.0) throw UsageError("momentum must lie in [0,1)");
}

void SgdOptimizer::step(std::vector<double>& params, const std::vector<double>& grads) {
    if (params.size() != velocity_.size() || grads.size() != velocity_.size())
        throw ShapeMismatch("optimizer state vs parameters");
    if (momentum_ == 0.0) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr_ * grads[i];
        return;
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity_[i] = momentum_ * velocity_[i] + grads[i];
        params[i] -= lr_ * velocity_[i];
    }
}

// ---- gradient check --------------------------------------------------------------

GradReport grad_check(ParamModule& m, const std::function<double()>& loss,
                      const std::vector<double>& analytic, double step) {
    if (analytic.size() != m.size()) throw ShapeMismatch("analytic gradient vs parameters");
    GradReport report;
    report.analytic = analytic;
    report.numeric.resize(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double saved = m.params()[i];
        m.params()[i] = saved + step;
        const double lp = loss();
        m.params()[i] = saved - step;
        const double lm = loss();
        m.params()[i] = saved;
        report.numeric[i] = (lp - lm) / (2.0 * step);
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
        const double a = report.analytic[i];
        const double n = report.numeric[i];
        const double rel = std::abs(a - n) / std::max(1e-8, std::abs(a) + std::abs(n));
        report.max_rel_error = std::max(report.max_rel_error, rel);
    }
    return report;
}

} // namespace hints

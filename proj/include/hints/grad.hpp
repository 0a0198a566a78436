#ifndef HINTS_GRAD_HPP
#define HINTS_GRAD_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hints/mat.hpp"
#include "hints/rng.hpp"

namespace hints {

// ---- parameter storage -------------------------------------------------------

struct TensorSpec {
    std::string name;
    std::vector<std::size_t> shape;
    std::size_t offset = 0;
    std::size_t size = 0;
};

// Mutable / const views of a named tensor interpreted as a row-major matrix.
struct CMatView {
    const double* p = nullptr;
    std::size_t rows = 0, cols = 0;
    double operator()(std::size_t r, std::size_t c) const { return p[r * cols + c]; }
};

struct MatView {
    double* p = nullptr;
    std::size_t rows = 0, cols = 0;
    double& operator()(std::size_t r, std::size_t c) const { return p[r * cols + c]; }
    operator CMatView() const { return {p, rows, cols}; }
};

// Named flat parameter vector with per-tensor shape metadata. The tensor
// set is fixed after construction; forward passes never mutate it.
class ParamModule {
public:
    // Returns the new tensor's storage, zero-filled. The pointer (like any
    // pointer from tensor()/mat()) is invalidated by the next add_tensor.
    double* add_tensor(const std::string& name, std::vector<std::size_t> shape);

    bool has(const std::string& name) const;
    const TensorSpec& spec(const std::string& name) const;

    double* tensor(const std::string& name);
    const double* tensor(const std::string& name) const;

    MatView mat(const std::string& name);
    CMatView mat(const std::string& name) const;

    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }
    std::size_t size() const { return params_.size(); }
    const std::vector<TensorSpec>& tensors() const { return specs_; }

    // FNV-1a over the raw parameter bytes; used for frozen-parameter checks.
    std::uint64_t content_hash() const;

    // Checkpoint: text header with named shapes, then little-endian IEEE-754
    // doubles, then an FNV-1a checksum of the payload. See README for the
    // exact layout. load() throws CorruptCheckpoint / VersionMismatch.
    void save(const std::string& path) const;
    static ParamModule load(const std::string& path);

private:
    std::vector<double> params_;
    std::vector<TensorSpec> specs_;
};

// U(-1/sqrt(fan_in), +1/sqrt(fan_in)) initialization.
void init_uniform(double* p, std::size_t n, std::size_t fan_in, std::mt19937_64& rng);

// ---- differentiable blocks ----------------------------------------------------
// Backward functions ACCUMULATE into the provided gradient buffers (callers
// zero them at the start of each step); gx outputs are optional (nullptr).

// y = W x + b with W [out][in], x [in][n], b [out].
Mat affine_forward(CMatView W, const double* b, const Mat& x);
void affine_backward(CMatView W, const Mat& x, const Mat& gy, MatView gW, double* gb, Mat* gx);

// Depthwise 1-D cross-correlation, zero padding, odd kernel size:
// y_d(t) = sum_j K(d,j) * x_d(t + j - (k-1)/2) + bias_d.
Mat conv1d_forward(const Mat& x, CMatView kernel, const double* bias);
void conv1d_backward(const Mat& x, CMatView kernel, const Mat& gy, MatView gK, double* gbias,
                     Mat* gx);

Mat tanh_forward(const Mat& x);
Mat tanh_backward(const Mat& y, const Mat& gy); // takes the forward output

// Per-row max-shifted softmax over the time axis; rows sum to 1.
Mat softmax_over_time(const Mat& x);
Mat softmax_over_time_backward(const Mat& y, const Mat& gy);

// Moving average over time with edge replication, odd window m;
// the trend splitter of the forecasting backbone.
Mat moving_average_replicate(const Mat& x, std::size_t m);
void moving_average_replicate_backward(const Mat& gy, std::size_t m, Mat& gx_accum);

// Mean of squared elementwise differences.
double mse(const Mat& pred, const Mat& target);
Mat mse_backward(const Mat& pred, const Mat& target);

double mae(const Mat& pred, const Mat& target);

// ---- optimizer -----------------------------------------------------------------

// p <- p - lr * v with v <- momentum * v + g. Plain SGD at momentum 0.
class SgdOptimizer {
public:
    SgdOptimizer(std::size_t n, double lr, double momentum = 0.0);
    void step(std::vector<double>& params, const std::vector<double>& grads);

    double lr() const { return lr_; }

private:
    double lr_;
    double momentum_;
    std::vector<double> velocity_;
};

// ---- finite-difference verification ---------------------------------------------

struct GradReport {
    std::vector<double> analytic;
    std::vector<double> numeric;
    double max_rel_error = 0.0;
};

// Central differences on every parameter of `m`; `loss` re-evaluates the
// forward pass at the current parameters. Relative error is
// |a - n| / max(1e-8, |a| + |n|), max-reduced.
GradReport grad_check(ParamModule& m, const std::function<double()>& loss,
                      const std::vector<double>& analytic, double step = 1e-5);

} // namespace hints

#endif

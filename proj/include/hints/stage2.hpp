#ifndef HINTS_STAGE2_HPP
#define HINTS_STAGE2_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hints/decompose.hpp"
#include "hints/grad.hpp"
#include "hints/mat.hpp"
#include "hints/series.hpp"
#include "hints/stage1.hpp"

namespace hints {

// Depthwise Conv1D (odd kernel, same padding) -> tanh -> softmax over time.
// Each variable's attention row is nonnegative and sums to 1.
class AttentionBlock {
public:
    static AttentionBlock create(std::size_t D, std::size_t kernel, std::uint64_t seed);

    Mat attention_map(const Mat& hhat_window) const;

    struct Forward {
        Mat tanh_out;
        Mat attn;
    };
    Forward forward(const Mat& hhat_window) const;
    // Accumulates parameter gradients (aligned with params()) given dLoss/dA.
    void backward(const Mat& hhat_window, const Forward& f, const Mat& gA,
                  std::vector<double>& grads) const;

    std::size_t kernel() const { return kernel_; }
    std::size_t dims() const { return params_.mat("attn.conv.weight").rows; }
    ParamModule& params() { return params_; }
    const ParamModule& params() const { return params_; }

private:
    ParamModule params_; // attn.conv.weight [D][k], attn.conv.bias [D]
    std::size_t kernel_ = 0;
};

// X~ = X + gamma * (X ⊙ A), elementwise. gamma = 0 returns X bitwise.
Mat modulate(const Mat& X, const Mat& A, double gamma);

// Decomposition-linear backbone: a moving average splits the input into
// trend and remainder, each mapped time-L -> time-h by its own affine head,
// channel-shared; the forecast is the sum.
class DLinearBackbone {
public:
    static DLinearBackbone create(std::size_t L, std::size_t h, std::size_t ma_window,
                                  std::uint64_t seed);

    Mat forecast(const Mat& x_window) const; // [D][L] -> [D][h]

    struct Forward {
        Mat trend_in, rem_in; // [D][L]
        Mat pred;             // [D][h]
    };
    Forward forward(const Mat& x_window) const;
    void backward(const Forward& f, const Mat& gpred, std::vector<double>& grads, Mat* gx) const;

    std::size_t lookback() const { return L_; }
    std::size_t horizon() const { return h_; }
    std::size_t ma_window() const { return m_; }
    ParamModule& params() { return params_; }
    const ParamModule& params() const { return params_; }

private:
    ParamModule params_; // trend.weight [h][L], trend.bias [h], rem.weight, rem.bias
    std::size_t L_ = 0, h_ = 0, m_ = 25;
};

struct Stage2Config {
    double gamma = 0.5;
    double lr = 1e-2; // eta_g, shared by the attention block and the backbone
    std::size_t epochs = 30;
    std::uint64_t seed = 1;
    std::size_t L = 96;
    std::size_t h = 96;
    std::size_t kernel = 5;     // attention conv kernel (odd)
    std::size_t ma_window = 25; // backbone trend split (odd)
    std::size_t patience = 10;  // validation early stop; 0 disables
    double momentum = 0.0;
    bool use_attention = true; // false trains the bare backbone baseline

    void validate() const;
};

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
};

struct Stage2Result {
    AttentionBlock attention; // untrained/unused when use_attention is false
    DLinearBackbone backbone;
    std::vector<double> train_curve, val_curve;
    std::size_t best_epoch = 0;
    double best_val_mse = 0.0;
};

// Lookback residuals are produced by decomposing each window's input with
// `decomp` (no future data enters any window). The frozen extractor maps
// them to Human Factor windows; its parameters are hash-checked before and
// after training. Deterministic per seed: backbone/attention inits and the
// epoch shuffle draw from independent streams derived from cfg.seed, so a
// bare run and a gamma=0 run see bit-identical backbone trajectories.
Stage2Result train_stage2(const std::vector<WindowPair>& train_windows,
                          const std::vector<WindowPair>& val_windows,
                          const ExtractorModel& extractor, const DecompConfig& decomp,
                          const Stage2Config& cfg);

// Forecast one window through the full pipeline (decompose -> extract ->
// attend -> modulate -> backbone). use_attention=false skips modulation.
Mat forecast_window(const Mat& x_window, const ExtractorModel& extractor,
                    const AttentionBlock* attention, const DLinearBackbone& backbone,
                    const DecompConfig& decomp, double gamma, bool use_attention);

// MSE/MAE on the normalized scale: per-window mean, then mean over windows.
// Throws EmptyTestSet on an empty window list.
Metrics evaluate(const std::vector<WindowPair>& windows, const ExtractorModel& extractor,
                 const AttentionBlock* attention, const DLinearBackbone& backbone,
                 const DecompConfig& decomp, double gamma, bool use_attention);

// Per-window prediction dump: window id, variable, step, prediction, target.
void dump_predictions_csv(const std::vector<WindowPair>& windows,
                          const std::vector<Mat>& predictions,
                          const std::vector<std::string>& names, const std::string& path);

// ---- bundle checkpoint -------------------------------------------------------

struct ModelBundle {
    AttentionBlock attention;
    DLinearBackbone backbone;
    double gamma = 0.0;
    bool use_attention = true;
    std::uint64_t extractor_hash = 0; // content hash of the frozen stage-1 model
};

void save_bundle(const ModelBundle& b, const std::string& path);
ModelBundle load_bundle(const std::string& path);

} // namespace hints

#endif

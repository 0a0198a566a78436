#ifndef HINTS_STAGE1_HPP
#define HINTS_STAGE1_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "hints/fj.hpp"
#include "hints/grad.hpp"
#include "hints/mat.hpp"

namespace hints {

// Pointwise affine residual-to-factor map: Hhat_i(t) = a * R_i(t) + b.
// Shared (a, b) across variables by default; per-variable behind a flag.
// No cross-time or cross-variable mixing.
class ExtractorModel {
public:
    static ExtractorModel create(std::size_t D, bool per_variable, std::uint64_t seed);
    // weight 1, bias 0: extract(R) == R. Used when the FJ stage is ablated.
    static ExtractorModel identity(std::size_t D, bool per_variable = false);

    Mat extract(const Mat& residuals) const;

    ParamModule& params() { return params_; }
    const ParamModule& params() const { return params_; }
    bool per_variable() const { return per_variable_; }
    std::size_t dims() const { return dims_; }

    void save(const std::string& path) const;
    // Throws VersionMismatch when the checkpoint was built for a different
    // D (both shapes reported) and CorruptCheckpoint on damage.
    static ExtractorModel load(const std::string& path, std::size_t expected_D);

private:
    ParamModule params_;
    bool per_variable_ = false;
    std::size_t dims_ = 0;
};

struct Stage1Config {
    FjConfig fj;
    double lr = 1e-2;
    std::size_t epochs = 400;
    std::uint64_t seed = 1;
    double momentum = 0.0;
    // Treat the expected trajectory (which contains Hhat(t-1)) as a constant
    // regression target each step; the fully coupled variant is behind this flag.
    bool target_detached = true;
    bool per_variable = false;
    // Paper-style unnormalized sum instead of the mean over D*(T-1) terms.
    bool sum_reduction = false;
};

// Mean (or sum) squared difference between Hhat and the expected Human
// Factor trajectory over t in [1, T-1].
double fj_loss(const Mat& Hhat, const Mat& residuals, const InfluenceMatrix& w,
               const FjConfig& cfg, bool sum_reduction = false);

struct Stage1Result {
    ExtractorModel model;
    InfluenceMatrix influence;
    // loss_curve[e] is the loss at the start of epoch e; a final entry is
    // appended after the last update (size epochs + 1).
    std::vector<double> loss_curve;
    bool monotone_warning = false;
};

// Full-batch gradient descent on the FJ loss over the whole training
// residual sequence. Deterministic for a given seed.
Stage1Result train_stage1(const Mat& residuals_train, const Stage1Config& cfg);

void save_loss_curve_csv(const std::vector<double>& curve, const std::string& path);

} // namespace hints

#endif

#ifndef HINTS_HARNESS_HPP
#define HINTS_HARNESS_HPP

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "hints/config.hpp"
#include "hints/series.hpp"
#include "hints/stage1.hpp"
#include "hints/stage2.hpp"

namespace hints {

// Table-3 row tags. baseline is the bare backbone; no_fj_loss keeps the
// attention pathway but feeds raw residuals (no stage-1 training).
enum class Variant { baseline, hints, no_social, no_memory_bias, no_fj_loss };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

// Removing a term redistributes its coefficient mass proportionally to the
// remaining terms, preserving the convex-combination structure.
FjConfig ablated_fj(const FjConfig& full, Variant v);

struct ExperimentRecord {
    std::string dataset_id;
    std::size_t horizon = 0;
    std::string variant;
    std::uint64_t seed = 0;
    Metrics metrics;
    std::uint64_t config_hash = 0;
    double wall_time_sec = 0.0;
    std::string config_text; // canonical resolved config; makes records re-runnable

    std::string to_json_line() const;
    static ExperimentRecord from_json_line(const std::string& line);
};

// Append-only line-delimited record store with duplicate detection by
// config hash. Single writer; readers see completed lines only.
class RecordStore {
public:
    explicit RecordStore(std::string path);

    bool contains(std::uint64_t hash) const;
    // Returns false (and skips the write) on a duplicate hash unless forced.
    bool append(const ExperimentRecord& r, bool force = false);
    std::vector<ExperimentRecord> all() const;

private:
    std::string path_;
    mutable std::mutex mu_;
    std::vector<std::uint64_t> hashes_;
};

// Dataset prepared once per series: z-scored on the train range, split
// contiguously, train residuals decomposed globally for stage 1.
struct PreparedData {
    MultivariateSeries raw;
    Normalizer normalizer;
    Mat normalized;
    SplitIndices splits;
};

PreparedData prepare_data(const MultivariateSeries& series, const RunConfig& cfg);

// One full (variant, seed, horizon) pipeline run on prepared data. The
// returned record's config_text has variant/seed/h resolved in, so equal
// configs collide and any record re-runs from its own text.
ExperimentRecord run_single(const PreparedData& data, const RunConfig& base, Variant v,
                            std::uint64_t seed, std::size_t horizon);

// Re-run a record from its stored canonical config on the same data.
ExperimentRecord rerun_record(const PreparedData& data, const ExperimentRecord& r);

// ---- experiment structure ----------------------------------------------------

struct ComparisonResult {
    std::vector<ExperimentRecord> records;
    // per horizon, seed-averaged
    std::vector<double> baseline_mse, baseline_mae, hints_mse, hints_mae;
    double imp_avg_mse_pct = 0.0;
    double imp_avg_mae_pct = 0.0;
};

// Imp.(Avg.) arithmetic on horizon-mean metrics: 100 * (mean_b - mean_h) / mean_b.
double improvement_avg_pct(const std::vector<double>& baseline, const std::vector<double>& hints);

// Paired baseline/HINTS runs sharing seed and init for every (h, seed).
ComparisonResult run_comparison(const PreparedData& data, const RunConfig& base,
                                RecordStore* store = nullptr);

struct AblationRow {
    Variant variant;
    double mse_mean = 0.0, mae_mean = 0.0;
    std::vector<ExperimentRecord> records;
};

struct AblationResult {
    std::vector<AblationRow> rows; // full, no_social, no_memory_bias, no_fj_loss
    bool full_is_best_mse = false;
};

AblationResult run_ablation(const PreparedData& data, const RunConfig& base, std::size_t horizon,
                            RecordStore* store = nullptr);

struct SweepPoint {
    double gamma = 0.0;
    double mse_mean = 0.0, mse_min = 0.0, mse_max = 0.0;
    double mae_mean = 0.0, mae_min = 0.0, mae_max = 0.0;
    std::vector<ExperimentRecord> records;
};

std::vector<SweepPoint> run_gamma_sweep(const PreparedData& data, const RunConfig& base,
                                        std::size_t horizon, RecordStore* store = nullptr);

// Plot-data emission, naming convention <dataset>_<experiment>_<h>.csv.
void save_sweep_csv(const std::vector<SweepPoint>& points, const std::string& dataset_id,
                    std::size_t horizon, const std::string& out_dir);
void save_comparison_csv(const ComparisonResult& r, const RunConfig& base,
                         const std::string& out_dir);

// ---- trace ---------------------------------------------------------------------

// Columns (t, value, hhat, attention); value is the raw series, hhat the
// extracted factor of the globally decomposed normalized series, attention
// computed over consecutive non-overlapping lookback windows inside the
// range (softmax rows sum to 1 per window). Throws UnknownVariable.
void export_human_factor_trace(const PreparedData& data, const RunConfig& cfg,
                               const ExtractorModel& extractor, const AttentionBlock& attention,
                               const std::string& variable, IndexRange range,
                               const std::string& path);

} // namespace hints

#endif

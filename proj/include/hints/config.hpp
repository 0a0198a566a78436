#ifndef HINTS_CONFIG_HPP
#define HINTS_CONFIG_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hints/decompose.hpp"
#include "hints/fj.hpp"
#include "hints/series.hpp"
#include "hints/stage1.hpp"
#include "hints/stage2.hpp"

namespace hints {

// Fully resolved run configuration. Every field has a documented default;
// the canonical key=value form is what gets hashed into experiment records
// and what --print-config emits (and that output parses back to the same
// hash).
struct RunConfig {
    // data
    std::string data_path;
    std::string dataset_id = "synthetic";
    std::vector<std::string> columns; // empty = all non-timestamp columns
    char delimiter = ',';
    std::string timestamp_column = "date";

    SplitSpec split;
    DecompConfig decomp;
    Stage1Config stage1; // stage1.fj carries beta/delta/lambda/bias_window
    Stage2Config stage2;

    std::size_t stride = 1;
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::vector<std::size_t> horizons = {96, 192};
    std::vector<double> gamma_grid = {0.1, 0.3, 0.5, 0.9, 1.0};
    std::string variant = "hints";
    std::string out_dir = "out";
    std::size_t jobs = 1;

    // planted-series generator (synth subcommand and planted experiments)
    std::size_t synth_D = 5;
    std::size_t synth_T = 2000;
    double synth_noise = 0.05;
    double synth_latent_noise = 0.05;
    double synth_latent_scale = 8.0;
    double synth_trend_slope = 5e-4;
    double synth_seasonal_amp = 1.0;
    double synth_burst = 2.0;
    double synth_momentum = 0.8;

    PlantedConfig planted() const;
};

// Set one field by its canonical key; throws UsageError on unknown keys or
// unparseable values.
void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// Flat key=value file, '#' comments, blank lines ignored.
std::vector<std::pair<std::string, std::string>> load_config_file(const std::string& path);

// Defaults <- file <- flags, then validation. Invalid combinations throw
// UsageError / ConfigConflict with the offending keys.
RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_kvs,
                         const std::vector<std::pair<std::string, std::string>>& flag_kvs);

void validate_config(const RunConfig& cfg);

// Sorted key=value lines covering every field; parses back to an identical
// config (and hence an identical hash).
std::string canonical_text(const RunConfig& cfg);

// FNV-1a over the canonical text.
std::uint64_t config_hash(const RunConfig& cfg);

// Parse a canonical text blob (as stored in experiment records).
RunConfig config_from_text(const std::string& text);

} // namespace hints

#endif

#include "hints/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <type_traits>

#include "hints/errors.hpp"
#include "hints/rng.hpp"

namespace hints {

PlantedConfig RunConfig::planted() const {
    PlantedConfig p;
    p.fj = stage1.fj;
    p.D = synth_D;
    p.T = synth_T;
    p.seed = seed;
    p.noise_scale = synth_noise;
    p.latent_noise = synth_latent_noise;
    p.latent_scale = synth_latent_scale;
    p.trend_slope = synth_trend_slope;
    p.seasonal_amp = synth_seasonal_amp;
    p.seasonal_period = decomp.period;
    p.burst = synth_burst;
    p.momentum = synth_momentum;
    return p;
}

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt_short(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

double parse_double_or_throw(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw UsageError("cannot parse '" + v + "' as a real for " + key);
    }
}

std::uint64_t parse_u64_or_throw(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const unsigned long long u = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return u;
    } catch (const std::exception&) {
        throw UsageError("cannot parse '" + v + "' as an unsigned integer for " + key);
    }
}

bool parse_bool_or_throw(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw UsageError("cannot parse '" + v + "' as a boolean for " + key);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& key, const std::string& v, F f) {
    std::vector<T> out;
    for (const auto& item : split_list(v)) out.push_back(static_cast<T>(f(key, item)));
    if (out.empty()) throw UsageError("empty list for " + key);
    return out;
}

template <typename T>
std::string join_list(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        if constexpr (std::is_floating_point_v<T>)
            out += fmt_double(v[i]);
        else
            out += std::to_string(v[i]);
    }
    return out;
}

std::string join_strings(const std::vector<std::string>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += v[i];
    }
    return out;
}

} // namespace

void apply_kv(RunConfig& c, const std::string& key, const std::string& v) {
    if (key == "data.path") c.data_path = v;
    else if (key == "dataset.id") c.dataset_id = v;
    else if (key == "data.columns") c.columns = v.empty() ? std::vector<std::string>{} : split_list(v);
    else if (key == "data.delimiter") {
        if (v.size() != 1) throw UsageError("data.delimiter must be a single character");
        c.delimiter = v[0];
    } else if (key == "data.timestamp_column") c.timestamp_column = v;
    else if (key == "split.train_frac") c.split.train_frac = parse_double_or_throw(key, v);
    else if (key == "split.val_frac") c.split.val_frac = parse_double_or_throw(key, v);
    else if (key == "split.test_frac") c.split.test_frac = parse_double_or_throw(key, v);
    else if (key == "decomp.mode") c.decomp.mode = decomp_mode_from_string(v);
    else if (key == "decomp.period") c.decomp.period = parse_u64_or_throw(key, v);
    else if (key == "decomp.stl_seasonal_span") c.decomp.stl_seasonal_span = parse_u64_or_throw(key, v);
    else if (key == "fj.beta") c.stage1.fj.beta = parse_double_or_throw(key, v);
    else if (key == "fj.delta") c.stage1.fj.delta = parse_double_or_throw(key, v);
    else if (key == "fj.lambda") c.stage1.fj.lambda = parse_double_or_throw(key, v);
    else if (key == "fj.bias_window") c.stage1.fj.bias_window = parse_u64_or_throw(key, v);
    else if (key == "stage1.lr") c.stage1.lr = parse_double_or_throw(key, v);
    else if (key == "stage1.epochs") c.stage1.epochs = parse_u64_or_throw(key, v);
    else if (key == "stage1.momentum") c.stage1.momentum = parse_double_or_throw(key, v);
    else if (key == "stage1.target_detached") c.stage1.target_detached = parse_bool_or_throw(key, v);
    else if (key == "stage1.per_variable") c.stage1.per_variable = parse_bool_or_throw(key, v);
    else if (key == "stage1.sum_reduction") c.stage1.sum_reduction = parse_bool_or_throw(key, v);
    else if (key == "stage2.gamma") c.stage2.gamma = parse_double_or_throw(key, v);
    else if (key == "stage2.lr") c.stage2.lr = parse_double_or_throw(key, v);
    else if (key == "stage2.epochs") c.stage2.epochs = parse_u64_or_throw(key, v);
    else if (key == "stage2.L") c.stage2.L = parse_u64_or_throw(key, v);
    else if (key == "stage2.h") c.stage2.h = parse_u64_or_throw(key, v);
    else if (key == "stage2.kernel") c.stage2.kernel = parse_u64_or_throw(key, v);
    else if (key == "stage2.ma_window") c.stage2.ma_window = parse_u64_or_throw(key, v);
    else if (key == "stage2.patience") c.stage2.patience = parse_u64_or_throw(key, v);
    else if (key == "stage2.momentum") c.stage2.momentum = parse_double_or_throw(key, v);
    else if (key == "stride") c.stride = parse_u64_or_throw(key, v);
    else if (key == "seed") c.seed = parse_u64_or_throw(key, v);
    else if (key == "seeds") c.seeds = parse_list<std::uint64_t>(key, v, parse_u64_or_throw);
    else if (key == "horizons") c.horizons = parse_list<std::size_t>(key, v, parse_u64_or_throw);
    else if (key == "sweep.gammas") c.gamma_grid = parse_list<double>(key, v, parse_double_or_throw);
    else if (key == "variant") c.variant = v;
    else if (key == "out_dir") c.out_dir = v;
    else if (key == "jobs") c.jobs = parse_u64_or_throw(key, v);
    else if (key == "synth.D") c.synth_D = parse_u64_or_throw(key, v);
    else if (key == "synth.T") c.synth_T = parse_u64_or_throw(key, v);
    else if (key == "synth.noise") c.synth_noise = parse_double_or_throw(key, v);
    else if (key == "synth.latent_noise") c.synth_latent_noise = parse_double_or_throw(key, v);
    else if (key == "synth.latent_scale") c.synth_latent_scale = parse_double_or_throw(key, v);
    else if (key == "synth.trend_slope") c.synth_trend_slope = parse_double_or_throw(key, v);
    else if (key == "synth.seasonal_amp") c.synth_seasonal_amp = parse_double_or_throw(key, v);
    else if (key == "synth.burst") c.synth_burst = parse_double_or_throw(key, v);
    else if (key == "synth.momentum") c.synth_momentum = parse_double_or_throw(key, v);
    else throw UsageError("unknown config key: " + key);
}

std::vector<std::pair<std::string, std::string>> load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    std::vector<std::pair<std::string, std::string>> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto a = line.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) continue;
        const auto b = line.find_last_not_of(" \t\r\n");
        line = line.substr(a, b - a + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError("config line " + std::to_string(lineno) + " has no '='");
        std::string key = line.substr(0, eq);
        std::string value = line.substr(eq + 1);
        auto strip = [](std::string s) {
            const auto x = s.find_first_not_of(" \t");
            if (x == std::string::npos) return std::string();
            const auto y = s.find_last_not_of(" \t");
            return s.substr(x, y - x + 1);
        };
        out.emplace_back(strip(key), strip(value));
    }
    return out;
}

void validate_config(const RunConfig& c) {
    c.split.validate();
    if (c.stage1.fj.beta + c.stage1.fj.delta > 1.0 + 1e-12)
        throw ConfigConflict("fj.beta + fj.delta must be <= 1 (got " +
                             fmt_short(c.stage1.fj.beta) + " + " + fmt_short(c.stage1.fj.delta) +
                             ")");
    c.stage1.fj.validate();
    if (c.stage1.lr <= 0.0) throw UsageError("stage1.lr must be positive");
    if (c.stage1.epochs < 1) throw UsageError("stage1.epochs must be positive");
    c.stage2.validate();
    if (c.decomp.period < 1) throw UsageError("decomp.period must be positive");
    if (c.stage2.L < 2 * c.decomp.period)
        throw ConfigConflict("stage2.L must be >= 2*decomp.period so lookback windows can be "
                             "decomposed (L=" + std::to_string(c.stage2.L) + ", period=" +
                             std::to_string(c.decomp.period) + ")");
    if (c.stride == 0) throw UsageError("stride must be positive");
    for (double g : c.gamma_grid)
        if (g < 0.0 || g > 1.0) throw UsageError("sweep gammas must lie in [0,1]");
    if (c.variant != "baseline" && c.variant != "hints" && c.variant != "no_social" &&
        c.variant != "no_memory_bias" && c.variant != "no_fj_loss")
        throw UsageError("unknown variant: " + c.variant);
    if (c.jobs == 0) throw UsageError("jobs must be positive");
}

RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_kvs,
                         const std::vector<std::pair<std::string, std::string>>& flag_kvs) {
    RunConfig c;
    for (const auto& [k, v] : file_kvs) apply_kv(c, k, v);
    for (const auto& [k, v] : flag_kvs) apply_kv(c, k, v);
    validate_config(c);
    return c;
}

std::string canonical_text(const RunConfig& c) {
    std::map<std::string, std::string> kv;
    kv["data.path"] = c.data_path;
    kv["dataset.id"] = c.dataset_id;
    kv["data.columns"] = join_strings(c.columns);
    kv["data.delimiter"] = std::string(1, c.delimiter);
    kv["data.timestamp_column"] = c.timestamp_column;
    kv["split.train_frac"] = fmt_double(c.split.train_frac);
    kv["split.val_frac"] = fmt_double(c.split.val_frac);
    kv["split.test_frac"] = fmt_double(c.split.test_frac);
    kv["decomp.mode"] = to_string(c.decomp.mode);
    kv["decomp.period"] = std::to_string(c.decomp.period);
    kv["decomp.stl_seasonal_span"] = std::to_string(c.decomp.stl_seasonal_span);
    kv["fj.beta"] = fmt_double(c.stage1.fj.beta);
    kv["fj.delta"] = fmt_double(c.stage1.fj.delta);
    kv["fj.lambda"] = fmt_double(c.stage1.fj.lambda);
    kv["fj.bias_window"] = std::to_string(c.stage1.fj.bias_window);
    kv["stage1.lr"] = fmt_double(c.stage1.lr);
    kv["stage1.epochs"] = std::to_string(c.stage1.epochs);
    kv["stage1.momentum"] = fmt_double(c.stage1.momentum);
    kv["stage1.target_detached"] = c.stage1.target_detached ? "true" : "false";
    kv["stage1.per_variable"] = c.stage1.per_variable ? "true" : "false";
    kv["stage1.sum_reduction"] = c.stage1.sum_reduction ? "true" : "false";
    kv["stage2.gamma"] = fmt_double(c.stage2.gamma);
    kv["stage2.lr"] = fmt_double(c.stage2.lr);
    kv["stage2.epochs"] = std::to_string(c.stage2.epochs);
    kv["stage2.L"] = std::to_string(c.stage2.L);
    kv["stage2.h"] = std::to_string(c.stage2.h);
    kv["stage2.kernel"] = std::to_string(c.stage2.kernel);
    kv["stage2.ma_window"] = std::to_string(c.stage2.ma_window);
    kv["stage2.patience"] = std::to_string(c.stage2.patience);
    kv["stage2.momentum"] = fmt_double(c.stage2.momentum);
    kv["stride"] = std::to_string(c.stride);
    kv["seed"] = std::to_string(c.seed);
    kv["seeds"] = join_list(c.seeds);
    kv["horizons"] = join_list(c.horizons);
    kv["sweep.gammas"] = join_list(c.gamma_grid);
    kv["variant"] = c.variant;
    kv["out_dir"] = c.out_dir;
    kv["jobs"] = std::to_string(c.jobs);
    kv["synth.D"] = std::to_string(c.synth_D);
    kv["synth.T"] = std::to_string(c.synth_T);
    kv["synth.noise"] = fmt_double(c.synth_noise);
    kv["synth.latent_noise"] = fmt_double(c.synth_latent_noise);
    kv["synth.latent_scale"] = fmt_double(c.synth_latent_scale);
    kv["synth.trend_slope"] = fmt_double(c.synth_trend_slope);
    kv["synth.seasonal_amp"] = fmt_double(c.synth_seasonal_amp);
    kv["synth.burst"] = fmt_double(c.synth_burst);
    kv["synth.momentum"] = fmt_double(c.synth_momentum);

    std::string out;
    for (const auto& [k, v] : kv) {
        out += k;
        out += '=';
        out += v;
        out += '\n';
    }
    return out;
}

std::uint64_t config_hash(const RunConfig& c) {
    // Execution details that cannot affect results stay out of the hash, so
    // a record reproduces regardless of worker count or output location.
    std::stringstream ss(canonical_text(c));
    std::string line, filtered;
    while (std::getline(ss, line)) {
        if (line.rfind("jobs=", 0) == 0 || line.rfind("out_dir=", 0) == 0) continue;
        filtered += line;
        filtered += '\n';
    }
    return fnv1a64(filtered);
}

RunConfig config_from_text(const std::string& text) {
    RunConfig c;
    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageError("bad canonical config line: " + line);
        apply_kv(c, line.substr(0, eq), line.substr(eq + 1));
    }
    validate_config(c);
    return c;
}

} // namespace hints

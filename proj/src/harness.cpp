#include "hints/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "hints/errors.hpp"

namespace hints {

std::string to_string(Variant v) {
    switch (v) {
        case Variant::baseline: return "baseline";
        case Variant::hints: return "hints";
        case Variant::no_social: return "no_social";
        case Variant::no_memory_bias: return "no_memory_bias";
        case Variant::no_fj_loss: return "no_fj_loss";
    }
    throw Error("unreachable variant");
}

Variant variant_from_string(const std::string& s) {
    if (s == "baseline") return Variant::baseline;
    if (s == "hints" || s == "full") return Variant::hints;
    if (s == "no_social") return Variant::no_social;
    if (s == "no_memory_bias") return Variant::no_memory_bias;
    if (s == "no_fj_loss") return Variant::no_fj_loss;
    throw UsageError("unknown variant: " + s);
}

FjConfig ablated_fj(const FjConfig& full, Variant v) {
    FjConfig out = full;
    const double bias = 1.0 - full.beta - full.delta;
    switch (v) {
        case Variant::no_social: {
            const double rest = full.delta + bias;
            if (rest <= 0.0) throw UsageError("no_social ablation leaves no coefficient mass");
            out.beta = 0.0;
            out.delta = full.delta / rest; // bias coefficient becomes bias/rest
            break;
        }
        case Variant::no_memory_bias:
            out.beta = 1.0;
            out.delta = 0.0;
            break;
        default:
            break;
    }
    return out;
}

// ---- records -------------------------------------------------------------------

namespace {
std::string hash_hex(std::uint64_t h) {
    char buf[19];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}
} // namespace

std::string ExperimentRecord::to_json_line() const {
    nlohmann::ordered_json j;
    j["dataset"] = dataset_id;
    j["h"] = horizon;
    j["variant"] = variant;
    j["seed"] = seed;
    j["mse"] = metrics.mse;
    j["mae"] = metrics.mae;
    j["config_hash"] = hash_hex(config_hash);
    j["wall_time_sec"] = wall_time_sec;
    j["config"] = config_text;
    return j.dump();
}

ExperimentRecord ExperimentRecord::from_json_line(const std::string& line) {
    const auto j = nlohmann::json::parse(line);
    ExperimentRecord r;
    r.dataset_id = j.at("dataset").get<std::string>();
    r.horizon = j.at("h").get<std::size_t>();
    r.variant = j.at("variant").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.metrics.mse = j.at("mse").get<double>();
    r.metrics.mae = j.at("mae").get<double>();
    r.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    r.wall_time_sec = j.at("wall_time_sec").get<double>();
    r.config_text = j.at("config").get<std::string>();
    return r;
}

RecordStore::RecordStore(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            hashes_.push_back(ExperimentRecord::from_json_line(line).config_hash);
        } catch (const std::exception&) {
            throw Error("corrupt record line in " + path_);
        }
    }
}

bool RecordStore::contains(std::uint64_t hash) const {
    std::lock_guard<std::mutex> lock(mu_);
    return std::find(hashes_.begin(), hashes_.end(), hash) != hashes_.end();
}

bool RecordStore::append(const ExperimentRecord& r, bool force) {
    std::lock_guard<std::mutex> lock(mu_);
    if (!force && std::find(hashes_.begin(), hashes_.end(), r.config_hash) != hashes_.end())
        return false;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("cannot append to record store: " + path_);
    out << r.to_json_line() << '\n';
    hashes_.push_back(r.config_hash);
    return true;
}

std::vector<ExperimentRecord> RecordStore::all() const {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<ExperimentRecord> out;
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(ExperimentRecord::from_json_line(line));
    return out;
}

// ---- pipeline --------------------------------------------------------------------

PreparedData prepare_data(const MultivariateSeries& series, const RunConfig& cfg) {
    PreparedData d;
    d.raw = series;
    d.splits = make_splits(series.length(), cfg.split);
    d.normalizer = fit_normalizer(series.values, d.splits.train);
    d.normalized = d.normalizer.transform(series.values);
    return d;
}

namespace {

struct RunPoint {
    RunConfig cfg; // fully resolved (variant, seed, h baked in)
    Variant variant;
};

ExperimentRecord execute_point(const PreparedData& data, const RunPoint& pt) {
    const auto t0 = std::chrono::steady_clock::now();
    const RunConfig& cfg = pt.cfg;
    const Variant v = pt.variant;

    const auto train_w = make_windows(data.normalized, data.splits.train, cfg.stage2.L,
                                      cfg.stage2.h, cfg.stride);
    const auto val_w = make_windows(data.normalized, data.splits.val, cfg.stage2.L, cfg.stage2.h,
                                    cfg.stride);
    const auto test_w = make_windows(data.normalized, data.splits.test, cfg.stage2.L, cfg.stage2.h,
                                     cfg.stride);

    const std::size_t D = data.normalized.rows();
    ExtractorModel extractor = ExtractorModel::identity(D);
    if (v == Variant::hints || v == Variant::no_social || v == Variant::no_memory_bias) {
        const Mat train_slice = slice_cols(data.normalized, data.splits.train);
        const Mat residuals = decompose(train_slice, cfg.decomp).residual;
        Stage1Config s1 = cfg.stage1;
        s1.seed = cfg.seed;
        s1.fj = ablated_fj(cfg.stage1.fj, v);
        extractor = train_stage1(residuals, s1).model;
    }

    Stage2Config s2 = cfg.stage2;
    s2.seed = cfg.seed;
    s2.use_attention = v != Variant::baseline;
    const Stage2Result trained = train_stage2(train_w, val_w, extractor, cfg.decomp, s2);

    ExperimentRecord rec;
    rec.metrics = evaluate(test_w, extractor, &trained.attention, trained.backbone, cfg.decomp,
                           s2.gamma, s2.use_attention);
    rec.dataset_id = cfg.dataset_id;
    rec.horizon = cfg.stage2.h;
    rec.variant = to_string(v);
    rec.seed = cfg.seed;
    rec.config_text = canonical_text(cfg);
    rec.config_hash = config_hash(cfg);
    rec.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
}

void run_points(const PreparedData& data, const std::vector<RunPoint>& points,
                std::vector<ExperimentRecord>& out, std::size_t jobs, RecordStore* store) {
    out.resize(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= points.size()) return;
            const std::uint64_t hash = config_hash(points[i].cfg);
            if (store && store->contains(hash)) {
                bool found = false;
                for (const auto& r : store->all())
                    if (r.config_hash == hash) {
                        out[i] = r;
                        found = true;
                        std::cerr << "[harness] reusing stored record " << hash_hex(hash) << "\n";
                        break;
                    }
                if (found) continue;
            }
            out[i] = execute_point(data, points[i]);
            if (store) store->append(out[i]);
        }
    };
    const std::size_t n_threads = std::max<std::size_t>(1, std::min(jobs, points.size()));
    if (n_threads == 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

RunPoint make_point(const RunConfig& base, Variant v, std::uint64_t seed, std::size_t horizon,
                    double gamma_override = -1.0) {
    RunPoint pt;
    pt.cfg = base;
    pt.cfg.variant = to_string(v);
    pt.cfg.seed = seed;
    pt.cfg.stage2.h = horizon;
    if (gamma_override >= 0.0) pt.cfg.stage2.gamma = gamma_override;
    pt.variant = v;
    return pt;
}

} // namespace

ExperimentRecord run_single(const PreparedData& data, const RunConfig& base, Variant v,
                            std::uint64_t seed, std::size_t horizon) {
    return execute_point(data, make_point(base, v, seed, horizon));
}

ExperimentRecord rerun_record(const PreparedData& data, const ExperimentRecord& r) {
    const RunConfig cfg = config_from_text(r.config_text);
    RunPoint pt;
    pt.cfg = cfg;
    pt.variant = variant_from_string(cfg.variant);
    return execute_point(data, pt);
}

// ---- comparison -------------------------------------------------------------------

double improvement_avg_pct(const std::vector<double>& baseline, const std::vector<double>& hints) {
    if (baseline.size() != hints.size() || baseline.empty())
        throw UsageError("improvement needs equally sized, non-empty metric lists");
    double mb = 0.0, mh = 0.0;
    for (double v : baseline) mb += v;
    for (double v : hints) mh += v;
    mb /= static_cast<double>(baseline.size());
    mh /= static_cast<double>(hints.size());
    if (mb == 0.0) throw UsageError("baseline mean metric is zero");
    return 100.0 * (mb - mh) / mb;
}

ComparisonResult run_comparison(const PreparedData& data, const RunConfig& base,
                                RecordStore* store) {
    std::vector<RunPoint> points;
    for (std::size_t h : base.horizons)
        for (std::uint64_t s : base.seeds) {
            points.push_back(make_point(base, Variant::baseline, s, h));
            points.push_back(make_point(base, Variant::hints, s, h));
        }
    ComparisonResult res;
    run_points(data, points, res.records, base.jobs, store);

    const std::size_t n_seeds = base.seeds.size();
    for (std::size_t hi = 0; hi < base.horizons.size(); ++hi) {
        double bm = 0, ba = 0, hm = 0, ha = 0;
        for (std::size_t si = 0; si < n_seeds; ++si) {
            const auto& b = res.records[(hi * n_seeds + si) * 2];
            const auto& h = res.records[(hi * n_seeds + si) * 2 + 1];
            bm += b.metrics.mse;
            ba += b.metrics.mae;
            hm += h.metrics.mse;
            ha += h.metrics.mae;
        }
        const auto n = static_cast<double>(n_seeds);
        res.baseline_mse.push_back(bm / n);
        res.baseline_mae.push_back(ba / n);
        res.hints_mse.push_back(hm / n);
        res.hints_mae.push_back(ha / n);
    }
    res.imp_avg_mse_pct = improvement_avg_pct(res.baseline_mse, res.hints_mse);
    res.imp_avg_mae_pct = improvement_avg_pct(res.baseline_mae, res.hints_mae);
    return res;
}

AblationResult run_ablation(const PreparedData& data, const RunConfig& base, std::size_t horizon,
                            RecordStore* store) {
    const Variant variants[] = {Variant::hints, Variant::no_social, Variant::no_memory_bias,
                                Variant::no_fj_loss};
    std::vector<RunPoint> points;
    for (Variant v : variants)
        for (std::uint64_t s : base.seeds) points.push_back(make_point(base, v, s, horizon));

    std::vector<ExperimentRecord> records;
    run_points(data, points, records, base.jobs, store);

    AblationResult res;
    const std::size_t n_seeds = base.seeds.size();
    for (std::size_t vi = 0; vi < 4; ++vi) {
        AblationRow row;
        row.variant = variants[vi];
        for (std::size_t si = 0; si < n_seeds; ++si) {
            const auto& r = records[vi * n_seeds + si];
            row.mse_mean += r.metrics.mse;
            row.mae_mean += r.metrics.mae;
            row.records.push_back(r);
        }
        row.mse_mean /= static_cast<double>(n_seeds);
        row.mae_mean /= static_cast<double>(n_seeds);
        res.rows.push_back(std::move(row));
    }
    res.full_is_best_mse = true;
    for (std::size_t vi = 1; vi < res.rows.size(); ++vi)
        if (res.rows[0].mse_mean > res.rows[vi].mse_mean) res.full_is_best_mse = false;
    return res;
}

std::vector<SweepPoint> run_gamma_sweep(const PreparedData& data, const RunConfig& base,
                                        std::size_t horizon, RecordStore* store) {
    std::vector<RunPoint> points;
    for (double g : base.gamma_grid)
        for (std::uint64_t s : base.seeds)
            points.push_back(make_point(base, Variant::hints, s, horizon, g));

    std::vector<ExperimentRecord> records;
    run_points(data, points, records, base.jobs, store);

    std::vector<SweepPoint> out;
    const std::size_t n_seeds = base.seeds.size();
    for (std::size_t gi = 0; gi < base.gamma_grid.size(); ++gi) {
        SweepPoint p;
        p.gamma = base.gamma_grid[gi];
        p.mse_min = p.mae_min = std::numeric_limits<double>::infinity();
        p.mse_max = p.mae_max = -std::numeric_limits<double>::infinity();
        for (std::size_t si = 0; si < n_seeds; ++si) {
            const auto& r = records[gi * n_seeds + si];
            p.mse_mean += r.metrics.mse;
            p.mae_mean += r.metrics.mae;
            p.mse_min = std::min(p.mse_min, r.metrics.mse);
            p.mse_max = std::max(p.mse_max, r.metrics.mse);
            p.mae_min = std::min(p.mae_min, r.metrics.mae);
            p.mae_max = std::max(p.mae_max, r.metrics.mae);
            p.records.push_back(r);
        }
        p.mse_mean /= static_cast<double>(n_seeds);
        p.mae_mean /= static_cast<double>(n_seeds);
        out.push_back(std::move(p));
    }
    return out;
}

void save_sweep_csv(const std::vector<SweepPoint>& points, const std::string& dataset_id,
                    std::size_t horizon, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    const std::string base = out_dir + "/" + dataset_id + "_sweep_" + std::to_string(horizon);
    {
        std::ofstream out(base + ".csv");
        out.precision(17);
        out << "gamma,seed,mse,mae\n";
        for (const auto& p : points)
            for (const auto& r : p.records)
                out << p.gamma << ',' << r.seed << ',' << r.metrics.mse << ',' << r.metrics.mae
                    << '\n';
    }
    {
        std::ofstream out(base + "_summary.csv");
        out.precision(17);
        out << "gamma,mse_mean,mse_min,mse_max,mae_mean,mae_min,mae_max\n";
        for (const auto& p : points)
            out << p.gamma << ',' << p.mse_mean << ',' << p.mse_min << ',' << p.mse_max << ','
                << p.mae_mean << ',' << p.mae_min << ',' << p.mae_max << '\n';
    }
}

void save_comparison_csv(const ComparisonResult& r, const RunConfig& base,
                         const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    for (std::size_t hi = 0; hi < base.horizons.size(); ++hi) {
        std::ofstream out(out_dir + "/" + base.dataset_id + "_compare_" +
                          std::to_string(base.horizons[hi]) + ".csv");
        out.precision(17);
        out << "variant,seed,mse,mae\n";
        for (const auto& rec : r.records)
            if (rec.horizon == base.horizons[hi])
                out << rec.variant << ',' << rec.seed << ',' << rec.metrics.mse << ','
                    << rec.metrics.mae << '\n';
    }
}

void export_human_factor_trace(const PreparedData& data, const RunConfig& cfg,
                               const ExtractorModel& extractor, const AttentionBlock& attention,
                               const std::string& variable, IndexRange range,
                               const std::string& path) {
    std::size_t var = data.raw.dims();
    for (std::size_t d = 0; d < data.raw.dims(); ++d)
        if (data.raw.names[d] == variable) var = d;
    if (var == data.raw.dims()) throw UnknownVariable(variable);
    if (range.end > data.raw.length() || range.begin >= range.end)
        throw UsageError("trace range out of bounds");

    const Decomposition dec = decompose(data.normalized, cfg.decomp);
    const Mat hhat = extractor.extract(dec.residual);

    const std::size_t L = cfg.stage2.L;
    std::vector<double> attn(range.length(), std::nan(""));
    for (std::size_t w0 = range.begin; w0 + L <= range.end; w0 += L) {
        const Mat hw = slice_cols(hhat, {w0, w0 + L});
        const Mat A = attention.attention_map(hw);
        for (std::size_t j = 0; j < L; ++j) attn[w0 - range.begin + j] = A(var, j);
    }

    std::ofstream out(path);
    if (!out) throw Error("cannot write trace: " + path);
    out.precision(17);
    out << "t,value,hhat,attention\n";
    for (std::size_t t = range.begin; t < range.end; ++t) {
        out << t << ',' << data.raw.values(var, t) << ',' << hhat(var, t) << ',';
        const double a = attn[t - range.begin];
        if (!std::isnan(a)) out << a;
        out << '\n';
    }
}

} // namespace hints

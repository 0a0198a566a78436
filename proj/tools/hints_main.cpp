// hints: two-stage residual-factor forecasting pipeline.
//
// Subcommands map 1:1 onto pipeline/harness operations:
//   ingest | decompose | stage1 | stage2 | evaluate | compare | ablate |
//   sweep | trace | synth | selftest
//
// Exit codes: 0 ok, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "hints/config.hpp"
#include "hints/decompose.hpp"
#include "hints/errors.hpp"
#include "hints/fj.hpp"
#include "hints/harness.hpp"
#include "hints/series.hpp"
#include "hints/stage1.hpp"
#include "hints/stage2.hpp"

namespace {

using KV = std::vector<std::pair<std::string, std::string>>;

hints::MultivariateSeries load_or_synth(const hints::RunConfig& cfg) {
    if (!cfg.data_path.empty()) {
        hints::CsvSchema schema;
        schema.columns = cfg.columns;
        schema.delimiter = cfg.delimiter;
        schema.timestamp_column = cfg.timestamp_column;
        return hints::load_csv(cfg.data_path, schema);
    }
    return hints::generate_planted_series(cfg.planted()).series;
}

std::string dataset_label(const hints::RunConfig& cfg) {
    if (cfg.dataset_id != "synthetic" || cfg.data_path.empty()) return cfg.dataset_id;
    return std::filesystem::path(cfg.data_path).stem().string();
}

void print_metrics_line(const std::string& tag, const hints::Metrics& m) {
    std::cout << std::left << std::setw(18) << tag << " MSE " << std::setw(12) << m.mse << " MAE "
              << std::setw(12) << m.mae << "\n";
}

int cmd_ingest(const hints::RunConfig& cfg, const std::string& out_csv) {
    const auto series = load_or_synth(cfg);
    std::cout << "variables: " << series.dims() << "\nsteps:     " << series.length() << "\n";
    for (std::size_t d = 0; d < series.dims(); ++d) {
        const double* row = series.values.row(d);
        double lo = row[0], hi = row[0], sum = 0;
        for (std::size_t t = 0; t < series.length(); ++t) {
            lo = std::min(lo, row[t]);
            hi = std::max(hi, row[t]);
            sum += row[t];
        }
        std::cout << "  " << std::left << std::setw(16) << series.names[d] << " min " << lo
                  << " max " << hi << " mean " << sum / static_cast<double>(series.length())
                  << "\n";
    }
    if (!out_csv.empty()) {
        hints::save_csv(series, out_csv);
        std::cout << "wrote " << out_csv << "\n";
    }
    return 0;
}

int cmd_decompose(const hints::RunConfig& cfg) {
    const auto series = load_or_synth(cfg);
    const auto d = hints::decompose(series, cfg.decomp);
    std::filesystem::create_directories(cfg.out_dir);
    hints::dump_decomposition_csv(d, series.values, series.names, cfg.out_dir);
    hints::Mat recon(series.dims(), series.length());
    for (std::size_t i = 0; i < recon.size(); ++i)
        recon.data()[i] = d.trend.data()[i] + d.seasonal.data()[i] + d.residual.data()[i];
    std::cout << "mode " << to_string(cfg.decomp.mode) << ", period " << cfg.decomp.period
              << ", reconstruction max abs error " << hints::max_abs_diff(recon, series.values)
              << "\nper-variable CSVs in " << cfg.out_dir << "\n";
    return 0;
}

int cmd_stage1(const hints::RunConfig& cfg) {
    const auto series = load_or_synth(cfg);
    const auto data = hints::prepare_data(series, cfg);
    const hints::Mat train = hints::slice_cols(data.normalized, data.splits.train);
    const hints::Mat residuals = hints::decompose(train, cfg.decomp).residual;
    hints::Stage1Config s1 = cfg.stage1;
    s1.seed = cfg.seed;
    const auto res = hints::train_stage1(residuals, s1);
    std::filesystem::create_directories(cfg.out_dir);
    const std::string ckpt = cfg.out_dir + "/extractor.ckpt";
    res.model.save(ckpt);
    hints::save_loss_curve_csv(res.loss_curve, cfg.out_dir + "/stage1_loss.csv");
    res.influence.save_csv(cfg.out_dir + "/influence.csv", series.names);
    std::cout << "stage 1: initial loss " << res.loss_curve.front() << ", final loss "
              << res.loss_curve.back() << "\nextractor -> " << ckpt << "\n";
    return 0;
}

int cmd_stage2(const hints::RunConfig& cfg, const std::string& extractor_path) {
    const auto series = load_or_synth(cfg);
    const auto data = hints::prepare_data(series, cfg);
    const std::string path =
        extractor_path.empty() ? cfg.out_dir + "/extractor.ckpt" : extractor_path;
    const auto extractor = hints::ExtractorModel::load(path, series.dims());

    const auto train_w = hints::make_windows(data.normalized, data.splits.train, cfg.stage2.L,
                                             cfg.stage2.h, cfg.stride);
    const auto val_w = hints::make_windows(data.normalized, data.splits.val, cfg.stage2.L,
                                           cfg.stage2.h, cfg.stride);
    const auto test_w = hints::make_windows(data.normalized, data.splits.test, cfg.stage2.L,
                                            cfg.stage2.h, cfg.stride);
    hints::Stage2Config s2 = cfg.stage2;
    s2.seed = cfg.seed;
    s2.use_attention = cfg.variant != "baseline";
    const auto trained = hints::train_stage2(train_w, val_w, extractor, cfg.decomp, s2);
    const auto metrics = hints::evaluate(test_w, extractor, &trained.attention, trained.backbone,
                                         cfg.decomp, s2.gamma, s2.use_attention);

    std::filesystem::create_directories(cfg.out_dir);
    hints::ModelBundle bundle;
    bundle.attention = trained.attention;
    bundle.backbone = trained.backbone;
    bundle.gamma = s2.gamma;
    bundle.use_attention = s2.use_attention;
    bundle.extractor_hash = extractor.params().content_hash();
    const std::string bundle_path = cfg.out_dir + "/bundle.ckpt";
    hints::save_bundle(bundle, bundle_path);

    std::vector<hints::Mat> preds;
    preds.reserve(test_w.size());
    for (const auto& w : test_w)
        preds.push_back(hints::forecast_window(w.input, extractor, &trained.attention,
                                               trained.backbone, cfg.decomp, s2.gamma,
                                               s2.use_attention));
    hints::dump_predictions_csv(test_w, preds, series.names,
                                cfg.out_dir + "/" + dataset_label(cfg) + "_predictions_" +
                                    std::to_string(cfg.stage2.h) + ".csv");

    std::cout << "stage 2: best epoch " << trained.best_epoch << ", best val MSE "
              << trained.best_val_mse << "\n";
    print_metrics_line("test", metrics);
    std::cout << "bundle -> " << bundle_path << "\n";
    return 0;
}

int cmd_evaluate(const hints::RunConfig& cfg, const std::string& extractor_path,
                 const std::string& bundle_path) {
    const auto series = load_or_synth(cfg);
    const auto data = hints::prepare_data(series, cfg);
    const auto extractor = hints::ExtractorModel::load(
        extractor_path.empty() ? cfg.out_dir + "/extractor.ckpt" : extractor_path, series.dims());
    const auto bundle = hints::load_bundle(
        bundle_path.empty() ? cfg.out_dir + "/bundle.ckpt" : bundle_path);
    if (bundle.use_attention && bundle.extractor_hash != extractor.params().content_hash())
        std::cerr << "warning: bundle was trained against a different extractor checkpoint\n";
    const auto test_w = hints::make_windows(data.normalized, data.splits.test,
                                            bundle.backbone.lookback(),
                                            bundle.backbone.horizon(), cfg.stride);
    const auto metrics = hints::evaluate(test_w, extractor, &bundle.attention, bundle.backbone,
                                         cfg.decomp, bundle.gamma, bundle.use_attention);
    print_metrics_line("test", metrics);
    return 0;
}

int cmd_compare(hints::RunConfig cfg) {
    cfg.dataset_id = dataset_label(cfg);
    const auto series = load_or_synth(cfg);
    const auto data = hints::prepare_data(series, cfg);
    std::filesystem::create_directories(cfg.out_dir);
    hints::RecordStore store(cfg.out_dir + "/records.jsonl");
    const auto res = hints::run_comparison(data, cfg, &store);

    std::cout << std::left << std::setw(8) << "h" << std::setw(14) << "base MSE" << std::setw(14)
              << "hints MSE" << std::setw(14) << "base MAE" << std::setw(14) << "hints MAE"
              << "\n";
    for (std::size_t i = 0; i < cfg.horizons.size(); ++i)
        std::cout << std::left << std::setw(8) << cfg.horizons[i] << std::setw(14)
                  << res.baseline_mse[i] << std::setw(14) << res.hints_mse[i] << std::setw(14)
                  << res.baseline_mae[i] << std::setw(14) << res.hints_mae[i] << "\n";
    std::cout << "Imp.(Avg.) MSE " << res.imp_avg_mse_pct << "%  MAE " << res.imp_avg_mae_pct
              << "%\n";
    hints::save_comparison_csv(res, cfg, cfg.out_dir);
    return 0;
}

int cmd_ablate(hints::RunConfig cfg, std::size_t horizon) {
    cfg.dataset_id = dataset_label(cfg);
    const auto series = load_or_synth(cfg);
    const auto data = hints::prepare_data(series, cfg);
    std::filesystem::create_directories(cfg.out_dir);
    hints::RecordStore store(cfg.out_dir + "/records.jsonl");
    const auto res = hints::run_ablation(data, cfg, horizon ? horizon : cfg.stage2.h, &store);
    std::cout << std::left << std::setw(18) << "variant" << std::setw(14) << "MSE" << std::setw(14)
              << "MAE" << "\n";
    for (const auto& row : res.rows)
        std::cout << std::left << std::setw(18) << to_string(row.variant) << std::setw(14)
                  << row.mse_mean << std::setw(14) << row.mae_mean << "\n";
    std::cout << "full model best on MSE: " << (res.full_is_best_mse ? "yes" : "no") << "\n";
    return 0;
}

int cmd_sweep(hints::RunConfig cfg, std::size_t horizon) {
    cfg.dataset_id = dataset_label(cfg);
    const auto series = load_or_synth(cfg);
    const auto data = hints::prepare_data(series, cfg);
    std::filesystem::create_directories(cfg.out_dir);
    hints::RecordStore store(cfg.out_dir + "/records.jsonl");
    const std::size_t h = horizon ? horizon : cfg.stage2.h;
    const auto points = hints::run_gamma_sweep(data, cfg, h, &store);
    std::cout << std::left << std::setw(10) << "gamma" << std::setw(14) << "MSE" << std::setw(14)
              << "MAE" << "\n";
    for (const auto& p : points)
        std::cout << std::left << std::setw(10) << p.gamma << std::setw(14) << p.mse_mean
                  << std::setw(14) << p.mae_mean << "\n";
    hints::save_sweep_csv(points, cfg.dataset_id, h, cfg.out_dir);
    std::cout << "curve -> " << cfg.out_dir << "/" << cfg.dataset_id << "_sweep_" << h << ".csv\n";
    return 0;
}

int cmd_trace(const hints::RunConfig& cfg, const std::string& extractor_path,
              const std::string& bundle_path, const std::string& variable, std::size_t from,
              std::size_t to) {
    const auto series = load_or_synth(cfg);
    const auto data = hints::prepare_data(series, cfg);
    const auto extractor = hints::ExtractorModel::load(
        extractor_path.empty() ? cfg.out_dir + "/extractor.ckpt" : extractor_path, series.dims());
    const auto bundle = hints::load_bundle(
        bundle_path.empty() ? cfg.out_dir + "/bundle.ckpt" : bundle_path);
    std::filesystem::create_directories(cfg.out_dir);
    const std::string path = cfg.out_dir + "/" + dataset_label(cfg) + "_trace_" + variable + ".csv";
    hints::export_human_factor_trace(data, cfg, extractor, bundle.attention, variable,
                                     {from, to == 0 ? series.length() : to}, path);
    std::cout << "trace -> " << path << "\n";
    return 0;
}

int cmd_synth(const hints::RunConfig& cfg, const std::string& out_csv) {
    const auto planted = hints::generate_planted_series(cfg.planted());
    const std::string path = out_csv.empty() ? cfg.out_dir + "/synthetic.csv" : out_csv;
    if (path.find('/') != std::string::npos)
        std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    hints::save_csv(planted.series, path);

    hints::MultivariateSeries latent;
    latent.values = planted.latent;
    latent.names = planted.series.names;
    const auto dot = path.rfind('.');
    const std::string latent_path = dot == std::string::npos
                                        ? path + "_latent"
                                        : path.substr(0, dot) + "_latent" + path.substr(dot);
    hints::save_csv(latent, latent_path);
    std::cout << "series -> " << path << "\nlatent -> " << latent_path << "\n";
    return 0;
}

} // namespace

// defined in selftest.cpp
int hints_selftest(const hints::RunConfig& cfg);

int main(int argc, char** argv) {
    CLI::App app{"two-stage residual-factor forecasting pipeline"};
    app.require_subcommand(0, 1);

    KV flags;
    std::vector<std::string> set_entries;
    std::string config_path;
    bool print_config = false;
    std::string out_csv, extractor_path, bundle_path, trace_variable = "v0";
    std::size_t horizon_override = 0, trace_from = 0, trace_to = 0;

    auto kv = [&flags](const std::string& key) {
        return [key, &flags](const std::string& v) { flags.emplace_back(key, v); };
    };
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option_function<std::string>("--config", [&](const std::string& v) { config_path = v; },
                                              "flat key=value config file");
        cmd->add_flag("--print-config", print_config, "print the resolved canonical config and exit");
        cmd->add_option("--set", set_entries, "any config entry as key=value (repeatable)");
        cmd->add_option_function<std::string>("--data", kv("data.path"), "input CSV path");
        cmd->add_option_function<std::string>("--dataset-id", kv("dataset.id"), "dataset label");
        cmd->add_option_function<std::string>("--columns", kv("data.columns"), "columns to ingest");
        cmd->add_option_function<std::string>("--period", kv("decomp.period"), "seasonal period");
        cmd->add_option_function<std::string>("--mode", kv("decomp.mode"), "classical|stl");
        cmd->add_option_function<std::string>("--beta", kv("fj.beta"), "social influence weight");
        cmd->add_option_function<std::string>("--delta", kv("fj.delta"), "self-memory weight");
        cmd->add_option_function<std::string>("--lambda", kv("fj.lambda"), "residual susceptibility");
        cmd->add_option_function<std::string>("--bias-window", kv("fj.bias_window"), "rolling bias window");
        cmd->add_option_function<std::string>("--lr1", kv("stage1.lr"), "stage 1 learning rate");
        cmd->add_option_function<std::string>("--epochs1", kv("stage1.epochs"), "stage 1 epochs");
        cmd->add_option_function<std::string>("--lr2", kv("stage2.lr"), "stage 2 learning rate");
        cmd->add_option_function<std::string>("--epochs2", kv("stage2.epochs"), "stage 2 epochs");
        cmd->add_option_function<std::string>("--gamma",
                                              [&flags](const std::string& v) {
                                                  if (v.find(',') != std::string::npos)
                                                      flags.emplace_back("sweep.gammas", v);
                                                  else
                                                      flags.emplace_back("stage2.gamma", v);
                                              },
                                              "modulation strength (comma list = sweep grid)");
        cmd->add_option_function<std::string>("--L", kv("stage2.L"), "lookback length");
        cmd->add_option_function<std::string>("--h", kv("stage2.h"), "forecast horizon");
        cmd->add_option_function<std::string>("--kernel", kv("stage2.kernel"), "attention kernel size");
        cmd->add_option_function<std::string>("--ma-window", kv("stage2.ma_window"), "backbone trend window");
        cmd->add_option_function<std::string>("--patience", kv("stage2.patience"), "early-stop patience");
        cmd->add_option_function<std::string>("--stride", kv("stride"), "window stride");
        cmd->add_option_function<std::string>("--seed", kv("seed"), "root seed");
        cmd->add_option_function<std::string>("--seeds", kv("seeds"), "seed list for multi-run ops");
        cmd->add_option_function<std::string>("--horizons", kv("horizons"), "horizon list for compare");
        cmd->add_option_function<std::string>("--variant", kv("variant"),
                                              "baseline|hints|no_social|no_memory_bias|no_fj_loss");
        cmd->add_option_function<std::string>("--out", kv("out_dir"), "output directory");
        cmd->add_option_function<std::string>("--jobs", kv("jobs"), "parallel run workers");
        cmd->add_option_function<std::string>("--synth-D", kv("synth.D"), "synthetic variable count");
        cmd->add_option_function<std::string>("--synth-T", kv("synth.T"), "synthetic length");
        cmd->add_option_function<std::string>("--synth-noise", kv("synth.noise"), "synthetic noise scale");
    };

    auto* ingest = app.add_subcommand("ingest", "load and validate a CSV dataset");
    ingest->add_option("--write", out_csv, "write the ingested series back out as CSV");
    auto* decomp = app.add_subcommand("decompose", "decompose a series and dump components");
    auto* stage1 = app.add_subcommand("stage1", "train the residual-factor extractor");
    auto* stage2 = app.add_subcommand("stage2", "train attention + backbone against a frozen extractor");
    stage2->add_option("--extractor", extractor_path, "stage 1 checkpoint path");
    auto* evaluate = app.add_subcommand("evaluate", "evaluate a saved bundle on the test split");
    evaluate->add_option("--extractor", extractor_path, "stage 1 checkpoint path");
    evaluate->add_option("--bundle", bundle_path, "stage 2 bundle path");
    auto* compare = app.add_subcommand("compare", "baseline vs full pipeline across horizons/seeds");
    auto* ablate = app.add_subcommand("ablate", "component ablation table");
    ablate->add_option("--horizon", horizon_override, "horizon (default stage2.h)");
    auto* sweep = app.add_subcommand("sweep", "gamma sensitivity sweep");
    sweep->add_option("--horizon", horizon_override, "horizon (default stage2.h)");
    auto* trace = app.add_subcommand("trace", "export (t, value, factor, attention) columns");
    trace->add_option("--extractor", extractor_path, "stage 1 checkpoint path");
    trace->add_option("--bundle", bundle_path, "stage 2 bundle path");
    trace->add_option("--variable", trace_variable, "variable name");
    trace->add_option("--from", trace_from, "range start (0-based)");
    trace->add_option("--to", trace_to, "range end (exclusive; 0 = series end)");
    auto* synth = app.add_subcommand("synth", "generate a planted synthetic dataset");
    synth->add_option("--write", out_csv, "output CSV path (default <out>/synthetic.csv)");
    auto* selftest = app.add_subcommand("selftest", "run the built-in oracle/invariant suite");

    for (CLI::App* cmd : {ingest, decomp, stage1, stage2, evaluate, compare, ablate, sweep, trace,
                          synth, selftest})
        add_common(cmd);
    add_common(&app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        KV file_kvs;
        if (const char* env = std::getenv("HINTS_OUT_DIR"))
            file_kvs.emplace_back("out_dir", env);
        if (!config_path.empty()) {
            for (auto& kvp : hints::load_config_file(config_path)) file_kvs.push_back(kvp);
        }
        for (const auto& entry : set_entries) {
            const auto eq = entry.find('=');
            if (eq == std::string::npos)
                throw hints::UsageError("--set expects key=value, got '" + entry + "'");
            flags.emplace_back(entry.substr(0, eq), entry.substr(eq + 1));
        }
        const hints::RunConfig cfg = hints::resolve_config(file_kvs, flags);

        if (print_config) {
            std::cout << hints::canonical_text(cfg);
            return 0;
        }
        std::cout.precision(10);

        if (ingest->parsed()) return cmd_ingest(cfg, out_csv);
        if (decomp->parsed()) return cmd_decompose(cfg);
        if (stage1->parsed()) return cmd_stage1(cfg);
        if (stage2->parsed()) return cmd_stage2(cfg, extractor_path);
        if (evaluate->parsed()) return cmd_evaluate(cfg, extractor_path, bundle_path);
        if (compare->parsed()) return cmd_compare(cfg);
        if (ablate->parsed()) return cmd_ablate(cfg, horizon_override);
        if (sweep->parsed()) return cmd_sweep(cfg, horizon_override);
        if (trace->parsed())
            return cmd_trace(cfg, extractor_path, bundle_path, trace_variable, trace_from, trace_to);
        if (synth->parsed()) return cmd_synth(cfg, out_csv);
        if (selftest->parsed()) return hints_selftest(cfg);

        std::cerr << app.help();
        return 1;
    } catch (const hints::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const hints::ConfigConflict& e) {
        std::cerr << "config conflict: " << e.what() << "\n";
        return 1;
    } catch (const hints::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const hints::Error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

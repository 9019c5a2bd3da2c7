// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/io/pipeline.h"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "feelab/diag/diagnostics.h"
#include "feelab/stage2/bootstrap.h"

namespace feelab {
namespace io {

using nlohmann::json;
namespace fs = std::filesystem;

std::string RunConfig::to_json() const {
    json j;
    j["tx_file"] = tx_file;
    j["snapshot_file"] = snapshot_file;
    j["links_file"] = links_file;
    j["external_weights_file"] = external_weights_file;
    j["out_dir"] = out_dir;
    j["window_secs"] = window_secs;
    j["max_gap_secs"] = max_gap_secs;
    j["eps_resp"] = eps_resp;
    j["max_error_fraction"] = max_error_fraction;

    json f;
    f["n_trees"] = delay.forest.n_trees;
    f["max_depth"] = delay.forest.max_depth;
    f["min_leaf"] = delay.forest.min_leaf;
    f["feature_subsample"] = delay.forest.feature_subsample;
    f["bootstrap"] = delay.forest.bootstrap;
    f["seed"] = delay.forest.seed;
    f["n_folds"] = delay.forest.n_folds;
    j["forest"] = f;

    json d;
    d["grid_points"] = delay.grid_points;
    d["fd_delta"] = delay.fd_delta;
    d["trim"] = delay.trim;
    d["slope_floor"] = delay.slope_floor;
    d["flat_tolerance"] = delay.flat_tolerance;
    d["per_tx_schedule"] = delay.per_tx_schedule;
    j["delay"] = d;

    json fe;
    fe["use_fixed_effects"] = fee.use_fixed_effects;
    fe["include_slope"] = fee.include_slope;
    fe["include_tx_controls"] = fee.include_tx_controls;
    fe["include_state_controls"] = fee.include_state_controls;
    fe["use_spline"] = fee.use_spline;
    fe["spline_degree"] = fee.spline_degree;
    fe["knot_quantiles"] = fee.knot_quantiles;
    fe["fee_floor_sat_vb"] = fee.fee_floor_sat_vb;
    fe["slope_floor"] = fee.slope_floor;
    j["fee"] = fe;

    j["bootstrap_b"] = bootstrap_b;
    j["run_bootstrap"] = run_bootstrap;
    j["run_rolling"] = run_rolling;
    j["rolling_windows"] = rolling_windows;
    j["run_cumulative"] = run_cumulative;
    j["oos_fractions"] = oos_fractions;
    j["fe_autocorr_max_lag"] = fe_autocorr_max_lag;
    j["seed"] = seed;
    return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
    json j = json::parse(text);
    RunConfig c;
    c.tx_file = j.value("tx_file", "");
    c.snapshot_file = j.value("snapshot_file", "");
    c.links_file = j.value("links_file", "");
    c.external_weights_file = j.value("external_weights_file", "");
    c.out_dir = j.value("out_dir", c.out_dir);
    c.window_secs = j.value("window_secs", c.window_secs);
    c.max_gap_secs = j.value("max_gap_secs", c.max_gap_secs);
    c.eps_resp = j.value("eps_resp", c.eps_resp);
    c.max_error_fraction = j.value("max_error_fraction", c.max_error_fraction);
    if (j.contains("forest")) {
        const auto& f = j["forest"];
        c.delay.forest.n_trees = f.value("n_trees", c.delay.forest.n_trees);
        c.delay.forest.max_depth = f.value("max_depth", c.delay.forest.max_depth);
        c.delay.forest.min_leaf = f.value("min_leaf", c.delay.forest.min_leaf);
        c.delay.forest.feature_subsample =
            f.value("feature_subsample", c.delay.forest.feature_subsample);
        c.delay.forest.bootstrap = f.value("bootstrap", c.delay.forest.bootstrap);
        c.delay.forest.seed = f.value("seed", c.delay.forest.seed);
        c.delay.forest.n_folds = f.value("n_folds", c.delay.forest.n_folds);
    }
    if (j.contains("delay")) {
        const auto& d = j["delay"];
        c.delay.grid_points = d.value("grid_points", c.delay.grid_points);
        c.delay.fd_delta = d.value("fd_delta", c.delay.fd_delta);
        c.delay.trim = d.value("trim", c.delay.trim);
        c.delay.slope_floor = d.value("slope_floor", c.delay.slope_floor);
        c.delay.flat_tolerance = d.value("flat_tolerance", c.delay.flat_tolerance);
        c.delay.per_tx_schedule = d.value("per_tx_schedule", c.delay.per_tx_schedule);
    }
    if (j.contains("fee")) {
        const auto& fe = j["fee"];
        c.fee.use_fixed_effects = fe.value("use_fixed_effects", c.fee.use_fixed_effects);
        c.fee.include_slope = fe.value("include_slope", c.fee.include_slope);
        c.fee.include_tx_controls = fe.value("include_tx_controls", c.fee.include_tx_controls);
        c.fee.include_state_controls =
            fe.value("include_state_controls", c.fee.include_state_controls);
        c.fee.use_spline = fe.value("use_spline", c.fee.use_spline);
        c.fee.spline_degree = fe.value("spline_degree", c.fee.spline_degree);
        if (fe.contains("knot_quantiles")) {
            c.fee.knot_quantiles = fe["knot_quantiles"].get<std::vector<double>>();
        }
        c.fee.fee_floor_sat_vb = fe.value("fee_floor_sat_vb", c.fee.fee_floor_sat_vb);
        c.fee.slope_floor = fe.value("slope_floor", c.fee.slope_floor);
    }
    c.bootstrap_b = j.value("bootstrap_b", c.bootstrap_b);
    c.run_bootstrap = j.value("run_bootstrap", c.run_bootstrap);
    c.run_rolling = j.value("run_rolling", c.run_rolling);
    c.rolling_windows = j.value("rolling_windows", c.rolling_windows);
    c.run_cumulative = j.value("run_cumulative", c.run_cumulative);
    if (j.contains("oos_fractions")) {
        c.oos_fractions = j["oos_fractions"].get<std::vector<double>>();
    }
    c.fe_autocorr_max_lag = j.value("fe_autocorr_max_lag", c.fe_autocorr_max_lag);
    c.seed = j.value("seed", c.seed);
    return c;
}

RunConfig RunConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write config: " + path);
    out << to_json() << '\n';
}

std::string RunManifest::to_json() const {
    json j;
    j["version"] = version;
    j["config_hash"] = config_hash;
    json in = json::object();
    for (const auto& [path, digest] : input_digests) in[path] = digest;
    j["inputs"] = in;
    json art = json::object();
    for (const auto& [name, digest] : artifact_digests) art[name] = digest;
    j["artifacts"] = art;
    return j.dump(2);
}

RunManifest run_pipeline(const RunConfig& config) {
    const auto t_start = std::chrono::steady_clock::now();
    fs::create_directories(config.out_dir);
    std::ofstream log(fs::path(config.out_dir) / "run.log");
    auto stamp = [&](const std::string& stage) {
        const auto dt = std::chrono::duration_cast<std::chrono::milliseconds>(
                            std::chrono::steady_clock::now() - t_start)
                            .count();
        log << stage << "\t" << dt << " ms\n" << std::flush;
    };

    RunManifest manifest;
    {
        // The run's identity is its inputs and parameters, not where the
        // artifacts land.
        RunConfig keyed = config;
        keyed.out_dir.clear();
        manifest.config_hash = fnv1a_hex(keyed.to_json());
    }
    manifest.input_digests.emplace_back(config.tx_file, file_digest(config.tx_file));
    manifest.input_digests.emplace_back(config.snapshot_file, file_digest(config.snapshot_file));
    if (!config.links_file.empty()) {
        manifest.input_digests.emplace_back(config.links_file, file_digest(config.links_file));
    }
    if (!config.external_weights_file.empty()) {
        manifest.input_digests.emplace_back(config.external_weights_file,
                                            file_digest(config.external_weights_file));
    }

    auto artifact = [&](const std::string& name) {
        return (fs::path(config.out_dir) / name).string();
    };
    auto record = [&](const std::string& name) {
        manifest.artifact_digests.emplace_back(name, file_digest(artifact(name)));
    };

    auto fail = [&](const std::string& stage, const std::exception& e) -> std::runtime_error {
        return std::runtime_error("pipeline stage '" + stage + "' failed: " + e.what());
    };

    // Ingest.
    IngestResult ing;
    try {
        IngestOptions opt;
        opt.window_secs = config.window_secs;
        opt.max_gap_secs = config.max_gap_secs;
        opt.eps_resp = config.eps_resp;
        opt.max_error_fraction = config.max_error_fraction;
        ing = ingest(config.tx_file, config.snapshot_file, config.links_file,
                     config.external_weights_file, opt);
    } catch (const std::exception& e) {
        throw fail("ingest", e);
    }
    {
        json j;
        j["records_in"] = ing.report.records_in;
        j["records_kept"] = ing.report.records_kept;
        j["records_dropped"] = ing.report.records_dropped;
        j["malformed_lines"] = ing.report.malformed_lines;
        j["dropped_no_state"] = ing.report.dropped_no_state;
        j["imputed_states"] = ing.report.imputed_states;
        j["weight_matched"] = ing.report.weight_correction.matched;
        j["weight_match_fraction"] = ing.report.weight_correction.match_fraction;
        j["weight_mean_delta"] = ing.report.weight_correction.mean_weight_delta;
        j["weight_rejected_rows"] = ing.report.weight_correction.rejected_rows;
        j["line_errors"] = ing.report.line_errors;
        std::ofstream out(artifact("ingest_report.json"));
        out << j.dump(2) << '\n';
        record("ingest_report.json");
    }
    write_tx_file(artifact("dataset.txs.jsonl"), ing.data.txs);
    record("dataset.txs.jsonl");
    stamp("ingest");

    // Ranked percentiles (rank step runs inside ingest; emit for inspection).
    {
        std::ofstream out(artifact("percentiles.csv"));
        out << "tx_id,epoch_id,percentile\n";
        for (const auto& tx : ing.data.txs) {
            if (!tx.percentile) continue;
            out << tx.tx_id << ',' << tx.epoch_id << ',' << tx.percentile->str() << '\n';
        }
        record("percentiles.csv");
    }
    stamp("rank");

    // Stage 1.
    stage1::DelayFit delay;
    try {
        stage1::DelayStageConfig dcfg = config.delay;
        dcfg.forest.seed = config.seed;
        delay = stage1::run_delay_stage(ing.data, dcfg);
    } catch (const std::exception& e) {
        throw fail("fit-delay", e);
    }
    write_delay_fit(artifact("delayfit.tsv"), delay, ing.data);
    record("delayfit.tsv");
    stamp("fit-delay");

    // Stage 2.
    stage2::FeeFit fee;
    stage2::FeeDesign design;
    try {
        design = stage2::build_fee_design(ing.data, delay, config.fee);
        fee = stage2::fit_fe_ols(design, config.fee);
    } catch (const std::exception& e) {
        throw fail("fit-fee", e);
    }
    write_fee_fit(artifact("feefit.json"), fee);
    record("feefit.json");
    write_coef_table(artifact("coef_table.tsv"), fee);
    record("coef_table.tsv");
    write_fitted_vs_actual(artifact("plot_fitted_vs_actual.csv"), design, fee);
    record("plot_fitted_vs_actual.csv");
    write_residual_hist(artifact("plot_residual_hist.csv"), fee);
    record("plot_residual_hist.csv");
    write_coef_ci(artifact("plot_coef_ci.csv"), fee);
    record("plot_coef_ci.csv");
    stamp("fit-fee");

    // Bootstrap (optional).
    if (config.run_bootstrap) {
        try {
            stage1::DelayStageConfig dcfg = config.delay;
            dcfg.forest.seed = config.seed;
            stage2::BootstrapResult bres = stage2::epoch_bootstrap(
                ing.data, dcfg, config.fee, config.bootstrap_b, config.seed);
            write_bootstrap_result(artifact("bootstrap.json"), bres);
            record("bootstrap.json");
        } catch (const std::exception& e) {
            throw fail("bootstrap", e);
        }
        stamp("bootstrap");
    }

    // Diagnostics.
    try {
        const std::vector<diag::IccEntry> iccs = diag::icc_report(design);
        std::ofstream out(artifact("diag_icc.csv"));
        out << "variable,icc,mean_cluster_size,design_effect,effective_n\n";
        for (const auto& e : iccs) {
            out << e.name << ',' << fmt_double(e.icc) << ',' << fmt_double(e.mean_cluster_size)
                << ',' << fmt_double(e.design_effect) << ',' << fmt_double(e.effective_n) << '\n';
        }
        out.close();
        record("diag_icc.csv");

        std::vector<double> y(design.y.data(), design.y.data() + design.y.size());
        const diag::VarianceShares vs = diag::variance_decomposition(y, design.cluster_of);
        std::vector<double> resid = fee.residuals;
        const diag::VarianceShares vr = diag::variance_decomposition(resid, design.cluster_of);
        std::ofstream vout(artifact("diag_variance.csv"));
        vout << "series,between,within,total,icc\n";
        vout << "log_fee_rate," << fmt_double(vs.between) << ',' << fmt_double(vs.within) << ','
             << fmt_double(vs.total) << ',' << fmt_double(vs.icc) << '\n';
        vout << "residuals," << fmt_double(vr.between) << ',' << fmt_double(vr.within) << ','
             << fmt_double(vr.total) << ',' << fmt_double(vr.icc) << '\n';
        vout.close();
        record("diag_variance.csv");

        if (static_cast<int>(fee.xi.size()) >= config.fe_autocorr_max_lag + 2) {
            std::vector<double> xi;
            xi.reserve(fee.xi.size());
            for (const auto& [id, v] : fee.xi) xi.push_back(v);
            const std::vector<double> rho = diag::fe_autocorrelation(xi, config.fe_autocorr_max_lag);
            std::ofstream aout(artifact("diag_fe_autocorr.csv"));
            aout << "lag,rho\n";
            for (std::size_t k = 0; k < rho.size(); ++k) {
                aout << (k + 1) << ',' << fmt_double(rho[k]) << '\n';
            }
            aout.close();
            record("diag_fe_autocorr.csv");
        }

        if (!config.oos_fractions.empty() && ing.data.epochs.size() >= 4) {
            stage1::DelayStageConfig dcfg = config.delay;
            dcfg.forest.seed = config.seed;
            const diag::OosReport oos =
                diag::expanding_oos(ing.data, dcfg, config.fee, config.oos_fractions);
            std::ofstream oout(artifact("diag_oos.csv"));
            oout << "train_fraction,train_epochs,test_epochs,r2_within_full,"
                    "r2_within_restricted,r2_strict,delta_r2,degenerate\n";
            for (const auto& s : oos.splits) {
                oout << fmt_double(s.train_fraction) << ',' << s.train_epochs << ','
                     << s.test_epochs << ',' << fmt_double(s.r2_within_full) << ','
                     << fmt_double(s.r2_within_restricted) << ',' << fmt_double(s.r2_strict)
                     << ',' << fmt_double(s.delta_r2) << ',' << (s.degenerate ? 1 : 0) << '\n';
            }
            oout.close();
            record("diag_oos.csv");
        }

        if (config.run_rolling) {
            stage1::DelayStageConfig dcfg = config.delay;
            dcfg.forest.seed = config.seed;
            const diag::RollingReport rr =
                diag::rolling_fit(ing.data, dcfg, config.fee, config.rolling_windows);
            std::ofstream rout(artifact("diag_rolling.csv"));
            rout << "variable,range,range_over_pooled_se\n";
            for (std::size_t j = 0; j < rr.names.size(); ++j) {
                rout << rr.names[j] << ',' << fmt_double(rr.coef_range[j]) << ','
                     << fmt_double(rr.range_over_se[j]) << '\n';
            }
            rout.close();
            record("diag_rolling.csv");
        }

        if (config.run_cumulative && ing.data.epochs.size() >= 6) {
            stage1::DelayStageConfig dcfg = config.delay;
            dcfg.forest.seed = config.seed;
            std::vector<std::size_t> checkpoints;
            const std::size_t e_total = ing.data.epochs.size();
            for (int i = 1; i <= 5; ++i) {
                checkpoints.push_back(std::max<std::size_t>(2, e_total * i / 5));
            }
            const diag::PrecisionCurve pc =
                diag::cumulative_precision(ing.data, dcfg, config.fee, checkpoints);
            std::ofstream pout(artifact("diag_precision.csv"));
            pout << "n_epochs,coef,clustered_se\n";
            for (const auto& pt : pc.points) {
                pout << pt.n_epochs << ',' << fmt_double(pt.coef) << ','
                     << fmt_double(pt.clustered_se) << '\n';
            }
            pout.close();
            record("diag_precision.csv");
        }
    } catch (const std::exception& e) {
        throw fail("diagnose", e);
    }
    stamp("diagnose");

    {
        std::ofstream out(artifact("manifest.json"));
        out << manifest.to_json() << '\n';
    }
    stamp("done");
    return manifest;
}

}  // namespace io
}  // namespace feelab

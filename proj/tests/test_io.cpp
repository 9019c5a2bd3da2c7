// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <doctest.h>

#include <stdexcept>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "feelab/io/formats.h"
#include "feelab/io/pipeline.h"
#include "helpers.h"

using namespace feelab;
using namespace feelab::io;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("feelab-test-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter()++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    static int& counter() {
        static int c = 0;
        return c;
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_SUITE("ingest") {
    TEST_CASE("export then ingest round-trips byte-identically") {
        auto ds = sim::generate_structural(testutil::small_structural(3, 120, 71));
        TempDir dir;
        write_tx_file(dir.file("txs.jsonl"), ds.data.txs);
        write_snapshot_file(dir.file("snaps.csv"), ds.data.snapshots);

        IngestOptions opt;
        IngestResult res = ingest(dir.file("txs.jsonl"), dir.file("snaps.csv"), "", "", opt);
        CHECK(res.report.records_in == static_cast<std::int64_t>(ds.data.txs.size()));
        CHECK(res.report.records_kept == res.report.records_in);
        CHECK(res.report.malformed_lines == 0);
        REQUIRE(res.data.txs.size() == ds.data.txs.size());

        write_tx_file(dir.file("txs2.jsonl"), res.data.txs);
        write_snapshot_file(dir.file("snaps2.csv"), res.data.snapshots);
        CHECK(slurp(dir.file("txs.jsonl")) == slurp(dir.file("txs2.jsonl")));
        CHECK(slurp(dir.file("snaps.csv")) == slurp(dir.file("snaps2.csv")));

        // Percentiles agree with the generator's ranking.
        for (std::size_t i = 0; i < res.data.txs.size(); ++i) {
            CHECK(res.data.txs[i].percentile == ds.data.txs[i].percentile);
        }
    }

    TEST_CASE("malformed lines are counted, good lines survive") {
        TempDir dir;
        {
            std::ofstream out(dir.file("txs.jsonl"));
            out << R"({"tx_id":"a","entry_ts":100,"fee_sats":500,"weight_wu":400,"vsize_vb":100})"
                << "\n";
            out << "this is not json\n";
            out << R"({"tx_id":"b","entry_ts":160,"fee_sats":600,"weight_wu":400,"vsize_vb":100})"
                << "\n";
        }
        {
            std::ofstream out(dir.file("snaps.csv"));
            out << "ts,mempool_bytes,tx_count,block_height,secs_since_last_block,blockspace_util\n";
            out << "90,1000,10,5,30,0.5\n";
            out << "150,1100,11,5,90,0.6\n";
        }
        IngestOptions opt;
        opt.max_error_fraction = 0.5;
        IngestResult res = ingest(dir.file("txs.jsonl"), dir.file("snaps.csv"), "", "", opt);
        CHECK(res.report.records_in == 3);
        CHECK(res.report.malformed_lines == 1);
        CHECK(res.report.records_kept == 2);
        CHECK(res.report.records_in == res.report.records_kept + res.report.records_dropped);
        REQUIRE(res.report.line_errors.size() == 1);
        CHECK(res.report.line_errors[0].find("line 2") != std::string::npos);
    }

    TEST_CASE("missing required fields are reported with the line number") {
        TempDir dir;
        {
            std::ofstream out(dir.file("txs.jsonl"));
            out << R"({"tx_id":"a","entry_ts":100,"fee_sats":500,"weight_wu":400,"vsize_vb":100})"
                << "\n";
            out << R"({"tx_id":"nofee","entry_ts":130,"weight_wu":400,"vsize_vb":100})" << "\n";
        }
        {
            std::ofstream out(dir.file("snaps.csv"));
            out << "90,1000,10,5,30,0.5\n";
        }
        IngestOptions opt;
        opt.max_error_fraction = 0.9;
        IngestResult res = ingest(dir.file("txs.jsonl"), dir.file("snaps.csv"), "", "", opt);
        CHECK(res.report.malformed_lines == 1);
        REQUIRE_FALSE(res.report.line_errors.empty());
        CHECK(res.report.line_errors[0].find("line 2") != std::string::npos);
        CHECK(res.report.line_errors[0].find("fee_sats") != std::string::npos);
    }

    TEST_CASE("error budget aborts the run") {
        TempDir dir;
        {
            std::ofstream out(dir.file("txs.jsonl"));
            out << "junk\n";
            out << "more junk\n";
            out << R"({"tx_id":"a","entry_ts":100,"fee_sats":500,"weight_wu":400,"vsize_vb":100})"
                << "\n";
        }
        {
            std::ofstream out(dir.file("snaps.csv"));
            out << "90,1000,10,5,30,0.5\n";
        }
        IngestOptions opt;
        opt.max_error_fraction = 0.05;
        CHECK_THROWS_AS(ingest(dir.file("txs.jsonl"), dir.file("snaps.csv"), "", "", opt),
                        std::runtime_error);
    }

    TEST_CASE("empty snapshot file aborts with the epoch-state message") {
        TempDir dir;
        {
            std::ofstream out(dir.file("txs.jsonl"));
            out << R"({"tx_id":"a","entry_ts":100,"fee_sats":500,"weight_wu":400,"vsize_vb":100})"
                << "\n";
        }
        {
            std::ofstream out(dir.file("snaps.csv"));
            out << "ts,mempool_bytes,tx_count,block_height,secs_since_last_block,blockspace_util\n";
        }
        CHECK_THROWS_WITH_AS(ingest(dir.file("txs.jsonl"), dir.file("snaps.csv"), "", ""),
                             "no epoch state available: snapshot file is empty",
                             std::runtime_error);
    }

    TEST_CASE("links and external weights flow through the pipeline") {
        TempDir dir;
        {
            std::ofstream out(dir.file("txs.jsonl"));
            out << R"({"tx_id":"p","entry_ts":100,"fee_sats":100,"weight_wu":400,"vsize_vb":100})"
                << "\n";
            out << R"({"tx_id":"c","entry_ts":120,"fee_sats":900,"weight_wu":400,"vsize_vb":100})"
                << "\n";
        }
        {
            std::ofstream out(dir.file("snaps.csv"));
            out << "90,1000,10,5,30,0.5\n";
        }
        write_links_file(dir.file("links.csv"), {{"c", "p"}});
        std::map<std::string, core::ExternalSize> ext = {{"p", {90, 360}}};
        write_external_weights_file(dir.file("ext.csv"), ext);

        IngestResult res = ingest(dir.file("txs.jsonl"), dir.file("snaps.csv"),
                                  dir.file("links.csv"), dir.file("ext.csv"));
        REQUIRE(res.data.txs.size() == 1);
        CHECK(res.data.txs[0].cpfp_package);
        CHECK(res.data.txs[0].vsize_vb == 190);  // corrected parent (90) + child (100)
        CHECK(res.report.weight_correction.matched == 1);
    }
}

TEST_SUITE("artifacts") {
    TEST_CASE("delay fit artifact round-trips slopes by tx id") {
        auto ds = sim::generate_structural(testutil::small_structural(3, 120, 73));
        auto dcfg = testutil::fast_delay_cfg(5, 6, 5, 15, 2);
        stage1::DelayFit fit = stage1::run_delay_stage(ds.data, dcfg);
        TempDir dir;
        write_delay_fit(dir.file("delay.tsv"), fit, ds.data);
        DelayArtifact art = read_delay_fit(dir.file("delay.tsv"));
        stage1::DelayFit back = delay_fit_for_dataset(art, ds.data);
        for (std::size_t i = 0; i < ds.data.txs.size(); ++i) {
            if (std::isfinite(fit.slope[i])) {
                CHECK(back.slope[i] == doctest::Approx(fit.slope[i]).epsilon(1e-12));
            }
        }
        CHECK(art.oof_r2 == doctest::Approx(fit.oof_r2).epsilon(1e-12));
    }

    TEST_CASE("fee fit artifact reloads and predicts identically") {
        auto ds = sim::generate_structural(testutil::small_structural(3, 150, 75));
        auto dcfg = testutil::fast_delay_cfg(5, 6, 5, 15, 2);
        stage1::DelayFit delay = stage1::run_delay_stage(ds.data, dcfg);
        stage2::FeeSpec spec;
        stage2::FeeDesign design = stage2::build_fee_design(ds.data, delay, spec);
        stage2::FeeFit fit = stage2::fit_fe_ols(design, spec);

        TempDir dir;
        write_fee_fit(dir.file("fee.json"), fit);
        stage2::FeeFit back = read_fee_fit(dir.file("fee.json"));
        CHECK(back.names == fit.names);
        CHECK((back.coef - fit.coef).cwiseAbs().maxCoeff() == 0.0);
        CHECK(back.psi == fit.psi);

        Eigen::MatrixXd rows = design.x.topRows(4);
        auto a = stage2::smearing_predict(fit, rows);
        auto b = stage2::smearing_predict(back, rows);
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

        write_coef_table(dir.file("table.tsv"), fit);
        const std::string table = slurp(dir.file("table.tsv"));
        CHECK(table.find("log_slope") != std::string::npos);
        CHECK(table.find("cluster_se") != std::string::npos);
        CHECK(table.find("***") != std::string::npos);
    }

    TEST_CASE("config round-trips through json") {
        RunConfig cfg;
        cfg.tx_file = "a.jsonl";
        cfg.snapshot_file = "b.csv";
        cfg.delay.forest.n_trees = 37;
        cfg.fee.use_spline = true;
        cfg.oos_fractions = {0.5, 0.75};
        cfg.seed = 99;
        RunConfig back = RunConfig::from_json(cfg.to_json());
        CHECK(back.to_json() == cfg.to_json());
        CHECK(back.delay.forest.n_trees == 37);
        CHECK(back.fee.use_spline);
    }

    TEST_CASE("defaults match the documented baseline") {
        RunConfig cfg;
        CHECK(cfg.window_secs == 1800);
        CHECK(cfg.delay.forest.n_trees == 200);
        CHECK(cfg.delay.forest.max_depth == 15);
        CHECK(cfg.delay.forest.min_leaf == 20);
        CHECK(cfg.delay.forest.n_folds == 5);
        CHECK(cfg.delay.grid_points == 99);
        CHECK(cfg.delay.fd_delta == 0.05);
        CHECK(cfg.delay.trim == 0.01);
        CHECK(cfg.fee.fee_floor_sat_vb == 1.0);
        CHECK(cfg.fee.knot_quantiles == std::vector<double>{0.2, 0.4, 0.6, 0.8, 0.95});
        CHECK(cfg.fee.spline_degree == 3);
    }
}

TEST_SUITE("pipeline") {
    TEST_CASE("full run emits every artifact and is byte-deterministic") {
        auto ds = sim::generate_structural(testutil::small_structural(4, 150, 77));
        TempDir dir;
        write_tx_file(dir.file("txs.jsonl"), ds.data.txs);
        write_snapshot_file(dir.file("snaps.csv"), ds.data.snapshots);

        RunConfig cfg;
        cfg.tx_file = dir.file("txs.jsonl");
        cfg.snapshot_file = dir.file("snaps.csv");
        cfg.delay.forest.n_trees = 6;
        cfg.delay.forest.max_depth = 5;
        cfg.delay.forest.min_leaf = 15;
        cfg.delay.forest.n_folds = 2;
        cfg.oos_fractions = {0.5};
        cfg.fe_autocorr_max_lag = 2;
        cfg.out_dir = dir.file("run1");
        RunManifest m1 = run_pipeline(cfg);
        cfg.out_dir = dir.file("run2");
        RunManifest m2 = run_pipeline(cfg);

        CHECK(m1.config_hash == m2.config_hash);
        REQUIRE(m1.artifact_digests.size() == m2.artifact_digests.size());
        for (std::size_t i = 0; i < m1.artifact_digests.size(); ++i) {
            CHECK(m1.artifact_digests[i].first == m2.artifact_digests[i].first);
            CHECK(m1.artifact_digests[i].second == m2.artifact_digests[i].second);
        }
        CHECK(slurp(dir.file("run1") + "/manifest.json") ==
              slurp(dir.file("run2") + "/manifest.json"));

        for (const char* name :
             {"ingest_report.json", "dataset.txs.jsonl", "percentiles.csv", "delayfit.tsv",
              "feefit.json", "coef_table.tsv", "plot_fitted_vs_actual.csv",
              "plot_residual_hist.csv", "plot_coef_ci.csv", "diag_icc.csv", "diag_variance.csv",
              "diag_oos.csv", "manifest.json"}) {
            CHECK(fs::exists(dir.file("run1") + "/" + std::string(name)));
        }
    }

    TEST_CASE("stage failures name the stage") {
        TempDir dir;
        {
            std::ofstream out(dir.file("txs.jsonl"));
            out << R"({"tx_id":"a","entry_ts":100,"fee_sats":500,"weight_wu":400,"vsize_vb":100})"
                << "\n";
        }
        {
            std::ofstream out(dir.file("snaps.csv"));
            out << "90,1000,10,5,30,0.5\n";
        }
        RunConfig cfg;
        cfg.tx_file = dir.file("txs.jsonl");
        cfg.snapshot_file = dir.file("snaps.csv");
        cfg.out_dir = dir.file("run");
        cfg.delay.forest.n_folds = 5;  // more folds than epochs
        try {
            run_pipeline(cfg);
            FAIL("expected a stage failure");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find("fit-delay") != std::string::npos);
        }
    }
}

// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_IO_PIPELINE_H
#define FEELAB_IO_PIPELINE_H

#include <cstdint>
#include <string>
#include <vector>

#include "feelab/io/formats.h"
#include "feelab/stage1/crossfit.h"
#include "feelab/stage2/fee_model.h"

namespace feelab {
namespace io {

// Every knob of a reproducible run. Defaults follow the baseline
// configuration used throughout: 30-minute epochs, a 200-tree depth-15
// forest with 5 epoch folds, a 99-point grid with delta 0.05 and trim 0.01,
// quantile knots {.2,.4,.6,.8,.95} and a 1 sat/vB fee floor.
struct RunConfig {
    std::string tx_file;
    std::string snapshot_file;
    std::string links_file;
    std::string external_weights_file;
    std::string out_dir = "runs/latest";

    std::int64_t window_secs = core::kDefaultWindowLen;
    std::int64_t max_gap_secs = 300;
    double eps_resp = core::kDefaultEpsResp;
    double max_error_fraction = 0.05;

    stage1::DelayStageConfig delay;
    stage2::FeeSpec fee;

    int bootstrap_b = 200;
    bool run_bootstrap = false;   // opt in: re-runs both stages B times
    bool run_rolling = false;
    int rolling_windows = 5;
    bool run_cumulative = false;
    std::vector<double> oos_fractions = {0.8};
    int fe_autocorr_max_lag = 48;

    std::uint64_t seed = 1;

    std::string to_json() const;
    static RunConfig from_json(const std::string& text);
    static RunConfig load(const std::string& path);
    void save(const std::string& path) const;
};

struct RunManifest {
    std::string config_hash;
    std::vector<std::pair<std::string, std::string>> input_digests;    // path, digest
    std::vector<std::pair<std::string, std::string>> artifact_digests; // name, digest
    std::string version = "feelab 1.0";

    std::string to_json() const;
};

// ingest -> rank -> stage 1 -> stage 2 -> diagnostics. Persists every
// intermediate artifact under out_dir and returns the manifest (also written
// to out_dir/manifest.json). Wall-clock timings go to out_dir/run.log, which
// is deliberately outside the manifest so that re-runs are byte-identical.
RunManifest run_pipeline(const RunConfig& config);

}  // namespace io
}  // namespace feelab

#endif  // FEELAB_IO_PIPELINE_H

// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_IO_FORMATS_H
#define FEELAB_IO_FORMATS_H

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "feelab/core/cpfp.h"
#include "feelab/core/types.h"
#include "feelab/core/weights.h"
#include "feelab/sim/structural.h"
#include "feelab/stage1/crossfit.h"
#include "feelab/stage2/bootstrap.h"
#include "feelab/stage2/fee_model.h"

namespace feelab {
namespace io {

// Shortest round-trip decimal rendering (deterministic across runs).
std::string fmt_double(double v);

// 64-bit FNV-1a, hex-encoded. Content fingerprints for the manifest; not a
// cryptographic hash.
std::string fnv1a_hex(const std::string& bytes);
std::string file_digest(const std::string& path);

// --- Raw record files --------------------------------------------------------
// Transactions: JSON lines with named fields. Snapshots: CSV
// (ts,mempool_bytes,tx_count,block_height,secs_since_last_block,blockspace_util).
// CPFP links and external weights: two- and three-column CSV.

void write_tx_file(const std::string& path, const std::vector<core::TxRecord>& txs);
void write_snapshot_file(const std::string& path, const std::vector<core::Snapshot>& snaps);
void write_links_file(const std::string& path, const std::vector<core::ParentLink>& links);
void write_external_weights_file(const std::string& path,
                                 const std::map<std::string, core::ExternalSize>& ext);
void write_truth_file(const std::string& path, const sim::StructuralTruth& truth);

std::vector<core::Snapshot> read_snapshot_file(const std::string& path);
std::vector<core::ParentLink> read_links_file(const std::string& path);
std::map<std::string, core::ExternalSize> read_external_weights_file(const std::string& path);

struct IngestOptions {
    std::int64_t window_secs = core::kDefaultWindowLen;
    std::int64_t max_gap_secs = 300;
    double eps_resp = core::kDefaultEpsResp;
    double max_error_fraction = 0.05;
};

struct IngestReport {
    std::int64_t records_in = 0;
    std::int64_t records_kept = 0;
    std::int64_t records_dropped = 0;   // malformed + no-state drops
    std::int64_t malformed_lines = 0;
    std::int64_t dropped_no_state = 0;
    std::int64_t imputed_states = 0;
    core::CorrectionReport weight_correction;
    std::vector<std::string> line_errors;  // first few, with line numbers
};

struct IngestResult {
    core::Dataset data;  // corrected, package-collapsed, epoch-assigned, ranked
    IngestReport report;
};

// Parses and validates the record files, applies the weight correction, the
// package collapse and the epoch assignment, then ranks every epoch.
// Malformed lines are counted and reported; passing the error-fraction budget
// aborts. An empty snapshot file aborts with "no epoch state available".
IngestResult ingest(const std::string& tx_path, const std::string& snapshot_path,
                    const std::string& links_path = "",
                    const std::string& external_weights_path = "",
                    const IngestOptions& options = {});

// --- Fitted artifacts --------------------------------------------------------

void write_delay_fit(const std::string& path, const stage1::DelayFit& fit,
                     const core::Dataset& data);

// Slopes and predictions keyed by tx id (for stage-2 runs from files).
struct DelayArtifact {
    std::map<std::string, std::pair<double, double>> by_tx;  // id -> (pred, slope)
    double oof_r2 = 0.0;
    double oof_rmse = 0.0;
    double trivial_share = 0.0;
};
DelayArtifact read_delay_fit(const std::string& path);

// Rebuilds a slope vector aligned with the dataset from a stored artifact.
stage1::DelayFit delay_fit_for_dataset(const DelayArtifact& artifact, const core::Dataset& data);

void write_fee_fit(const std::string& path, const stage2::FeeFit& fit);
stage2::FeeFit read_fee_fit(const std::string& path);

// Table 2 style coefficient table (name, estimate, clustered SE, t, p, stars).
void write_coef_table(const std::string& path, const stage2::FeeFit& fit);

void write_bootstrap_result(const std::string& path, const stage2::BootstrapResult& res);

// Plot-data emitters (delimited text for external plotting).
void write_fitted_vs_actual(const std::string& path, const stage2::FeeDesign& design,
                            const stage2::FeeFit& fit, std::size_t max_rows = 10000);
void write_residual_hist(const std::string& path, const stage2::FeeFit& fit, int bins = 60);
void write_coef_ci(const std::string& path, const stage2::FeeFit& fit);

}  // namespace io
}  // namespace feelab

#endif  // FEELAB_IO_FORMATS_H

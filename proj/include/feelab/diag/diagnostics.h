// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_DIAG_DIAGNOSTICS_H
#define FEELAB_DIAG_DIAGNOSTICS_H

#include <cstdint>
#include <string>
#include <vector>

#include "feelab/core/types.h"
#include "feelab/stage1/crossfit.h"
#include "feelab/stage2/fee_model.h"

namespace feelab {
namespace diag {

// --- Intraclass correlation / design effects -------------------------------

struct IccEntry {
    std::string name;
    double icc = 0.0;           // one-way ANOVA estimator, clipped to [0,1]
    double mean_cluster_size = 0.0;
    double design_effect = 1.0;  // 1 + (m - 1) * icc
    double effective_n = 0.0;    // n / deff
};

IccEntry icc(const std::vector<double>& values, const std::vector<std::int64_t>& cluster_of,
             const std::string& name = "");

// ICC for the outcome and every design column of a fitted fee equation.
std::vector<IccEntry> icc_report(const stage2::FeeDesign& design);

// --- Variance decomposition -------------------------------------------------

struct VarianceShares {
    double between = 0.0;  // size-weighted variance of cluster means
    double within = 0.0;   // mean within-cluster variance
    double total = 0.0;
    double icc = 0.0;      // between / total
};

VarianceShares variance_decomposition(const std::vector<double>& values,
                                      const std::vector<std::int64_t>& cluster_of);

// --- Epoch fixed-effect autocorrelation -------------------------------------

// Sample autocorrelations at lags 1..max_lag of a time-ordered series.
std::vector<double> fe_autocorrelation(const std::vector<double>& xi, int max_lag);

// --- Rolling windows ---------------------------------------------------------

struct RollingWindowFit {
    std::size_t first_epoch = 0;  // position range within the epoch list
    std::size_t last_epoch = 0;
    std::vector<std::string> names;
    std::vector<double> coef;
    std::vector<double> se;
};

struct RollingReport {
    std::vector<RollingWindowFit> windows;
    std::vector<std::string> names;
    std::vector<double> coef_range;      // max - min across windows
    std::vector<double> range_over_se;   // range / pooled SE
};

RollingReport rolling_fit(const core::Dataset& data, const stage1::DelayStageConfig& delay_cfg,
                          const stage2::FeeSpec& fee_spec, int n_windows = 5);

// --- Expanding-window out-of-sample R-squared --------------------------------

struct OosSplit {
    double train_fraction = 0.0;
    std::size_t train_epochs = 0;
    std::size_t test_epochs = 0;
    double r2_within_full = 0.0;        // protocol 1
    double r2_within_restricted = 0.0;  // protocol 2 (slope omitted)
    double r2_strict = 0.0;             // protocol 3
    double delta_r2 = 0.0;              // protocol 1 - protocol 2
    bool degenerate = false;            // test variance too small for an R2
};

struct OosReport {
    std::vector<OosSplit> splits;
};

OosReport expanding_oos(const core::Dataset& data, const stage1::DelayStageConfig& delay_cfg,
                        const stage2::FeeSpec& fee_spec, const std::vector<double>& fractions);

// --- Cumulative precision -----------------------------------------------------

struct PrecisionPoint {
    std::size_t n_epochs = 0;
    double coef = 0.0;
    double clustered_se = 0.0;
};

struct PrecisionCurve {
    std::vector<PrecisionPoint> points;  // chronological accumulation
    double log_log_slope = 0.0;          // regression of log SE on log epochs
};

PrecisionCurve cumulative_precision(const core::Dataset& data,
                                    const stage1::DelayStageConfig& delay_cfg,
                                    const stage2::FeeSpec& fee_spec,
                                    const std::vector<std::size_t>& checkpoints,
                                    const std::string& coef_name = "log_slope");

// Contiguous epoch subset (by position in the epoch list, time order).
core::Dataset subset_epoch_range(const core::Dataset& data, std::size_t first, std::size_t count);

}  // namespace diag
}  // namespace feelab

#endif  // FEELAB_DIAG_DIAGNOSTICS_H

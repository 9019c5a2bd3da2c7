// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_STAGE1_CROSSFIT_H
#define FEELAB_STAGE1_CROSSFIT_H

#include <cstdint>
#include <vector>

#include "feelab/core/types.h"
#include "feelab/stage1/forest.h"

namespace feelab {
namespace stage1 {

struct DelayStageConfig {
    ForestConfig forest;
    int grid_points = 99;        // percentile grid for the epoch sweep
    double fd_delta = 0.05;      // finite-difference step
    double trim = 0.01;          // boundary trimming constant
    double slope_floor = 1e-6;   // floor applied before logs downstream
    double flat_tolerance = 1e-3;  // max grid slope below this marks a trivial epoch
    bool per_tx_schedule = false;  // sweep each transaction's own covariates
};

// Weakly decreasing delay schedule on a percentile grid, linearly
// interpolated between grid points and clamped at the ends.
struct EpochSchedule {
    std::int64_t epoch_id = -1;
    std::vector<double> grid;
    std::vector<double> values;

    double eval(double p) const;
};

struct GradientRegimeReport {
    std::vector<double> max_grid_slope;  // per epoch
    std::vector<char> trivial;           // max slope < flat_tolerance
    double trivial_share = 0.0;
};

struct DelayFit {
    std::vector<int> fold_of_epoch;            // epoch index -> fold
    std::vector<Forest> fold_forests;          // fold -> forest trained without it
    std::vector<EpochSchedule> schedules;      // per epoch (median sweep)
    std::vector<double> predicted_log_wait;    // per tx, out-of-fold; NaN if not scored
    std::vector<double> slope;                 // per tx, >= 0; NaN if not scored
    std::vector<double> feature_importance;
    double oof_r2 = 0.0;
    double oof_rmse = 0.0;
    std::int64_t n_scored = 0;
    GradientRegimeReport regime;
};

// Stage-1 features for one transaction: {percentile, blockspace utilization,
// mempool bytes, mempool tx count}. The response is log(wait_seconds + 1).
constexpr std::size_t kDelayFeatureCount = 4;

// Deterministic epoch-level fold assignment by seeded hash of epoch_id.
// Throws if k exceeds the number of epochs or any training side comes up empty.
std::vector<int> assign_folds(const std::vector<core::EpochState>& epochs, int k,
                              std::uint64_t seed);

// Out-of-fold predictions only (no schedules or slopes).
DelayFit crossfit_predict(const core::Dataset& data, const DelayStageConfig& cfg);

// Median-sweep monotone schedule for one epoch: non-priority features pinned
// at the epoch medians, forest evaluated over the percentile grid, isotonic
// projection applied.
EpochSchedule monotone_schedule(const Forest& forest, const core::Dataset& data,
                                std::size_t epoch_index, int grid_points);

// Symmetric finite difference on a monotone schedule, evaluated at clipped
// points p +- delta (clipped into [trim, 1 - trim]). Nonnegative.
double local_slope(const EpochSchedule& schedule, double p, double delta, double trim);

// Full stage 1: cross-fitted predictions, per-epoch monotone schedules,
// per-transaction local slopes and the gradient-regime report.
DelayFit run_delay_stage(const core::Dataset& data, const DelayStageConfig& cfg);

}  // namespace stage1
}  // namespace feelab

#endif  // FEELAB_STAGE1_CROSSFIT_H

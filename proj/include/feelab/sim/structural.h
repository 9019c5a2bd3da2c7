// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_SIM_STRUCTURAL_H
#define FEELAB_SIM_STRUCTURAL_H

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "feelab/core/types.h"

namespace feelab {
namespace sim {

// Synthetic-market generator with a known delay technology and known delay
// costs, used to validate that the two-stage estimator recovers its ground
// truth.
//
// The delay curve of each epoch is a weakly decreasing staircase in the
// priority percentile: jumps sit on a fixed lattice while the log step
// heights grow by epoch-specific random increments. Two design choices make
// the recovery exercise exact rather than approximate. First, the delay
// gradient entering the fee equation is the fixed-step finite-difference
// slope of that staircase - the same functional the estimation pipeline
// computes - evaluated on the same percentile grid, step and trimming
// constants. Second, with the jump lattice spaced at exactly the
// finite-difference step, every window covers two jumps and the gradient is
// weakly increasing in priority, so fees are strictly increasing in the
// urgency composite and the pipeline's fee-rate ranking reproduces the
// generator's percentiles exactly.
struct StructuralConfig {
    int n_epochs = 50;
    int txs_per_epoch = 2000;

    // Staircase technology. Jumps at first_jump + jump_spacing * j; log step
    // heights grow by U(0, step_log_gap) per step, re-drawn every epoch.
    // level(u) = level_base + level_util * u is the curve level and
    // scale(u) = scale_base + scale_util * u the total drop, u = blockspace
    // utilization.
    // Jumps sit mid-cell on the percentile grid (0.045, 0.145, ...): a jump
    // exactly on a grid point would move across cells under floating-point
    // noise and break the window-cancellation geometry that keeps the
    // finite-difference gradient monotone. The log jump masses follow two
    // fixed irregular growth patterns blended by utilization, so the curve
    // steepens with congestion and the technology is a deterministic
    // function of the state features the delay model observes.
    double first_jump = 0.045;
    double jump_spacing = 0.10;
    int n_jumps = 10;
    double scale_base = 5.0;
    double scale_util = 0.4;
    double level_base = 8.5;
    double level_util = 0.2;
    double wait_noise_sd = 0.4;  // log-seconds

    // Finite-difference convention mirrored from the estimator (grid of
    // grid_points percentiles, symmetric step fd_delta, trimming at trim).
    int grid_points = 99;
    double fd_delta = 0.05;
    double trim = 0.01;
    // The fee-side gradient is flattened outside this percentile band, where
    // the trimmed finite-difference window makes the raw slope non-monotone.
    double flatten_below = 0.06;
    double flatten_above = 0.985;

    // Delay-cost population (lognormal) and its observable channel: total
    // output value is proportional to the cost draw, so log(total output)
    // carries the preference term of the fee equation. The location and
    // scale of the cost distribution move epoch by epoch, as do the flag
    // shares: heterogeneous urgency mixes keep the within-epoch rank
    // transform from collapsing onto a single pooled shape.
    double cost_mu = 0.0;
    double cost_sigma = 1.0;
    double cost_mu_spread = 0.8;     // per-epoch location shift, U(-s, s)
    double cost_sigma_lo = 0.4;      // per-epoch scale, U(lo, hi) * cost_sigma
    double cost_sigma_hi = 2.2;

    // Fee equation: log fee rate =
    //   alpha0 + 1.0 * log D + beta' X + theta' S + epoch shock (+ fee_noise_sd * N(0,1)).
    // The level keeps essentially every draw above the 1 sat/vB relay floor,
    // so the intensive-margin fit sees the whole population.
    double alpha0 = -16.0;
    double beta_rbf = 0.65;
    double beta_cpfp = -0.16;
    double beta_log_output = 1.0;  // the delay-cost channel
    double beta_log_inputs = -0.10;
    double beta_log_outputs = -0.07;
    double beta_op_return = -0.23;
    double beta_inscription = -0.13;
    double theta_util = 0.25;
    double theta_log_secs = 0.15;
    double theta_log_bytes = 0.07;
    double epoch_shock_sd = 0.3;
    double fee_noise_sd = 0.0;  // keep 0 so percentiles stay exact

    // Flag shares (rbf varies per epoch around its base).
    double rbf_share = 0.08;
    double rbf_share_lo = 0.02;
    double rbf_share_hi = 0.30;
    double cpfp_share = 0.20;
    double op_return_share = 0.05;
    double inscription_share = 0.03;

    std::int64_t window_secs = core::kDefaultWindowLen;
    double snapshot_period_secs = 25.0;
    std::uint64_t seed = 1;
};

struct StructuralTruth {
    // Per transaction, aligned with dataset.txs.
    std::vector<double> cost;            // delay-cost draw c_i
    std::vector<double> percentile;      // generator-side tie-aware percentile
    std::vector<double> log_slope;       // log D(p_i, s_t), the fee-side technology term
    // Per epoch: the delay curve E[log(wait+1)] sampled on the percentile
    // grid at the epoch-median utilization.
    std::vector<std::vector<double>> delay_curve;  // [epoch][grid]
    std::vector<double> grid;                      // shared percentile grid
    // True coefficients of the fee equation, keyed for reporting.
    double alpha1 = 1.0;
    std::vector<std::pair<std::string, double>> coefficients;
};

struct StructuralDataset {
    core::Dataset data;  // epochs assigned, states joined, percentiles ranked
    StructuralTruth truth;
};

StructuralDataset generate_structural(const StructuralConfig& config);

}  // namespace sim
}  // namespace feelab

#endif  // FEELAB_SIM_STRUCTURAL_H

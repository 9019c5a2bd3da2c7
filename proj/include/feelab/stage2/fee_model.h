// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_STAGE2_FEE_MODEL_H
#define FEELAB_STAGE2_FEE_MODEL_H

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "feelab/core/types.h"
#include "feelab/stage1/crossfit.h"
#include "feelab/stage2/ispline.h"

namespace feelab {
namespace stage2 {

struct FeeSpec {
    bool use_fixed_effects = true;
    bool include_slope = true;
    bool include_tx_controls = true;
    bool include_state_controls = true;

    bool use_spline = false;
    int spline_degree = 3;
    std::vector<double> knot_quantiles = {0.2, 0.4, 0.6, 0.8, 0.95};

    double fee_floor_sat_vb = 1.0;  // relay-minimum exclusion for the intensive margin
    double slope_floor = 1e-6;      // floor before taking logs of the delay gradient
};

// Design matrix in raw (un-demeaned) form plus cluster labels.
struct FeeDesign {
    Eigen::MatrixXd x;
    Eigen::VectorXd y;  // log fee rate
    std::vector<std::string> names;
    std::vector<std::int64_t> cluster_of;   // epoch id per row
    std::vector<bool> constrained;          // spline block: coefficients >= 0
    std::vector<std::size_t> row_tx_index;  // dataset tx index per row

    std::int64_t excluded_below_floor = 0;
    std::int64_t excluded_missing = 0;

    bool has_spline = false;
    std::size_t spline_begin = 0;
    std::size_t spline_count = 0;
    std::vector<double> spline_knots;
    int spline_degree = 3;
    std::vector<double> impatience_sorted;  // observed values, ascending
};

struct FeeFit {
    std::vector<std::string> names;
    Eigen::VectorXd coef;
    Eigen::MatrixXd vcov;  // epoch-clustered sandwich

    double alpha0 = 0.0;                              // grand intercept
    std::vector<std::pair<std::int64_t, double>> xi;  // centered epoch effects

    double psi = 1.0;  // Duan smearing factor
    double r2_within = 0.0;
    double r2_overall = 0.0;
    std::vector<double> residuals;

    std::int64_t n_rows = 0;
    std::int64_t n_clusters = 0;
    double df_t = 0.0;  // clusters - 1

    FeeSpec spec;
    // Spline bookkeeping copied from the design.
    bool has_spline = false;
    std::size_t spline_begin = 0;
    std::size_t spline_count = 0;
    std::vector<double> spline_knots;
    int spline_degree = 3;
    std::vector<double> impatience_sorted;
    std::vector<std::size_t> row_tx_index;
    std::int64_t excluded_below_floor = 0;
    std::int64_t excluded_missing = 0;

    double se(std::size_t j) const { return std::sqrt(vcov(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j))); }
    double tstat(std::size_t j) const { return coef(static_cast<Eigen::Index>(j)) / se(j); }
    std::size_t col(const std::string& name) const;  // throws if absent
};

// Assembles the fee-equation design from ranked transactions and stage-1
// slopes. Rows need a slope, entry state and a fee rate at or above the
// floor; exclusions are counted, never silent.
FeeDesign build_fee_design(const core::Dataset& data, const stage1::DelayFit& delay,
                           const FeeSpec& spec);

// Core estimator: epoch-demeaned least squares (the fixed effects are
// absorbed and recovered), nonnegativity-constrained on the spline block,
// Liang-Zeger epoch-clustered covariance with small-sample df scaling.
FeeFit fit_fe_ols(const FeeDesign& design, const FeeSpec& spec);

// Two-stage convenience wrapper.
FeeFit fit_fee_model(const core::Dataset& data, const stage1::DelayFit& delay,
                     const FeeSpec& spec);

// Duan retransformation factor: mean of exponentiated residuals.
double smearing_factor(const std::vector<double>& residuals);

// Level-scale predictions exp(x'beta + alpha0) * psi for raw design rows.
std::vector<double> smearing_predict(const FeeFit& fit, const Eigen::MatrixXd& rows);

// Counterfactual expected fees under replacement state values. `state`
// maps state-column names to counterfactual values; selection probability
// pi weights the intensive-margin prediction against the below-floor mean.
std::vector<double> counterfactual(const FeeFit& fit, Eigen::MatrixXd rows,
                                   const std::map<std::string, double>& state, double pi = 1.0,
                                   double below_eps_mean = 0.0);

// Implied change in log fee rate as impatience moves between two quantiles
// of its observed distribution, with a delta-method SE from the spline block.
std::pair<double, double> aggregate_spline_effect(const FeeFit& fit, double from_q = 0.5,
                                                  double to_q = 0.95);

}  // namespace stage2
}  // namespace feelab

#endif  // FEELAB_STAGE2_FEE_MODEL_H

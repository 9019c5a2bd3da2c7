// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_STAGE2_BOOTSTRAP_H
#define FEELAB_STAGE2_BOOTSTRAP_H

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "feelab/core/types.h"
#include "feelab/stage1/crossfit.h"
#include "feelab/stage2/fee_model.h"

namespace feelab {
namespace stage2 {

struct BootstrapResult {
    std::vector<std::string> names;
    Eigen::VectorXd point;                      // full-sample estimates
    std::vector<Eigen::VectorXd> replicates;    // successful replicate coefficients
    Eigen::VectorXd sd_se;
    Eigen::VectorXd percentile_se;              // interquantile width / (2 z_{.975})
    std::int64_t requested = 0;
    std::int64_t failed = 0;                    // replicates dropped (rank conditions etc.)
    std::uint64_t seed = 0;
};

// Copies whole epochs (state + member transactions) into a new dataset.
// Position j of the draw becomes epoch j of the result, so duplicated source
// epochs turn into distinct clusters. Percentiles carry over unchanged
// because ranking is within-epoch.
core::Dataset resample_epochs(const core::Dataset& data,
                              const std::vector<std::size_t>& epoch_positions);

// Epoch-block bootstrap: each replicate resamples epochs with replacement
// and re-runs both stages. Deterministic given the seed; replicate draws use
// streams derived from (seed, replicate), so execution order is irrelevant.
BootstrapResult epoch_bootstrap(const core::Dataset& data,
                                const stage1::DelayStageConfig& delay_cfg,
                                const FeeSpec& fee_spec, int b, std::uint64_t seed);

}  // namespace stage2
}  // namespace feelab

#endif  // FEELAB_STAGE2_BOOTSTRAP_H

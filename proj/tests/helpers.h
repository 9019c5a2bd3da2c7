// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_TESTS_HELPERS_H
#define FEELAB_TESTS_HELPERS_H

#include <string>
#include <vector>

#include "feelab/core/rng.h"
#include "feelab/core/types.h"
#include "feelab/sim/structural.h"
#include "feelab/stage1/crossfit.h"
#include "feelab/stage2/fee_model.h"

namespace testutil {

inline feelab::core::TxRecord make_tx(const std::string& id, std::int64_t fee_sats,
                                      std::int64_t vsize_vb, std::int64_t entry_time = 0) {
    feelab::core::TxRecord tx;
    tx.tx_id = id;
    tx.fee_sats = fee_sats;
    tx.vsize_vb = vsize_vb;
    tx.weight_wu = 4 * vsize_vb;
    tx.fee_rate = feelab::core::Rational(fee_sats, vsize_vb);
    tx.entry_time = entry_time;
    tx.total_output_sats = 100000;
    return tx;
}

// Small structural market for estimator tests.
inline feelab::sim::StructuralConfig small_structural(int n_epochs, int txs_per_epoch,
                                                      std::uint64_t seed) {
    feelab::sim::StructuralConfig cfg;
    cfg.n_epochs = n_epochs;
    cfg.txs_per_epoch = txs_per_epoch;
    cfg.seed = seed;
    return cfg;
}

// Forest sized for unit tests.
inline feelab::stage1::DelayStageConfig fast_delay_cfg(std::uint64_t seed = 7, int n_trees = 12,
                                                       int depth = 6, int min_leaf = 20,
                                                       int folds = 3) {
    feelab::stage1::DelayStageConfig cfg;
    cfg.forest.n_trees = n_trees;
    cfg.forest.max_depth = depth;
    cfg.forest.min_leaf = min_leaf;
    cfg.forest.n_folds = folds;
    cfg.forest.seed = seed;
    return cfg;
}

// Plain panel fixture for the fee equation: y = x'beta + xi_t + noise with a
// hand-selected design; used by tests that bypass stage 1.
struct Panel {
    feelab::stage2::FeeDesign design;
};

inline Panel make_panel(int n_epochs, int rows_per_epoch, std::uint64_t seed,
                        double noise_sd = 0.1) {
    feelab::core::Rng rng(seed);
    Panel p;
    const int n = n_epochs * rows_per_epoch;
    p.design.names = {"a", "b", "c"};
    p.design.x.resize(n, 3);
    p.design.y.resize(n);
    p.design.constrained.assign(3, false);
    const double beta[3] = {1.5, -0.5, 0.25};
    int r = 0;
    for (int e = 0; e < n_epochs; ++e) {
        const double xi = rng.normal(0.0, 1.0);
        for (int i = 0; i < rows_per_epoch; ++i, ++r) {
            double yr = xi;
            for (int j = 0; j < 3; ++j) {
                const double v = rng.normal(0.0, 1.0);
                p.design.x(r, j) = v;
                yr += beta[j] * v;
            }
            yr += rng.normal(0.0, noise_sd);
            p.design.y(r) = yr;
            p.design.cluster_of.push_back(e);
            p.design.row_tx_index.push_back(static_cast<std::size_t>(r));
        }
    }
    return p;
}

}  // namespace testutil

#endif  // FEELAB_TESTS_HELPERS_H

// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_CORE_TYPES_H
#define FEELAB_CORE_TYPES_H

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "feelab/core/rational.h"

namespace feelab {
namespace core {

// One (possibly package-collapsed) transaction.
//
// Sizes are carried in both weight units and virtual bytes; the stored
// fee_rate is the exact rational fee_sats / vsize_vb in sat/vB.
struct TxRecord {
    std::string tx_id;
    std::int64_t fee_sats = 0;
    std::int64_t weight_wu = 0;
    std::int64_t vsize_vb = 0;
    Rational fee_rate;  // fee_sats / vsize_vb, exact

    std::int64_t entry_time = 0;  // unix seconds
    std::optional<std::int64_t> confirm_time;
    std::optional<std::int64_t> confirm_height;
    std::optional<std::int64_t> wait_blocks;

    bool rbf = false;
    bool cpfp_package = false;
    std::vector<std::string> package_members;

    std::int64_t n_inputs = 1;
    std::int64_t n_outputs = 1;
    std::int64_t total_output_sats = 0;
    bool has_op_return = false;
    bool has_inscription = false;

    std::optional<double> respend_blocks;  // blocks until first output re-spend
    std::optional<double> impatience;      // 1 / (respend_blocks + eps_resp)

    std::int64_t epoch_id = -1;

    // Mempool state sampled at entry (joined from the covering snapshot).
    bool state_valid = false;
    bool state_imputed = false;
    double state_blockspace_util = 0.0;
    std::int64_t state_mempool_bytes = 0;
    std::int64_t state_mempool_tx_count = 0;
    double state_secs_since_block = 0.0;

    // Percentile within the epoch, filled by the ranking step.
    std::optional<Rational> percentile;

    // External-weight correction bookkeeping.
    bool weight_corrected = false;

    double wait_seconds() const {
        return confirm_time ? static_cast<double>(*confirm_time - entry_time) : -1.0;
    }
};

// Periodic mempool state observation.
struct Snapshot {
    std::int64_t ts = 0;
    std::int64_t mempool_bytes = 0;
    std::int64_t mempool_tx_count = 0;
    std::int64_t block_height = 0;
    double secs_since_last_block = 0.0;
    double blockspace_util = 0.0;  // in [0,1]
};

// Per-window congestion/capacity state and epoch bookkeeping.
struct EpochState {
    std::int64_t epoch_id = 0;
    std::int64_t window_start = 0;
    std::int64_t window_end = 0;

    std::int64_t congestion_wu = 0;  // backlog in weight units
    double blockspace_util = 0.0;
    std::int64_t mempool_bytes = 0;
    std::int64_t mempool_tx_count = 0;
    double secs_since_last_block = 0.0;

    std::int64_t n_tx = 0;
    bool has_state = false;  // at least one covering snapshot
};

// A transaction with its tie-aware priority percentile (Eq. 8 ranking).
struct RankedTx {
    std::size_t tx_index = 0;  // index into the dataset's tx vector
    Rational percentile;       // in (0,1)
};

// The shared data model handed between the simulator, the ranking step and
// both estimation stages.
struct Dataset {
    std::vector<TxRecord> txs;
    std::vector<EpochState> epochs;
    std::vector<Snapshot> snapshots;
};

constexpr double kDefaultEpsResp = 1.0;        // impatience denominator offset
constexpr std::int64_t kDefaultWindowLen = 1800;  // 30-minute epochs

}  // namespace core
}  // namespace feelab

#endif  // FEELAB_CORE_TYPES_H

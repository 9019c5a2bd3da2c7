// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_CORE_EPOCH_H
#define FEELAB_CORE_EPOCH_H

#include <cstdint>
#include <vector>

#include "feelab/core/types.h"

namespace feelab {
namespace core {

struct EpochAssignment {
    std::vector<TxRecord> txs;       // epoch_id and entry-state fields filled
    std::vector<EpochState> epochs;  // consecutive half-open windows
    std::int64_t imputed_states = 0;  // txs whose state came from a gap fill
    std::int64_t dropped_no_state = 0;  // txs dropped: no snapshot within max_gap
};

// Cuts the timeline into consecutive half-open windows anchored at the
// earliest entry_time, aggregates per-window snapshot means into EpochState,
// and joins each transaction with the mempool state at its entry (latest
// snapshot at or before entry; nearest within max_gap_secs otherwise).
// Transactions with no snapshot within the gap are dropped and counted.
EpochAssignment assign_epochs(const std::vector<TxRecord>& txs,
                              const std::vector<Snapshot>& snapshots,
                              std::int64_t window_len_secs = kDefaultWindowLen,
                              std::int64_t max_gap_secs = 300);

}  // namespace core
}  // namespace feelab

#endif  // FEELAB_CORE_EPOCH_H

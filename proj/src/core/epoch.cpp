// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/core/epoch.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace feelab {
namespace core {

namespace {

// A transaction is covered by the latest snapshot at or before its entry,
// provided that snapshot is no older than max_gap. Failing that, the nearest
// snapshot on either side within max_gap is used as an imputed fill.
// Returns -1 when nothing qualifies. `snaps` must be sorted by ts.
std::ptrdiff_t snapshot_at(const std::vector<Snapshot>& snaps, std::int64_t t,
                           std::int64_t max_gap, bool* imputed) {
    *imputed = false;
    if (snaps.empty()) return -1;
    auto it = std::upper_bound(snaps.begin(), snaps.end(), t,
                               [](std::int64_t v, const Snapshot& s) { return v < s.ts; });
    if (it != snaps.begin() && t - std::prev(it)->ts <= max_gap) {
        return std::distance(snaps.begin(), std::prev(it));
    }
    std::ptrdiff_t best = -1;
    std::int64_t best_gap = max_gap + 1;
    if (it != snaps.begin()) {
        std::int64_t d = t - std::prev(it)->ts;
        if (d < best_gap) {
            best = std::distance(snaps.begin(), std::prev(it));
            best_gap = d;
        }
    }
    if (it != snaps.end()) {
        std::int64_t d = it->ts - t;
        if (d < best_gap) {
            best = std::distance(snaps.begin(), it);
            best_gap = d;
        }
    }
    if (best >= 0) *imputed = true;
    return best;
}

}  // namespace

EpochAssignment assign_epochs(const std::vector<TxRecord>& txs,
                              const std::vector<Snapshot>& snapshots,
                              std::int64_t window_len_secs,
                              std::int64_t max_gap_secs) {
    if (window_len_secs <= 0) {
        throw std::invalid_argument("epoch window length must be positive");
    }
    EpochAssignment out;
    if (txs.empty()) return out;

    std::vector<Snapshot> snaps = snapshots;
    std::sort(snaps.begin(), snaps.end(),
              [](const Snapshot& a, const Snapshot& b) { return a.ts < b.ts; });

    std::int64_t t0 = std::numeric_limits<std::int64_t>::max();
    std::int64_t t1 = std::numeric_limits<std::int64_t>::min();
    for (const auto& tx : txs) {
        t0 = std::min(t0, tx.entry_time);
        t1 = std::max(t1, tx.entry_time);
    }
    const std::int64_t n_epochs = (t1 - t0) / window_len_secs + 1;

    out.epochs.resize(static_cast<std::size_t>(n_epochs));
    for (std::int64_t e = 0; e < n_epochs; ++e) {
        EpochState& st = out.epochs[static_cast<std::size_t>(e)];
        st.epoch_id = e;
        st.window_start = t0 + e * window_len_secs;
        st.window_end = st.window_start + window_len_secs;
    }

    // Window means of snapshot values.
    std::vector<double> sum_bytes(n_epochs, 0), sum_count(n_epochs, 0),
        sum_util(n_epochs, 0), sum_secs(n_epochs, 0);
    std::vector<std::int64_t> n_snaps(n_epochs, 0);
    for (const auto& s : snaps) {
        if (s.ts < t0 || s.ts >= t0 + n_epochs * window_len_secs) continue;
        std::int64_t e = (s.ts - t0) / window_len_secs;
        sum_bytes[e] += static_cast<double>(s.mempool_bytes);
        sum_count[e] += static_cast<double>(s.mempool_tx_count);
        sum_util[e] += s.blockspace_util;
        sum_secs[e] += s.secs_since_last_block;
        ++n_snaps[e];
    }
    for (std::int64_t e = 0; e < n_epochs; ++e) {
        EpochState& st = out.epochs[static_cast<std::size_t>(e)];
        if (n_snaps[e] > 0) {
            const double inv = 1.0 / static_cast<double>(n_snaps[e]);
            st.mempool_bytes = static_cast<std::int64_t>(std::llround(sum_bytes[e] * inv));
            st.mempool_tx_count = static_cast<std::int64_t>(std::llround(sum_count[e] * inv));
            st.blockspace_util = sum_util[e] * inv;
            st.secs_since_last_block = sum_secs[e] * inv;
            // Backlog in weight units, from the byte backlog at the 4 WU/vB cap.
            st.congestion_wu = 4 * st.mempool_bytes;
            st.has_state = true;
        }
    }

    out.txs.reserve(txs.size());
    for (const auto& tx_in : txs) {
        TxRecord tx = tx_in;
        tx.epoch_id = (tx.entry_time - t0) / window_len_secs;

        bool imputed = false;
        std::ptrdiff_t si = snapshot_at(snaps, tx.entry_time, max_gap_secs, &imputed);
        if (si < 0) {
            ++out.dropped_no_state;
            continue;
        }
        const Snapshot& s = snaps[static_cast<std::size_t>(si)];
        tx.state_valid = true;
        tx.state_imputed = imputed;
        if (imputed) ++out.imputed_states;
        tx.state_blockspace_util = s.blockspace_util;
        tx.state_mempool_bytes = s.mempool_bytes;
        tx.state_mempool_tx_count = s.mempool_tx_count;
        tx.state_secs_since_block = s.secs_since_last_block;

        ++out.epochs[static_cast<std::size_t>(tx.epoch_id)].n_tx;
        out.txs.push_back(std::move(tx));
    }
    return out;
}

}  // namespace core
}  // namespace feelab

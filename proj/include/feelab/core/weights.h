// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_CORE_WEIGHTS_H
#define FEELAB_CORE_WEIGHTS_H

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "feelab/core/types.h"

namespace feelab {
namespace core {

struct ExternalSize {
    std::int64_t vsize_vb = 0;
    std::int64_t weight_wu = 0;
};

struct CorrectionReport {
    std::int64_t matched = 0;
    std::int64_t unmatched = 0;
    std::int64_t rejected_rows = 0;  // external rows violating weight/vsize bounds
    double match_fraction = 0.0;
    double mean_weight_delta = 0.0;  // mean corrected - original, over matched txs
};

// Replaces node-recorded sizes with externally fetched vsize/weight where a
// match exists and recomputes the fee rate on the corrected vsize. Unmatched
// records keep their original values and are counted.
std::pair<std::vector<TxRecord>, CorrectionReport> correct_weights(
    const std::vector<TxRecord>& txs,
    const std::map<std::string, ExternalSize>& external);

}  // namespace core
}  // namespace feelab

#endif  // FEELAB_CORE_WEIGHTS_H

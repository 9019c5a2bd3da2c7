// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_CORE_RANK_H
#define FEELAB_CORE_RANK_H

#include <vector>

#include "feelab/core/types.h"

namespace feelab {
namespace core {

// Tie-aware percentile ranks: p_i = (#below + half the tied mass) / N,
// where the tied mass includes i itself. Output order matches input order,
// every value lies strictly inside (0,1), and equal rates share a percentile.
// Throws std::invalid_argument on an empty input.
std::vector<Rational> tie_aware_percentile(const std::vector<Rational>& fee_rates);

// Ranks every epoch of the dataset by fee rate and writes the percentile
// back onto each transaction. Returns the rankings grouped in input order.
std::vector<RankedTx> rank_dataset(Dataset& data);

}  // namespace core
}  // namespace feelab

#endif  // FEELAB_CORE_RANK_H

// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/core/rank.h"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

namespace feelab {
namespace core {

std::vector<Rational> tie_aware_percentile(const std::vector<Rational>& fee_rates) {
    if (fee_rates.empty()) {
        throw std::invalid_argument("empty ranking set");
    }
    const std::size_t n = fee_rates.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return fee_rates[a] < fee_rates[b];
    });

    std::vector<Rational> out(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && fee_rates[order[j + 1]] == fee_rates[order[i]]) ++j;
        // Block [i, j] ties: below-count i, tie-count j - i + 1 (self included).
        // p = (i + (j - i + 1) / 2) / n, kept exact as (2i + j - i + 1) / (2n).
        Rational p(static_cast<std::int64_t>(2 * i + (j - i + 1)),
                   static_cast<std::int64_t>(2 * n));
        for (std::size_t k = i; k <= j; ++k) out[order[k]] = p;
        i = j + 1;
    }
    return out;
}

std::vector<RankedTx> rank_dataset(Dataset& data) {
    std::unordered_map<std::int64_t, std::vector<std::size_t>> by_epoch;
    for (std::size_t i = 0; i < data.txs.size(); ++i) {
        by_epoch[data.txs[i].epoch_id].push_back(i);
    }

    std::vector<RankedTx> ranked(data.txs.size());
    for (auto& [epoch, members] : by_epoch) {
        std::vector<Rational> rates;
        rates.reserve(members.size());
        for (std::size_t idx : members) rates.push_back(data.txs[idx].fee_rate);
        std::vector<Rational> ps = tie_aware_percentile(rates);
        for (std::size_t k = 0; k < members.size(); ++k) {
            data.txs[members[k]].percentile = ps[k];
            ranked[members[k]] = RankedTx{members[k], ps[k]};
        }
    }
    return ranked;
}

}  // namespace core
}  // namespace feelab

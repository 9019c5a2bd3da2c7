// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/core/weights.h"

namespace feelab {
namespace core {

std::pair<std::vector<TxRecord>, CorrectionReport> correct_weights(
    const std::vector<TxRecord>& txs,
    const std::map<std::string, ExternalSize>& external) {
    std::vector<TxRecord> out;
    out.reserve(txs.size());
    CorrectionReport report;
    double delta_sum = 0.0;

    for (const auto& tx_in : txs) {
        TxRecord tx = tx_in;
        auto it = external.find(tx.tx_id);
        if (it == external.end()) {
            ++report.unmatched;
            out.push_back(std::move(tx));
            continue;
        }
        const ExternalSize& ext = it->second;
        if (ext.vsize_vb <= 0 || ext.weight_wu < ext.vsize_vb ||
            ext.weight_wu > 4 * ext.vsize_vb) {
            ++report.rejected_rows;
            ++report.unmatched;
            out.push_back(std::move(tx));
            continue;
        }
        delta_sum += static_cast<double>(ext.weight_wu - tx.weight_wu);
        tx.vsize_vb = ext.vsize_vb;
        tx.weight_wu = ext.weight_wu;
        tx.fee_rate = Rational(tx.fee_sats, tx.vsize_vb);
        tx.weight_corrected = true;
        ++report.matched;
        out.push_back(std::move(tx));
    }

    const double n = static_cast<double>(txs.size());
    report.match_fraction = txs.empty() ? 0.0 : static_cast<double>(report.matched) / n;
    report.mean_weight_delta =
        report.matched == 0 ? 0.0 : delta_sum / static_cast<double>(report.matched);
    return {std::move(out), report};
}

}  // namespace core
}  // namespace feelab

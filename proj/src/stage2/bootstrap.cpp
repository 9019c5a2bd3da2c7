// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/stage2/bootstrap.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>

#include "feelab/core/rng.h"

namespace feelab {
namespace stage2 {

core::Dataset resample_epochs(const core::Dataset& data,
                              const std::vector<std::size_t>& epoch_positions) {
    std::unordered_map<std::int64_t, std::vector<std::size_t>> txs_of_epoch;
    for (std::size_t i = 0; i < data.txs.size(); ++i) {
        txs_of_epoch[data.txs[i].epoch_id].push_back(i);
    }

    core::Dataset out;
    out.epochs.reserve(epoch_positions.size());
    for (std::size_t j = 0; j < epoch_positions.size(); ++j) {
        const core::EpochState& src = data.epochs.at(epoch_positions[j]);
        core::EpochState st = src;
        st.epoch_id = static_cast<std::int64_t>(j);
        out.epochs.push_back(st);
        auto it = txs_of_epoch.find(src.epoch_id);
        if (it == txs_of_epoch.end()) continue;
        for (std::size_t i : it->second) {
            core::TxRecord tx = data.txs[i];
            tx.epoch_id = static_cast<std::int64_t>(j);
            out.txs.push_back(std::move(tx));
        }
    }
    return out;
}

BootstrapResult epoch_bootstrap(const core::Dataset& data,
                                const stage1::DelayStageConfig& delay_cfg,
                                const FeeSpec& fee_spec, int b, std::uint64_t seed) {
    if (b < 1) throw std::invalid_argument("bootstrap needs at least one replicate");
    std::size_t n_epochs = data.epochs.size();
    if (n_epochs < 2) throw std::invalid_argument("bootstrap needs at least 2 epochs");

    BootstrapResult res;
    res.requested = b;
    res.seed = seed;

    {
        stage1::DelayFit delay = stage1::run_delay_stage(data, delay_cfg);
        FeeFit fit = fit_fee_model(data, delay, fee_spec);
        res.names = fit.names;
        res.point = fit.coef;
    }

    for (int r = 0; r < b; ++r) {
        core::Rng rng(core::Rng::mix(seed, 0xb005, static_cast<std::uint64_t>(r)));
        std::vector<std::size_t> draw(n_epochs);
        for (auto& d : draw) d = static_cast<std::size_t>(rng.below(n_epochs));
        try {
            core::Dataset resampled = resample_epochs(data, draw);
            stage1::DelayFit delay = stage1::run_delay_stage(resampled, delay_cfg);
            FeeFit fit = fit_fee_model(resampled, delay, fee_spec);
            res.replicates.push_back(fit.coef);
        } catch (const std::exception&) {
            ++res.failed;
        }
    }
    if (res.replicates.empty()) {
        throw std::runtime_error("every bootstrap replicate failed");
    }

    const Eigen::Index p = res.point.size();
    const std::size_t m = res.replicates.size();
    res.sd_se = Eigen::VectorXd::Zero(p);
    res.percentile_se = Eigen::VectorXd::Zero(p);

    std::vector<double> column(m);
    for (Eigen::Index j = 0; j < p; ++j) {
        double mean = 0.0;
        for (std::size_t r = 0; r < m; ++r) {
            column[r] = res.replicates[r](j);
            mean += column[r];
        }
        mean /= static_cast<double>(m);
        double var = 0.0;
        for (double v : column) var += (v - mean) * (v - mean);
        res.sd_se(j) = m > 1 ? std::sqrt(var / static_cast<double>(m - 1)) : 0.0;

        std::sort(column.begin(), column.end());
        auto quant = [&](double q) {
            const double pos = q * static_cast<double>(m - 1);
            const std::size_t lo = static_cast<std::size_t>(pos);
            const std::size_t hi = std::min(lo + 1, m - 1);
            const double frac = pos - static_cast<double>(lo);
            return column[lo] * (1.0 - frac) + column[hi] * frac;
        };
        constexpr double z975 = 1.959963984540054;
        res.percentile_se(j) = (quant(0.975) - quant(0.025)) / (2.0 * z975);
    }
    return res;
}

}  // namespace stage2
}  // namespace feelab

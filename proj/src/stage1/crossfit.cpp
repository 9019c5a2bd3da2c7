// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/stage1/crossfit.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "feelab/core/rng.h"
#include "feelab/stage1/pava.h"

namespace feelab {
namespace stage1 {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// A transaction enters stage 1 when it is confirmed, carries entry state and
// has been ranked.
bool scoreable(const core::TxRecord& tx) {
    return tx.confirm_time.has_value() && tx.state_valid && tx.percentile.has_value() &&
           *tx.confirm_time >= tx.entry_time;
}

void fill_features(const core::TxRecord& tx, double* row) {
    row[0] = tx.percentile->to_double();
    row[1] = tx.state_blockspace_util;
    row[2] = static_cast<double>(tx.state_mempool_bytes);
    row[3] = static_cast<double>(tx.state_mempool_tx_count);
}

double target_of(const core::TxRecord& tx) {
    return std::log(static_cast<double>(*tx.confirm_time - tx.entry_time) + 1.0);
}

double median_of(std::vector<double>& v) {
    if (v.empty()) throw std::logic_error("median of empty vector");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<std::size_t> epoch_index_map(const core::Dataset& data) {
    // epoch_id -> position in data.epochs
    std::vector<std::size_t> map;
    for (std::size_t e = 0; e < data.epochs.size(); ++e) {
        const std::int64_t id = data.epochs[e].epoch_id;
        if (id < 0) throw std::invalid_argument("negative epoch id");
        if (static_cast<std::size_t>(id) >= map.size()) {
            map.resize(static_cast<std::size_t>(id) + 1, static_cast<std::size_t>(-1));
        }
        map[static_cast<std::size_t>(id)] = e;
    }
    return map;
}

}  // namespace

double EpochSchedule::eval(double p) const {
    if (grid.empty()) throw std::logic_error("empty schedule");
    if (p <= grid.front()) return values.front();
    if (p >= grid.back()) return values.back();
    auto it = std::upper_bound(grid.begin(), grid.end(), p);
    const std::size_t hi = static_cast<std::size_t>(std::distance(grid.begin(), it));
    const std::size_t lo = hi - 1;
    const double t = (p - grid[lo]) / (grid[hi] - grid[lo]);
    return values[lo] + t * (values[hi] - values[lo]);
}

std::vector<int> assign_folds(const std::vector<core::EpochState>& epochs, int k,
                              std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("cross-fitting needs at least 2 folds");
    if (static_cast<std::size_t>(k) > epochs.size()) {
        throw std::invalid_argument("more cross-fitting folds than epochs");
    }
    // Seeded hash of the epoch id orders the epochs; folds are dealt
    // round-robin along that order, so the partition is deterministic,
    // independent of epoch-list order, and balanced to within one epoch.
    std::vector<std::pair<std::uint64_t, std::size_t>> hashed(epochs.size());
    for (std::size_t e = 0; e < epochs.size(); ++e) {
        hashed[e] = {core::Rng::mix(seed, 0xf01d, static_cast<std::uint64_t>(epochs[e].epoch_id)),
                     e};
    }
    std::sort(hashed.begin(), hashed.end());
    std::vector<int> folds(epochs.size());
    for (std::size_t pos = 0; pos < hashed.size(); ++pos) {
        folds[hashed[pos].second] = static_cast<int>(pos % static_cast<std::size_t>(k));
    }
    return folds;
}

DelayFit crossfit_predict(const core::Dataset& data, const DelayStageConfig& cfg) {
    const int k = cfg.forest.n_folds;
    DelayFit fit;
    fit.fold_of_epoch = assign_folds(data.epochs, k, cfg.forest.seed);
    fit.predicted_log_wait.assign(data.txs.size(), kNaN);
    fit.slope.assign(data.txs.size(), kNaN);
    fit.feature_importance.assign(kDelayFeatureCount, 0.0);

    const std::vector<std::size_t> eidx = epoch_index_map(data);
    auto fold_of_tx = [&](const core::TxRecord& tx) {
        return fit.fold_of_epoch[eidx[static_cast<std::size_t>(tx.epoch_id)]];
    };

    fit.fold_forests.reserve(static_cast<std::size_t>(k));
    double row[kDelayFeatureCount];
    for (int fold = 0; fold < k; ++fold) {
        FeatureMatrix train;
        train.cols.assign(kDelayFeatureCount, {});
        std::vector<double> y;
        for (const auto& tx : data.txs) {
            if (!scoreable(tx) || fold_of_tx(tx) == fold) continue;
            fill_features(tx, row);
            for (std::size_t f = 0; f < kDelayFeatureCount; ++f) train.cols[f].push_back(row[f]);
            y.push_back(target_of(tx));
        }
        if (y.empty()) {
            throw std::runtime_error("cross-fitting fold " + std::to_string(fold) +
                                     " has an empty training set");
        }
        Forest forest = Forest::fit(train, y, cfg.forest, static_cast<std::uint64_t>(fold));
        for (std::size_t f = 0; f < kDelayFeatureCount; ++f) {
            fit.feature_importance[f] += forest.feature_importance()[f] / k;
        }
        fit.fold_forests.push_back(std::move(forest));
    }

    double sse = 0.0, sst = 0.0, mean_y = 0.0;
    std::int64_t n = 0;
    for (const auto& tx : data.txs) {
        if (!scoreable(tx)) continue;
        mean_y += target_of(tx);
        ++n;
    }
    if (n > 0) mean_y /= static_cast<double>(n);

    for (std::size_t i = 0; i < data.txs.size(); ++i) {
        const auto& tx = data.txs[i];
        if (!scoreable(tx)) continue;
        fill_features(tx, row);
        const double pred =
            fit.fold_forests[static_cast<std::size_t>(fold_of_tx(tx))].predict_row(row);
        fit.predicted_log_wait[i] = pred;
        const double t = target_of(tx);
        sse += (t - pred) * (t - pred);
        sst += (t - mean_y) * (t - mean_y);
    }
    fit.n_scored = n;
    fit.oof_r2 = sst > 0.0 ? 1.0 - sse / sst : 0.0;
    fit.oof_rmse = n > 0 ? std::sqrt(sse / static_cast<double>(n)) : 0.0;
    return fit;
}

EpochSchedule monotone_schedule(const Forest& forest, const core::Dataset& data,
                                std::size_t epoch_index, int grid_points) {
    if (grid_points < 2) throw std::invalid_argument("schedule grid needs >= 2 points");
    const std::int64_t epoch_id = data.epochs[epoch_index].epoch_id;

    std::vector<double> util, bytes, count;
    for (const auto& tx : data.txs) {
        if (tx.epoch_id != epoch_id || !scoreable(tx)) continue;
        util.push_back(tx.state_blockspace_util);
        bytes.push_back(static_cast<double>(tx.state_mempool_bytes));
        count.push_back(static_cast<double>(tx.state_mempool_tx_count));
    }
    if (util.empty()) {
        throw std::runtime_error("epoch " + std::to_string(epoch_id) +
                                 " has no scoreable transactions for the schedule sweep");
    }
    const double util_med = median_of(util);
    const double bytes_med = median_of(bytes);
    const double count_med = median_of(count);

    EpochSchedule sched;
    sched.epoch_id = epoch_id;
    sched.grid.resize(static_cast<std::size_t>(grid_points));
    std::vector<double> raw(sched.grid.size());
    double row[kDelayFeatureCount] = {0.0, util_med, bytes_med, count_med};
    for (int m = 0; m < grid_points; ++m) {
        const double p = static_cast<double>(m + 1) / (grid_points + 1);
        sched.grid[static_cast<std::size_t>(m)] = p;
        row[0] = p;
        raw[static_cast<std::size_t>(m)] = forest.predict_row(row);
    }
    sched.values = pava_decreasing(raw);
    return sched;
}

double local_slope(const EpochSchedule& schedule, double p, double delta, double trim) {
    if (p <= 0.0 || p >= 1.0) throw std::invalid_argument("percentile must be in (0,1)");
    const double lo = std::clamp(p - delta, trim, 1.0 - trim);
    const double hi = std::clamp(p + delta, trim, 1.0 - trim);
    if (hi <= lo) {
        throw std::invalid_argument("degenerate finite-difference window: delta too small for trim");
    }
    const double slope = (schedule.eval(lo) - schedule.eval(hi)) / (hi - lo);
    return std::max(slope, 0.0);
}

DelayFit run_delay_stage(const core::Dataset& data, const DelayStageConfig& cfg) {
    DelayFit fit = crossfit_predict(data, cfg);
    const std::vector<std::size_t> eidx = epoch_index_map(data);

    fit.schedules.resize(data.epochs.size());
    fit.regime.max_grid_slope.assign(data.epochs.size(), 0.0);
    fit.regime.trivial.assign(data.epochs.size(), 1);

    std::vector<char> has_txs(data.epochs.size(), 0);
    for (const auto& tx : data.txs) {
        if (scoreable(tx)) has_txs[eidx[static_cast<std::size_t>(tx.epoch_id)]] = 1;
    }

    std::int64_t n_trivial = 0, n_active = 0;
    for (std::size_t e = 0; e < data.epochs.size(); ++e) {
        if (!has_txs[e]) continue;
        const Forest& forest =
            fit.fold_forests[static_cast<std::size_t>(fit.fold_of_epoch[e])];
        EpochSchedule sched = monotone_schedule(forest, data, e, cfg.grid_points);

        double max_slope = 0.0;
        for (std::size_t j = 0; j + 1 < sched.grid.size(); ++j) {
            max_slope = std::max(max_slope, (sched.values[j] - sched.values[j + 1]) /
                                                (sched.grid[j + 1] - sched.grid[j]));
        }
        fit.regime.max_grid_slope[e] = max_slope;
        fit.regime.trivial[e] = max_slope < cfg.flat_tolerance ? 1 : 0;
        if (fit.regime.trivial[e]) {
            ++n_trivial;
        }
        ++n_active;
        fit.schedules[e] = std::move(sched);
    }
    fit.regime.trivial_share =
        n_active > 0 ? static_cast<double>(n_trivial) / static_cast<double>(n_active) : 0.0;

    double row[kDelayFeatureCount];
    for (std::size_t i = 0; i < data.txs.size(); ++i) {
        const auto& tx = data.txs[i];
        if (!scoreable(tx)) continue;
        const std::size_t e = eidx[static_cast<std::size_t>(tx.epoch_id)];
        const double p = tx.percentile->to_double();
        if (cfg.per_tx_schedule) {
            // Sweep the grid at the transaction's own covariates.
            const Forest& forest =
                fit.fold_forests[static_cast<std::size_t>(fit.fold_of_epoch[e])];
            fill_features(tx, row);
            EpochSchedule own;
            own.epoch_id = tx.epoch_id;
            own.grid.resize(static_cast<std::size_t>(cfg.grid_points));
            std::vector<double> raw(own.grid.size());
            for (int m = 0; m < cfg.grid_points; ++m) {
                own.grid[static_cast<std::size_t>(m)] =
                    static_cast<double>(m + 1) / (cfg.grid_points + 1);
                row[0] = own.grid[static_cast<std::size_t>(m)];
                raw[static_cast<std::size_t>(m)] = forest.predict_row(row);
            }
            own.values = pava_decreasing(raw);
            fit.slope[i] = local_slope(own, p, cfg.fd_delta, cfg.trim);
        } else {
            fit.slope[i] = local_slope(fit.schedules[e], p, cfg.fd_delta, cfg.trim);
        }
    }
    return fit;
}

}  // namespace stage1
}  // namespace feelab

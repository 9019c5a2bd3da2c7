// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/sim/structural.h"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <numeric>

#include "feelab/core/epoch.h"
#include "feelab/core/rank.h"
#include "feelab/core/rng.h"

namespace feelab {
namespace sim {

namespace {

// Tie-aware percentile over doubles (generator-side ranks; ties have
// measure zero here but the definition matches the estimation pipeline).
std::vector<double> percentile_of(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> out(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double p =
            (2.0 * static_cast<double>(i) + static_cast<double>(j - i + 1)) / (2.0 * n);
        for (std::size_t k = i; k <= j; ++k) out[order[k]] = p;
        i = j + 1;
    }
    return out;
}

// One epoch's staircase: cumulative jump mass H(p) normalized to 1, with
// randomly grown step heights.
struct Staircase {
    std::vector<double> positions;
    std::vector<double> masses;  // sums to 1

    double cumulative(double p) const {
        double h = 0.0;
        for (std::size_t j = 0; j < positions.size() && positions[j] <= p; ++j) h += masses[j];
        return h;
    }
};

// Log mass growth per step under slack and congested conditions. The two
// zigzag patterns differ in form, not just scale, so the curve's shape keeps
// rotating as utilization moves.
constexpr double kGapSlack[] = {0.06, 0.50, 0.05, 0.46, 0.07, 0.48, 0.05, 0.52, 0.06,
                                0.44, 0.07, 0.50, 0.05, 0.47, 0.06, 0.49, 0.05, 0.51, 0.07};
constexpr double kGapCongested[] = {0.52, 0.05, 0.48, 0.07, 0.50, 0.05, 0.46, 0.06, 0.51,
                                    0.07, 0.49, 0.05, 0.52, 0.06, 0.47, 0.05, 0.50, 0.07, 0.45};

double congestion_t(const StructuralConfig&, double util) {
    return std::clamp((util - 0.35) / 0.60, 0.0, 1.0);
}

Staircase staircase_at(const StructuralConfig& cfg, double util) {
    const double t = congestion_t(cfg, util);
    Staircase st;
    double log_h = 0.0;
    double total = 0.0;
    for (int j = 0; j < cfg.n_jumps; ++j) {
        st.positions.push_back(cfg.first_jump + cfg.jump_spacing * j);
        if (j > 0) {
            const std::size_t g = static_cast<std::size_t>(j - 1) % std::size(kGapSlack);
            log_h += (1.0 - t) * kGapSlack[g] + t * kGapCongested[g];
        }
        st.masses.push_back(std::exp(log_h));
        total += st.masses.back();
    }
    for (double& m : st.masses) m /= total;
    return st;
}

// Delay curve on the estimator's percentile grid, then the estimator's own
// clipped symmetric finite difference on its linear interpolant. This is the
// fixed-step population slope the pipeline targets, computed from the truth.
struct GridCurve {
    std::vector<double> grid;
    std::vector<double> values;

    double eval(double p) const {
        if (p <= grid.front()) return values.front();
        if (p >= grid.back()) return values.back();
        auto it = std::upper_bound(grid.begin(), grid.end(), p);
        const std::size_t hi = static_cast<std::size_t>(std::distance(grid.begin(), it));
        const std::size_t lo = hi - 1;
        const double t = (p - grid[lo]) / (grid[hi] - grid[lo]);
        return values[lo] + t * (values[hi] - values[lo]);
    }

    double fd_slope(double p, double delta, double trim) const {
        const double lo = std::clamp(p - delta, trim, 1.0 - trim);
        const double hi = std::clamp(p + delta, trim, 1.0 - trim);
        return (eval(lo) - eval(hi)) / (hi - lo);
    }
};

GridCurve grid_curve(const StructuralConfig& cfg, const Staircase& st, double level,
                     double scale) {
    GridCurve c;
    c.grid.reserve(static_cast<std::size_t>(cfg.grid_points));
    c.values.reserve(c.grid.capacity());
    for (int m = 1; m <= cfg.grid_points; ++m) {
        const double p = static_cast<double>(m) / (cfg.grid_points + 1);
        c.grid.push_back(p);
        c.values.push_back(level - scale * st.cumulative(p));
    }
    return c;
}

}  // namespace

StructuralDataset generate_structural(const StructuralConfig& cfg) {
    StructuralDataset out;
    core::Rng rng(core::Rng::mix(cfg.seed, 0x57a7));

    const std::int64_t snap_step = static_cast<std::int64_t>(cfg.snapshot_period_secs);
    const std::int64_t t0 = 1'700'000'000;

    std::vector<core::TxRecord> txs;
    std::vector<core::Snapshot> snapshots;
    txs.reserve(static_cast<std::size_t>(cfg.n_epochs) * cfg.txs_per_epoch);

    struct TxGen {
        double z = 0.0;        // controlled part of log fee rate
        double cost = 0.0;
        double util_at_entry = 0.0;
    };

    for (int e = 0; e < cfg.n_epochs; ++e) {
        const std::int64_t start = t0 + static_cast<std::int64_t>(e) * cfg.window_secs;

        // Epoch-level conditions and this epoch's staircase technology. The
        // mempool depth features carry no epoch component: the delay curve
        // depends on utilization alone, and epoch-unique depth levels would
        // let held-out-epoch forest queries extrapolate badly.
        const double util_epoch = rng.uniform(0.35, 0.95);
        const double xi = rng.normal(0.0, cfg.epoch_shock_sd);
        const double cost_mu_e = cfg.cost_mu + rng.uniform(-cfg.cost_mu_spread, cfg.cost_mu_spread);
        const double cost_sigma_e =
            cfg.cost_sigma * rng.uniform(cfg.cost_sigma_lo, cfg.cost_sigma_hi);
        const double rbf_share_e = rng.uniform(cfg.rbf_share_lo, cfg.rbf_share_hi);

        // Block arrivals drive the time-since-last-block sawtooth.
        std::vector<std::int64_t> block_times;
        {
            double bt = static_cast<double>(start) - rng.exponential(1.0 / 600.0);
            block_times.push_back(static_cast<std::int64_t>(bt));
            double next = static_cast<double>(block_times.back());
            while (next < static_cast<double>(start + cfg.window_secs)) {
                next += rng.exponential(1.0 / 600.0);
                block_times.push_back(static_cast<std::int64_t>(next));
            }
        }
        auto secs_since_block = [&](std::int64_t ts) {
            auto it = std::upper_bound(block_times.begin(), block_times.end(), ts);
            if (it == block_times.begin()) return 600.0;
            return static_cast<double>(ts - *std::prev(it));
        };

        // Snapshots on the cadence, first one exactly at the window start.
        const std::size_t first_snap = snapshots.size();
        double util_mean = 0.0;
        std::size_t n_snaps = 0;
        for (std::int64_t ts = start; ts < start + cfg.window_secs; ts += snap_step) {
            core::Snapshot s;
            s.ts = ts;
            s.blockspace_util = std::clamp(util_epoch + rng.normal(0.0, 0.02), 0.01, 0.999);
            s.mempool_bytes = static_cast<std::int64_t>(1.5e7 * std::exp(rng.normal(0.0, 0.5)));
            s.mempool_tx_count =
                std::max<std::int64_t>(1, static_cast<std::int64_t>(
                    static_cast<double>(s.mempool_bytes) / 600.0 * std::exp(rng.normal(0.0, 0.05))));
            s.secs_since_last_block = secs_since_block(ts);
            s.block_height = 900000 + e * 3;
            snapshots.push_back(s);
            util_mean += s.blockspace_util;
            ++n_snaps;
        }
        util_mean /= static_cast<double>(n_snaps);

        // The fee-side technology: finite-difference gradient of the epoch
        // curve at the epoch-mean state, flattened at the ends where the
        // trimmed window is not monotone.
        const double t_mean = congestion_t(cfg, util_mean);
        const GridCurve fee_curve =
            grid_curve(cfg, staircase_at(cfg, util_mean),
                       cfg.level_base + cfg.level_util * t_mean,
                       cfg.scale_base + cfg.scale_util * t_mean);
        auto log_slope_at = [&](double p) {
            const double d = fee_curve.fd_slope(std::clamp(p, cfg.flatten_below, cfg.flatten_above),
                                                cfg.fd_delta, cfg.trim);
            return std::log(std::max(d, 1e-12));
        };

        // Transactions: first one anchors the window so that pipeline epochs
        // line up with generator epochs.
        std::vector<TxGen> gen(static_cast<std::size_t>(cfg.txs_per_epoch));
        std::vector<core::TxRecord> etxs(gen.size());
        std::vector<double> zs(gen.size());

        for (std::size_t i = 0; i < gen.size(); ++i) {
            core::TxRecord& tx = etxs[i];
            tx.tx_id = "st-" + std::to_string(e) + "-" + std::to_string(i);
            tx.entry_time = i == 0 ? start
                                   : start + static_cast<std::int64_t>(
                                                 rng.below(static_cast<std::uint64_t>(cfg.window_secs)));
            const std::size_t snap_idx =
                first_snap + static_cast<std::size_t>((tx.entry_time - start) / snap_step);
            const core::Snapshot& snap = snapshots[snap_idx];

            const double cost = rng.lognormal(cost_mu_e, cost_sigma_e);
            tx.rbf = rng.bernoulli(rbf_share_e);
            tx.cpfp_package = rng.bernoulli(cfg.cpfp_share);
            tx.has_op_return = rng.bernoulli(cfg.op_return_share);
            tx.has_inscription = rng.bernoulli(cfg.inscription_share);
            tx.n_inputs = 1 + static_cast<std::int64_t>(rng.below(5));
            tx.n_outputs = 1 + static_cast<std::int64_t>(rng.below(5));
            tx.total_output_sats =
                std::max<std::int64_t>(1000, static_cast<std::int64_t>(std::llround(cost * 1e8)));
            tx.vsize_vb = 120 + static_cast<std::int64_t>(rng.below(280));
            tx.weight_wu = 4 * tx.vsize_vb;

            const double respend = std::max(0.1, 8.0 / cost * std::exp(rng.normal(0.0, 0.2)));
            if (rng.uniform01() < 0.8) {
                tx.respend_blocks = respend;
                tx.impatience = 1.0 / (respend + core::kDefaultEpsResp);
            }

            double z = cfg.beta_rbf * (tx.rbf ? 1.0 : 0.0) +
                       cfg.beta_cpfp * (tx.cpfp_package ? 1.0 : 0.0) +
                       cfg.beta_log_output * std::log(static_cast<double>(tx.total_output_sats)) +
                       cfg.beta_log_inputs * std::log(static_cast<double>(tx.n_inputs)) +
                       cfg.beta_log_outputs * std::log(static_cast<double>(tx.n_outputs)) +
                       cfg.beta_op_return * (tx.has_op_return ? 1.0 : 0.0) +
                       cfg.beta_inscription * (tx.has_inscription ? 1.0 : 0.0) +
                       cfg.theta_util * snap.blockspace_util +
                       cfg.theta_log_secs * std::log1p(snap.secs_since_last_block) +
                       cfg.theta_log_bytes * std::log(static_cast<double>(snap.mempool_bytes));
            if (cfg.fee_noise_sd > 0.0) z += rng.normal(0.0, cfg.fee_noise_sd);

            gen[i].z = z;
            gen[i].cost = cost;
            gen[i].util_at_entry = snap.blockspace_util;
            zs[i] = z;
        }

        const std::vector<double> ps = percentile_of(zs);

        std::vector<double> utils_sorted;
        utils_sorted.reserve(gen.size());
        for (const auto& g : gen) utils_sorted.push_back(g.util_at_entry);
        std::nth_element(utils_sorted.begin(), utils_sorted.begin() + utils_sorted.size() / 2,
                         utils_sorted.end());
        const double util_median = utils_sorted[utils_sorted.size() / 2];

        for (std::size_t i = 0; i < gen.size(); ++i) {
            core::TxRecord& tx = etxs[i];
            const double p = ps[i];
            const double log_slope = log_slope_at(p);
            const double log_rate = cfg.alpha0 + gen[i].z + log_slope + xi;
            tx.fee_sats = std::max<std::int64_t>(
                1, std::llround(std::exp(log_rate) * static_cast<double>(tx.vsize_vb)));
            tx.fee_rate = core::Rational(tx.fee_sats, tx.vsize_vb);

            // Delay from the conditions the transaction actually faced.
            const double t_tx = congestion_t(cfg, gen[i].util_at_entry);
            const double scale_tx = cfg.scale_base + cfg.scale_util * t_tx;
            const double level_tx = cfg.level_base + cfg.level_util * t_tx;
            const double mean_log_wait =
                level_tx - scale_tx * staircase_at(cfg, gen[i].util_at_entry).cumulative(p);
            const double log_wait = mean_log_wait + rng.normal(0.0, cfg.wait_noise_sd);
            const std::int64_t wait_secs =
                std::max<std::int64_t>(0, std::llround(std::exp(log_wait) - 1.0));
            tx.confirm_time = tx.entry_time + wait_secs;
            tx.wait_blocks = wait_secs / 600 + 1;
            tx.confirm_height = 900000 + e * 3 + static_cast<std::int64_t>(wait_secs / 600);

            out.truth.cost.push_back(gen[i].cost);
            out.truth.percentile.push_back(p);
            out.truth.log_slope.push_back(log_slope);
        }

        // Reference delay curve at the epoch-median utilization.
        const double t_med = congestion_t(cfg, util_median);
        const GridCurve med_curve =
            grid_curve(cfg, staircase_at(cfg, util_median),
                       cfg.level_base + cfg.level_util * t_med,
                       cfg.scale_base + cfg.scale_util * t_med);
        if (out.truth.grid.empty()) out.truth.grid = med_curve.grid;
        out.truth.delay_curve.push_back(med_curve.values);

        for (auto& tx : etxs) txs.push_back(std::move(tx));
    }

    auto assignment = core::assign_epochs(txs, snapshots, cfg.window_secs, /*max_gap_secs=*/60);
    out.data.txs = std::move(assignment.txs);
    out.data.epochs = std::move(assignment.epochs);
    out.data.snapshots = std::move(snapshots);
    core::rank_dataset(out.data);

    out.truth.alpha1 = 1.0;
    out.truth.coefficients = {
        {"log_slope", 1.0},
        {"rbf", cfg.beta_rbf},
        {"cpfp", cfg.beta_cpfp},
        {"log_total_output", cfg.beta_log_output},
        {"log_n_inputs", cfg.beta_log_inputs},
        {"log_n_outputs", cfg.beta_log_outputs},
        {"op_return", cfg.beta_op_return},
        {"inscription", cfg.beta_inscription},
        {"log_weight", 0.0},
        {"util", cfg.theta_util},
        {"log_secs_since_block", cfg.theta_log_secs},
        {"log_mempool_bytes", cfg.theta_log_bytes},
    };
    return out;
}

}  // namespace sim
}  // namespace feelab

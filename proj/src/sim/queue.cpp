// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/sim/queue.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "feelab/core/epoch.h"
#include "feelab/core/rank.h"

namespace feelab {
namespace sim {

namespace {

struct PendingTx {
    std::int64_t agent_id;
    std::int64_t fee_sats;
    std::int64_t weight_wu;
    std::int64_t vsize_vb;
    double entry_minutes;
    std::int64_t blocks_at_entry;

    // Miner preference: fee rate desc, then entry asc, then id asc.
    bool before(const PendingTx& o) const {
        const __int128 lhs = static_cast<__int128>(fee_sats) * o.vsize_vb;
        const __int128 rhs = static_cast<__int128>(o.fee_sats) * vsize_vb;
        if (lhs != rhs) return lhs > rhs;
        if (entry_minutes != o.entry_minutes) return entry_minutes < o.entry_minutes;
        return agent_id < o.agent_id;
    }
};

std::int64_t vsize_of(std::int64_t weight_wu) { return (weight_wu + 3) / 4; }

}  // namespace

void SimConfig::validate() const {
    if (block_rate_mu <= 0.0) throw std::invalid_argument("block rate must be positive");
    if (block_capacity_wu <= 0) throw std::invalid_argument("block capacity must be positive");
    if (arrival_rate_lambda < 0.0) throw std::invalid_argument("arrival rate must be nonnegative");
    if (horizon_minutes <= 0.0) throw std::invalid_argument("horizon must be positive");
    if (kappa <= 0.0) throw std::invalid_argument("kappa must be positive");
}

FeePolicy FeePolicy::exogenous(std::vector<std::int64_t> fees) {
    FeePolicy p;
    p.mode = Mode::exogenous;
    p.exogenous_fees = std::move(fees);
    return p;
}

FeePolicy FeePolicy::equilibrium(std::function<double(double)> planned_delay_blocks,
                                 int schedule_grid) {
    FeePolicy p;
    p.mode = Mode::equilibrium;
    p.planned_delay_blocks = std::move(planned_delay_blocks);
    p.schedule_grid = schedule_grid;
    return p;
}

SimDataset simulate_queue(const SimConfig& config, const FeePolicy& policy,
                          const std::vector<SeededTx>& seeded) {
    config.validate();

    SimDataset out;
    out.fee_mode = policy.mode;

    // Equilibrium schedule in USD per weight unit: kappa * int c(q) D(q) dq,
    // with D derived from the planned delay curve by central differences.
    // Quantile evaluations are trimmed away from {0,1}.
    if (policy.mode == FeePolicy::Mode::equilibrium) {
        if (!policy.planned_delay_blocks) {
            throw std::invalid_argument("equilibrium policy needs a planned delay curve");
        }
        const double trim = 1e-4;
        auto cost_at = [&](double q) {
            return config.cost_dist.quantile(std::clamp(q, trim, 1.0 - trim));
        };
        const double h = 1e-4;
        auto slope_at = [&](double q) {
            const double lo = std::clamp(q - h, trim, 1.0 - trim);
            const double hi = std::clamp(q + h, trim, 1.0 - trim);
            const double d = (policy.planned_delay_blocks(lo) - policy.planned_delay_blocks(hi)) /
                             (hi - lo);
            return std::max(d, 0.0);
        };
        out.planned_schedule =
            compute_vcg_schedule(cost_at, slope_at, config.kappa, 1.0, policy.schedule_grid);
    }

    core::Rng block_rng(core::Rng::mix(config.seed, 0xb10c));
    core::Rng arrival_rng(core::Rng::mix(config.seed, 0xa881));
    core::Rng agent_rng(core::Rng::mix(config.seed, 0xa6e7));

    std::vector<PendingTx> pending;
    std::size_t fee_cursor = 0;

    auto make_agent = [&](double entry_minutes, std::int64_t blocks_so_far,
                          std::optional<SeededTx> seed_tx) {
        SimAgent agent;
        agent.agent_id = static_cast<std::int64_t>(out.agents.size());
        agent.entry_minutes = entry_minutes;
        if (seed_tx) {
            agent.c = 0.0;
            agent.value = 0.0;
            agent.weight_wu = seed_tx->weight_wu;
            agent.chosen_fee_sats = seed_tx->fee_sats;
        } else {
            agent.c = config.cost_dist.sample(agent_rng);
            agent.value = config.value_dist.sample(agent_rng);
            agent.weight_wu = std::max<std::int64_t>(
                4, static_cast<std::int64_t>(std::llround(config.weight_dist.sample(agent_rng))));
            agent.cost_quantile = config.cost_dist.cdf(agent.c);

            if (policy.mode == FeePolicy::Mode::exogenous) {
                if (fee_cursor >= policy.exogenous_fees.size()) {
                    throw std::invalid_argument("exogenous fee policy is missing an agent fee");
                }
                agent.chosen_fee_sats = policy.exogenous_fees[fee_cursor++];
            } else {
                const double fee_usd =
                    out.planned_schedule.eval(agent.cost_quantile) * static_cast<double>(agent.weight_wu);
                agent.chosen_fee_sats = std::llround(fee_usd * config.sats_per_usd);
                // Participation: exit when the planned schedule leaves no surplus.
                const double planned_wait = policy.planned_delay_blocks(
                    std::clamp(agent.cost_quantile, 1e-4, 1.0 - 1e-4));
                if (agent.value - agent.c * planned_wait - fee_usd < 0.0) {
                    agent.participating = false;
                    ++out.non_participants;
                    out.agents.push_back(agent);
                    return;
                }
            }
        }
        out.agents.push_back(agent);
        pending.push_back(PendingTx{agent.agent_id, agent.chosen_fee_sats, agent.weight_wu,
                                    vsize_of(agent.weight_wu), entry_minutes, blocks_so_far});
    };

    for (const auto& s : seeded) {
        if (policy.mode == FeePolicy::Mode::exogenous && s.fee_sats < 0) {
            throw std::invalid_argument("seeded tx with negative fee");
        }
        make_agent(0.0, 0, s);
    }

    std::vector<double> block_times;

    double t = 0.0;
    double next_block = t + block_rng.exponential(config.block_rate_mu);
    double next_arrival = config.arrival_rate_lambda > 0.0
                              ? t + arrival_rng.exponential(config.arrival_rate_lambda)
                              : config.horizon_minutes + 1.0;
    double next_snapshot = 0.0;
    const double snap_step = config.snapshot_period_secs / 60.0;
    double last_block_time = 0.0;

    auto take_snapshot = [&](double now) {
        core::Snapshot s;
        s.ts = static_cast<std::int64_t>(std::llround(now * 60.0));
        std::int64_t bytes = 0;
        for (const auto& p : pending) bytes += p.vsize_vb;
        s.mempool_bytes = bytes;
        s.mempool_tx_count = static_cast<std::int64_t>(pending.size());
        s.block_height = static_cast<std::int64_t>(block_times.size());
        s.secs_since_last_block = (now - last_block_time) * 60.0;
        std::int64_t pending_wu = 0;
        for (const auto& p : pending) pending_wu += p.weight_wu;
        s.blockspace_util = std::min(
            1.0, static_cast<double>(pending_wu) / static_cast<double>(config.block_capacity_wu));
        out.data.snapshots.push_back(s);
    };

    while (true) {
        const double next_event = std::min({next_block, next_arrival, next_snapshot});
        if (next_event > config.horizon_minutes) break;
        t = next_event;

        if (t == next_snapshot) {
            take_snapshot(t);
            next_snapshot += snap_step;
            continue;
        }
        if (t == next_arrival) {
            make_agent(t, static_cast<std::int64_t>(block_times.size()), std::nullopt);
            next_arrival = t + arrival_rng.exponential(config.arrival_rate_lambda);
            continue;
        }

        // Block event: greedy fee-rate packing up to capacity.
        block_times.push_back(t);
        const std::int64_t height = static_cast<std::int64_t>(block_times.size());
        std::sort(pending.begin(), pending.end(),
                  [](const PendingTx& a, const PendingTx& b) { return a.before(b); });

        BlockRecord block;
        block.height = height;
        block.time_minutes = t;
        std::int64_t remaining = config.block_capacity_wu;
        std::vector<PendingTx> still_pending;
        still_pending.reserve(pending.size());
        for (const auto& p : pending) {
            if (p.weight_wu <= remaining) {
                remaining -= p.weight_wu;
                block.filled_wu += p.weight_wu;
                block.included_agents.push_back(p.agent_id);
                SimAgent& agent = out.agents[static_cast<std::size_t>(p.agent_id)];
                agent.realized_wait_blocks = height - p.blocks_at_entry;
                const double fee_usd =
                    static_cast<double>(agent.chosen_fee_sats) / config.sats_per_usd;
                agent.surplus = agent.value -
                                agent.c * static_cast<double>(*agent.realized_wait_blocks) -
                                fee_usd;

                core::TxRecord tx;
                tx.tx_id = "sim-" + std::to_string(p.agent_id);
                tx.fee_sats = p.fee_sats;
                tx.weight_wu = p.weight_wu;
                tx.vsize_vb = p.vsize_vb;
                tx.fee_rate = core::Rational(p.fee_sats, p.vsize_vb);
                tx.entry_time = static_cast<std::int64_t>(std::llround(p.entry_minutes * 60.0));
                tx.confirm_time = static_cast<std::int64_t>(std::llround(t * 60.0));
                tx.confirm_height = height;
                tx.wait_blocks = *agent.realized_wait_blocks;
                tx.total_output_sats = std::max<std::int64_t>(1, p.fee_sats * 50);
                out.data.txs.push_back(std::move(tx));
            } else {
                still_pending.push_back(p);
            }
        }
        pending.swap(still_pending);
        last_block_time = t;
        out.blocks.push_back(std::move(block));
        next_block = t + block_rng.exponential(config.block_rate_mu);
    }

    out.unconfirmed = static_cast<std::int64_t>(pending.size());

    if (!out.data.txs.empty()) {
        auto assignment = core::assign_epochs(out.data.txs, out.data.snapshots,
                                              config.epoch_window_secs,
                                              /*max_gap_secs=*/3600 * 24);
        out.data.txs = std::move(assignment.txs);
        out.data.epochs = std::move(assignment.epochs);
        core::rank_dataset(out.data);
    }
    return out;
}

SingleCrossingReport check_single_crossing(const SimDataset& dataset) {
    if (dataset.fee_mode != FeePolicy::Mode::equilibrium) {
        throw std::invalid_argument("single-crossing check requires equilibrium mode");
    }

    // Group confirmed transactions by epoch; within each epoch count pairs
    // where a strictly cheaper delay cost obtained a strictly higher
    // percentile. Fee-rate ties share a percentile, so they never count.
    std::map<std::int64_t, std::vector<std::pair<double, double>>> by_epoch;
    for (const auto& tx : dataset.data.txs) {
        if (!tx.percentile) continue;
        const std::int64_t agent_id = std::stoll(tx.tx_id.substr(4));
        const SimAgent& agent = dataset.agents[static_cast<std::size_t>(agent_id)];
        by_epoch[tx.epoch_id].push_back({agent.c, tx.percentile->to_double()});
    }

    SingleCrossingReport report;
    for (auto& [epoch, rows] : by_epoch) {
        const std::size_t n = rows.size();
        report.pairs_checked += static_cast<std::int64_t>(n * (n - 1) / 2);

        // Compress percentiles, then walk cost groups in ascending order and
        // count already-seen percentiles strictly above the current one.
        std::vector<double> ps;
        ps.reserve(n);
        for (const auto& r : rows) ps.push_back(r.second);
        std::sort(ps.begin(), ps.end());
        ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
        auto p_rank = [&](double p) {
            return static_cast<std::size_t>(
                std::distance(ps.begin(), std::lower_bound(ps.begin(), ps.end(), p)));
        };

        std::vector<std::int64_t> bit(ps.size() + 1, 0);
        auto bit_add = [&](std::size_t i) {
            for (++i; i < bit.size(); i += i & (~i + 1)) ++bit[i];
        };
        auto bit_prefix = [&](std::size_t i) {  // count of entries with rank <= i
            std::int64_t s = 0;
            for (++i; i > 0; i -= i & (~i + 1)) s += bit[i];
            return s;
        };

        std::sort(rows.begin(), rows.end());
        std::int64_t inserted = 0;
        std::size_t i = 0;
        while (i < n) {
            std::size_t j = i;
            while (j + 1 < n && rows[j + 1].first == rows[i].first) ++j;
            for (std::size_t k = i; k <= j; ++k) {
                const std::size_t r = p_rank(rows[k].second);
                report.violations += inserted - bit_prefix(r);
            }
            for (std::size_t k = i; k <= j; ++k) {
                bit_add(p_rank(rows[k].second));
                ++inserted;
            }
            i = j + 1;
        }
    }
    return report;
}

}  // namespace sim
}  // namespace feelab

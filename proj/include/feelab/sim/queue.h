// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_SIM_QUEUE_H
#define FEELAB_SIM_QUEUE_H

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "feelab/core/types.h"
#include "feelab/sim/dist.h"
#include "feelab/sim/vcg.h"

namespace feelab {
namespace sim {

struct SimConfig {
    double block_rate_mu = 0.1;        // blocks per minute
    std::int64_t block_capacity_wu = 4'000'000;
    double arrival_rate_lambda = 5.0;  // transactions per minute

    DistSpec cost_dist = DistSpec::lognormal(0.0, 1.0);   // c_i, USD per block
    DistSpec value_dist = DistSpec::constant(1e9);        // R_i, USD
    DistSpec weight_dist = DistSpec::constant(800.0);     // weight units

    double kappa = 1.0;           // schedule normalization
    double horizon_minutes = 600.0;
    std::uint64_t seed = 1;

    double sats_per_usd = 1000.0;     // fee quantization scale
    double snapshot_period_secs = 25.0;
    std::int64_t epoch_window_secs = core::kDefaultWindowLen;

    void validate() const;
};

// Fee assignment rule. Exogenous fees are consumed in arrival order
// (pre-seeded backlog first); equilibrium mode prices each agent's cost
// quantile on the VCG schedule implied by the planned delay curve.
struct FeePolicy {
    enum class Mode { exogenous, equilibrium };

    Mode mode = Mode::exogenous;
    std::vector<std::int64_t> exogenous_fees;
    std::function<double(double)> planned_delay_blocks;  // W(q), equilibrium mode
    int schedule_grid = 512;

    static FeePolicy exogenous(std::vector<std::int64_t> fees);
    static FeePolicy equilibrium(std::function<double(double)> planned_delay_blocks,
                                 int schedule_grid = 512);
};

struct SimAgent {
    std::int64_t agent_id = 0;
    double c = 0.0;       // delay cost per block, USD
    double value = 0.0;   // willingness to pay R, USD
    std::int64_t weight_wu = 0;
    std::int64_t chosen_fee_sats = 0;
    double cost_quantile = 0.0;
    double entry_minutes = 0.0;
    std::optional<std::int64_t> realized_wait_blocks;
    double surplus = 0.0;  // R - c * wait - fee, set when confirmed
    bool participating = true;
};

// Pre-seeded backlog entry (present at t = 0).
struct SeededTx {
    std::int64_t fee_sats = 0;
    std::int64_t weight_wu = 400;
};

struct BlockRecord {
    std::int64_t height = 0;
    double time_minutes = 0.0;
    std::int64_t filled_wu = 0;
    std::vector<std::int64_t> included_agents;
};

struct SimDataset {
    core::Dataset data;                 // txs, epochs, snapshots
    std::vector<SimAgent> agents;       // ground truth, indexed by agent_id
    std::vector<BlockRecord> blocks;
    FeePolicy::Mode fee_mode = FeePolicy::Mode::exogenous;
    FeeSchedule planned_schedule;       // equilibrium mode only (USD per WU)
    std::int64_t non_participants = 0;
    std::int64_t unconfirmed = 0;
};

// Runs the priority-queue event loop: Poisson block and transaction
// arrivals; at each block the backlog is sorted by fee rate (ties broken by
// entry time, then id) and packed greedily up to capacity. Deterministic
// given the config seed.
SimDataset simulate_queue(const SimConfig& config, const FeePolicy& policy,
                          const std::vector<SeededTx>& seeded = {});

struct SingleCrossingReport {
    std::int64_t pairs_checked = 0;  // informative only
    std::int64_t violations = 0;
    bool ok() const { return violations == 0; }
};

// Verifies that realized within-epoch priority percentiles are monotone in
// the agents' delay costs (rank agreement up to fee-rate ties). Requires an
// equilibrium-mode dataset with ranked transactions.
SingleCrossingReport check_single_crossing(const SimDataset& dataset);

}  // namespace sim
}  // namespace feelab

#endif  // FEELAB_SIM_QUEUE_H

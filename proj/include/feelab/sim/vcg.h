// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_SIM_VCG_H
#define FEELAB_SIM_VCG_H

#include <cstddef>
#include <functional>
#include <vector>

namespace feelab {
namespace sim {

// A frozen priority-queue instance for payment computations. Index 0 is the
// highest-priority transaction; delays are weakly increasing down the queue.
struct StaticInstance {
    std::vector<double> costs;        // per-block delay cost, priority order
    std::vector<double> slot_delays;  // delay (blocks) of queue slot k
    int slots_per_block = 1;

    std::size_t size() const { return costs.size(); }

    // Equal-size instance where the slot schedule is ceil(k / slots_per_block).
    static StaticInstance equal_size(std::vector<double> costs_priority_order,
                                     int slots_per_block);
};

// Externality payment of the transaction at (1-based) rank m: the delay-cost
// increase its presence imposes on everyone below it,
// sum_{j>m} c_j (W_j - W_{j-1}).
double vcg_payment_discrete(const StaticInstance& inst, std::size_t m);

// Same payment by removal and re-simulation: drop rank m, reassign the
// remaining transactions to the same block-slot schedule, and sum each
// other transaction's delay change.
double vcg_payment_bruteforce(const StaticInstance& inst, std::size_t m);

// Continuous VCG payment schedule b(p) = kappa * weight * int_0^p c(q) D(q) dq
// on a uniform grid, by composite trapezoid. b(0) = 0 and b is nondecreasing.
struct FeeSchedule {
    std::vector<double> grid;    // p_0 = 0 .. p_m = 1
    std::vector<double> values;  // b(p_j)

    double eval(double p) const;  // linear interpolation, clamped to [0,1]
};

FeeSchedule compute_vcg_schedule(const std::function<double(double)>& cost_quantile,
                                 const std::function<double(double)>& slope,
                                 double kappa, double weight_wu, int grid_m);

}  // namespace sim
}  // namespace feelab

#endif  // FEELAB_SIM_VCG_H

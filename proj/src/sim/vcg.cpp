// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/sim/vcg.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace feelab {
namespace sim {

StaticInstance StaticInstance::equal_size(std::vector<double> costs_priority_order,
                                          int slots_per_block) {
    if (slots_per_block < 1) {
        throw std::invalid_argument("slots_per_block must be >= 1");
    }
    StaticInstance inst;
    inst.costs = std::move(costs_priority_order);
    inst.slots_per_block = slots_per_block;
    inst.slot_delays.resize(inst.costs.size());
    for (std::size_t k = 0; k < inst.costs.size(); ++k) {
        inst.slot_delays[k] = static_cast<double>(k / slots_per_block + 1);
    }
    return inst;
}

double vcg_payment_discrete(const StaticInstance& inst, std::size_t m) {
    const std::size_t n = inst.size();
    if (m < 1 || m > n) {
        throw std::invalid_argument("vcg rank out of range");
    }
    double total = 0.0;
    for (std::size_t j = m + 1; j <= n; ++j) {
        total += inst.costs[j - 1] * (inst.slot_delays[j - 1] - inst.slot_delays[j - 2]);
    }
    return total;
}

double vcg_payment_bruteforce(const StaticInstance& inst, std::size_t m) {
    const std::size_t n = inst.size();
    if (m < 1 || m > n) {
        throw std::invalid_argument("vcg rank out of range");
    }
    // With m present: transaction at rank j occupies slot j.
    // Without m: everyone below m moves up one slot; the slot schedule itself
    // is unchanged.
    double total = 0.0;
    std::size_t slot = 0;
    for (std::size_t j = 1; j <= n; ++j) {
        if (j == m) continue;
        ++slot;
        const double with_m = inst.slot_delays[j - 1];
        const double without_m = inst.slot_delays[slot - 1];
        total += inst.costs[j - 1] * (with_m - without_m);
    }
    return total;
}

double FeeSchedule::eval(double p) const {
    if (grid.empty()) throw std::logic_error("empty fee schedule");
    p = std::clamp(p, grid.front(), grid.back());
    auto it = std::upper_bound(grid.begin(), grid.end(), p);
    if (it == grid.begin()) return values.front();
    if (it == grid.end()) return values.back();
    std::size_t hi = static_cast<std::size_t>(std::distance(grid.begin(), it));
    std::size_t lo = hi - 1;
    const double t = (p - grid[lo]) / (grid[hi] - grid[lo]);
    return values[lo] + t * (values[hi] - values[lo]);
}

FeeSchedule compute_vcg_schedule(const std::function<double(double)>& cost_quantile,
                                 const std::function<double(double)>& slope,
                                 double kappa, double weight_wu, int grid_m) {
    if (grid_m < 2) throw std::invalid_argument("schedule grid must have at least 2 cells");

    FeeSchedule sched;
    sched.grid.resize(static_cast<std::size_t>(grid_m) + 1);
    sched.values.resize(sched.grid.size());

    std::vector<double> integrand(sched.grid.size());
    for (std::size_t j = 0; j < sched.grid.size(); ++j) {
        const double p = static_cast<double>(j) / grid_m;
        sched.grid[j] = p;
        const double c = cost_quantile(p);
        const double d = slope(p);
        if (c < 0.0 || d < 0.0) {
            throw std::invalid_argument("negative cost or slope sample in VCG schedule");
        }
        integrand[j] = c * d;
    }

    sched.values[0] = 0.0;
    const double h = 1.0 / grid_m;
    for (std::size_t j = 1; j < sched.grid.size(); ++j) {
        sched.values[j] =
            sched.values[j - 1] + 0.5 * h * (integrand[j - 1] + integrand[j]) * kappa * weight_wu;
    }
    return sched;
}

}  // namespace sim
}  // namespace feelab

// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_SIM_DIST_H
#define FEELAB_SIM_DIST_H

#include <cmath>
#include <stdexcept>
#include <string>

#include "feelab/core/rng.h"

namespace feelab {
namespace sim {

// Distribution spec for simulator populations (delay costs, values, weights).
struct DistSpec {
    enum class Kind { constant, uniform, lognormal };

    Kind kind = Kind::constant;
    double a = 1.0;  // constant value / uniform lo / lognormal mu
    double b = 0.0;  // uniform hi / lognormal sigma

    static DistSpec constant(double v) { return {Kind::constant, v, 0.0}; }
    static DistSpec uniform(double lo, double hi) { return {Kind::uniform, lo, hi}; }
    static DistSpec lognormal(double mu, double sigma) { return {Kind::lognormal, mu, sigma}; }

    double sample(core::Rng& rng) const {
        switch (kind) {
            case Kind::constant: return a;
            case Kind::uniform: return rng.uniform(a, b);
            case Kind::lognormal: return rng.lognormal(a, b);
        }
        return a;
    }

    // F(x): fraction of the population below x.
    double cdf(double x) const {
        switch (kind) {
            case Kind::constant: return x < a ? 0.0 : (x > a ? 1.0 : 0.5);
            case Kind::uniform:
                if (x <= a) return 0.0;
                if (x >= b) return 1.0;
                return (x - a) / (b - a);
            case Kind::lognormal:
                if (x <= 0.0) return 0.0;
                return 0.5 * (1.0 + std::erf((std::log(x) - a) / (b * std::sqrt(2.0))));
        }
        return 0.0;
    }

    // Quantile function F^{-1}(q) for q in (0,1).
    double quantile(double q) const;

    std::string str() const;
};

// Inverse standard normal CDF (Acklam's rational approximation, |err| < 1.2e-9).
double inv_normal_cdf(double p);

}  // namespace sim
}  // namespace feelab

#endif  // FEELAB_SIM_DIST_H

// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/stage2/ispline.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace feelab {
namespace stage2 {

namespace {

// Nonzero normalized B-splines of the given order at x, by the Cox-de Boor
// triangular recurrence. `span` is the index with t[span] <= x < t[span+1].
void basis_funs(const std::vector<double>& t, std::size_t span, double x, int order,
                std::vector<double>& n_out) {
    const int d = order - 1;  // polynomial degree
    n_out.assign(static_cast<std::size_t>(order), 0.0);
    std::vector<double> left(static_cast<std::size_t>(order), 0.0);
    std::vector<double> right(static_cast<std::size_t>(order), 0.0);
    n_out[0] = 1.0;
    for (int j = 1; j <= d; ++j) {
        left[static_cast<std::size_t>(j)] = x - t[span + 1 - static_cast<std::size_t>(j)];
        right[static_cast<std::size_t>(j)] = t[span + static_cast<std::size_t>(j)] - x;
        double saved = 0.0;
        for (int r = 0; r < j; ++r) {
            const double den = right[static_cast<std::size_t>(r + 1)] +
                               left[static_cast<std::size_t>(j - r)];
            const double temp = den != 0.0 ? n_out[static_cast<std::size_t>(r)] / den : 0.0;
            n_out[static_cast<std::size_t>(r)] =
                saved + right[static_cast<std::size_t>(r + 1)] * temp;
            saved = left[static_cast<std::size_t>(j - r)] * temp;
        }
        n_out[static_cast<std::size_t>(j)] = saved;
    }
}

}  // namespace

ISplineBasis::ISplineBasis(std::vector<double> knots, int degree)
    : knots_(std::move(knots)), degree_(degree) {
    if (degree_ < 0) throw std::invalid_argument("spline degree must be >= 0");
    if (knots_.size() < 2) throw std::invalid_argument("spline needs at least 2 knots");
    for (std::size_t i = 0; i + 1 < knots_.size(); ++i) {
        if (knots_[i + 1] <= knots_[i]) {
            throw std::invalid_argument("spline knots must be strictly increasing");
        }
    }

    // The integral of an order-k M-spline is a tail sum of order-(k+1)
    // B-splines on the same padded sequence, so pad boundaries (k+1)-fold.
    const int k = degree_ + 1;  // M-spline order
    bspline_order_ = k + 1;
    padded_.clear();
    for (int r = 0; r < bspline_order_; ++r) padded_.push_back(knots_.front());
    for (std::size_t i = 1; i + 1 < knots_.size(); ++i) padded_.push_back(knots_[i]);
    for (int r = 0; r < bspline_order_; ++r) padded_.push_back(knots_.back());

    n_basis_ = knots_.size() - 2 + static_cast<std::size_t>(k);
}

std::vector<double> ISplineBasis::eval(double x) const {
    x = std::clamp(x, knots_.front(), knots_.back());

    // Number of order-(k+1) B-splines on the padded sequence.
    const std::size_t n_b = padded_.size() - static_cast<std::size_t>(bspline_order_);

    // Knot span: padded_[span] <= x < padded_[span+1], with the right
    // boundary mapped into the last nonempty interval.
    std::size_t span;
    if (x >= knots_.back()) {
        span = padded_.size() - static_cast<std::size_t>(bspline_order_) - 1;
    } else {
        auto it = std::upper_bound(padded_.begin(), padded_.end(), x);
        span = static_cast<std::size_t>(std::distance(padded_.begin(), it)) - 1;
    }

    std::vector<double> nz;
    basis_funs(padded_, span, x, bspline_order_, nz);

    // B-spline j (0-based) is nonzero for j in [span - order + 1, span].
    // I_l(x) = sum of B_j(x) for j >= l + 1.
    // A spline whose support lies fully left of x contributes its whole unit
    // mass through the partition of unity; one fully right contributes zero.
    std::vector<double> out(n_basis_, 0.0);
    const std::size_t j_lo = span + 1 - static_cast<std::size_t>(bspline_order_);
    for (std::size_t l = 0; l < n_basis_; ++l) {
        double s = 0.0;
        for (std::size_t r = 0; r < static_cast<std::size_t>(bspline_order_); ++r) {
            const std::size_t j = j_lo + r;
            if (j >= l + 1 && j < n_b) s += nz[r];
        }
        out[l] = std::min(1.0, std::max(0.0, s));
    }
    return out;
}

std::vector<std::vector<double>> ISplineBasis::design(const std::vector<double>& values) const {
    std::vector<std::vector<double>> rows;
    rows.reserve(values.size());
    for (double v : values) rows.push_back(eval(v));
    return rows;
}

std::vector<double> quantile_knots(std::vector<double> values,
                                   const std::vector<double>& quantiles) {
    if (values.empty()) throw std::invalid_argument("no values for quantile knots");
    std::sort(values.begin(), values.end());
    std::vector<double> knots;
    knots.reserve(quantiles.size());
    for (double q : quantiles) {
        if (q < 0.0 || q > 1.0) throw std::invalid_argument("knot quantile outside [0,1]");
        const double pos = q * static_cast<double>(values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        knots.push_back(values[lo] * (1.0 - frac) + values[hi] * frac);
    }
    std::sort(knots.begin(), knots.end());
    knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
    if (knots.size() < 2) throw std::invalid_argument("degenerate quantile knots");
    return knots;
}

}  // namespace stage2
}  // namespace feelab

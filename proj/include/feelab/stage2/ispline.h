// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_STAGE2_ISPLINE_H
#define FEELAB_STAGE2_ISPLINE_H

#include <cstddef>
#include <vector>

namespace feelab {
namespace stage2 {

// Monotone I-spline basis: running integrals of the normalized M-spline
// family of polynomial degree `degree` on the given strictly increasing knot
// sequence (boundaries included). Each basis function is weakly increasing,
// 0 at the lower boundary and 1 at the upper boundary; inputs are clamped to
// the knot span. Nonnegative coefficient combinations are therefore weakly
// increasing functions.
//
// With J knots and degree d there are (J - 2) + (d + 1) basis functions:
// 5 knots at cubic degree give the 7-function family used by the fee stage.
class ISplineBasis {
public:
    ISplineBasis(std::vector<double> knots, int degree);

    std::size_t size() const { return n_basis_; }
    int degree() const { return degree_; }
    const std::vector<double>& knots() const { return knots_; }

    // All basis functions at one point (clamped to the knot span).
    std::vector<double> eval(double x) const;

    // Rows = values, columns = basis functions.
    std::vector<std::vector<double>> design(const std::vector<double>& values) const;

private:
    std::vector<double> knots_;     // distinct, strictly increasing
    std::vector<double> padded_;    // boundary knots repeated for the B-spline order
    int degree_ = 3;
    std::size_t n_basis_ = 0;
    int bspline_order_ = 0;  // order of the B-splines whose tail sums give I-splines
};

// Convenience: basis matrix for a value vector on quantile-placed knots.
std::vector<double> quantile_knots(std::vector<double> values,
                                   const std::vector<double>& quantiles);

}  // namespace stage2
}  // namespace feelab

#endif  // FEELAB_STAGE2_ISPLINE_H

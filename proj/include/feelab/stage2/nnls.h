// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_STAGE2_NNLS_H
#define FEELAB_STAGE2_NNLS_H

#include <Eigen/Dense>
#include <vector>

namespace feelab {
namespace stage2 {

// Least squares with sign constraints on a subset of coefficients:
//   min ||A x - b||^2  s.t.  x_j >= 0 for j with constrained[j] true.
// Active-set iteration in the style of Lawson-Hanson, run on the normal
// equations; free columns stay in the passive set throughout.
struct NnlsResult {
    Eigen::VectorXd x;
    int iterations = 0;
    bool converged = false;
};

NnlsResult nnls_partial(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                        const std::vector<bool>& constrained, double tol = 1e-12,
                        int max_iter = 0);

// Convenience wrapper forming the normal equations from A and b.
NnlsResult nnls_partial_ls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                           const std::vector<bool>& constrained, double tol = 1e-12);

}  // namespace stage2
}  // namespace feelab

#endif  // FEELAB_STAGE2_NNLS_H

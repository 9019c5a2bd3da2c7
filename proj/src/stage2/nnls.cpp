// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/stage2/nnls.h"

#include <limits>
#include <stdexcept>

namespace feelab {
namespace stage2 {

namespace {

Eigen::VectorXd solve_passive(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                              const std::vector<int>& passive) {
    const int m = static_cast<int>(passive.size());
    Eigen::MatrixXd g(m, m);
    Eigen::VectorXd r(m);
    for (int i = 0; i < m; ++i) {
        r(i) = rhs(passive[static_cast<std::size_t>(i)]);
        for (int j = 0; j < m; ++j) {
            g(i, j) = gram(passive[static_cast<std::size_t>(i)], passive[static_cast<std::size_t>(j)]);
        }
    }
    return g.ldlt().solve(r);
}

}  // namespace

NnlsResult nnls_partial(const Eigen::MatrixXd& gram, const Eigen::VectorXd& rhs,
                        const std::vector<bool>& constrained, double tol, int max_iter) {
    const int p = static_cast<int>(gram.rows());
    if (gram.cols() != p || rhs.size() != p ||
        static_cast<int>(constrained.size()) != p) {
        throw std::invalid_argument("nnls dimension mismatch");
    }
    if (max_iter <= 0) max_iter = 3 * p + 30;

    NnlsResult res;
    res.x = Eigen::VectorXd::Zero(p);

    std::vector<int> passive;
    std::vector<bool> in_passive(static_cast<std::size_t>(p), false);
    for (int j = 0; j < p; ++j) {
        if (!constrained[static_cast<std::size_t>(j)]) {
            passive.push_back(j);
            in_passive[static_cast<std::size_t>(j)] = true;
        }
    }

    // Scale-aware tolerance for the gradient test.
    const double scale = std::max(1.0, rhs.cwiseAbs().maxCoeff());
    const double grad_tol = tol * scale;

    auto refresh_passive_solution = [&]() {
        while (true) {
            if (passive.empty()) return;
            Eigen::VectorXd z = solve_passive(gram, rhs, passive);
            // Feasible when every constrained passive coefficient stays positive.
            int worst = -1;
            double alpha = std::numeric_limits<double>::infinity();
            for (int i = 0; i < static_cast<int>(passive.size()); ++i) {
                const int j = passive[static_cast<std::size_t>(i)];
                if (!constrained[static_cast<std::size_t>(j)]) continue;
                if (z(i) > 0.0) continue;
                const double xj = res.x(j);
                const double step = xj / (xj - z(i));
                if (step < alpha) {
                    alpha = step;
                    worst = j;
                }
            }
            if (worst < 0) {
                for (int i = 0; i < static_cast<int>(passive.size()); ++i) {
                    res.x(passive[static_cast<std::size_t>(i)]) = z(i);
                }
                return;
            }
            // Back off to the boundary and drop the coefficients that hit it.
            for (int i = 0; i < static_cast<int>(passive.size()); ++i) {
                const int j = passive[static_cast<std::size_t>(i)];
                res.x(j) += alpha * (z(i) - res.x(j));
            }
            std::vector<int> next;
            for (int j : passive) {
                const bool at_zero = constrained[static_cast<std::size_t>(j)] &&
                                     (j == worst || res.x(j) <= 0.0);
                if (at_zero) {
                    res.x(j) = 0.0;
                    in_passive[static_cast<std::size_t>(j)] = false;
                } else {
                    next.push_back(j);
                }
            }
            passive.swap(next);
        }
    };

    refresh_passive_solution();

    for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
        const Eigen::VectorXd grad = rhs - gram * res.x;  // = A'(b - Ax)
        int best = -1;
        double best_g = grad_tol;
        for (int j = 0; j < p; ++j) {
            if (in_passive[static_cast<std::size_t>(j)]) continue;
            if (grad(j) > best_g) {
                best_g = grad(j);
                best = j;
            }
        }
        if (best < 0) {
            res.converged = true;
            return res;
        }
        passive.push_back(best);
        in_passive[static_cast<std::size_t>(best)] = true;
        refresh_passive_solution();
    }
    return res;  // converged stays false: iteration budget exhausted
}

NnlsResult nnls_partial_ls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                           const std::vector<bool>& constrained, double tol) {
    const Eigen::MatrixXd gram = a.transpose() * a;
    const Eigen::VectorXd rhs = a.transpose() * b;
    return nnls_partial(gram, rhs, constrained, tol);
}

}  // namespace stage2
}  // namespace feelab

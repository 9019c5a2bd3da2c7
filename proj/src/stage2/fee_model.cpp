// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/stage2/fee_model.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "feelab/stage2/nnls.h"

namespace feelab {
namespace stage2 {

namespace {

bool has_slope(const stage1::DelayFit& delay, std::size_t i) {
    return i < delay.slope.size() && std::isfinite(delay.slope[i]);
}

}  // namespace

std::size_t FeeFit::col(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (names[j] == name) return j;
    }
    throw std::invalid_argument("no such coefficient: " + name);
}

FeeDesign build_fee_design(const core::Dataset& data, const stage1::DelayFit& delay,
                           const FeeSpec& spec) {
    FeeDesign design;
    design.spline_degree = spec.spline_degree;

    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.txs.size(); ++i) {
        const auto& tx = data.txs[i];
        if (!has_slope(delay, i) || !tx.state_valid || !tx.percentile) {
            ++design.excluded_missing;
            continue;
        }
        if (tx.fee_rate.to_double() < spec.fee_floor_sat_vb) {
            ++design.excluded_below_floor;
            continue;
        }
        rows.push_back(i);
    }
    if (rows.empty()) throw std::runtime_error("fee design has no usable rows");

    design.names.clear();
    if (spec.include_slope) design.names.push_back("log_slope");
    if (spec.include_tx_controls) {
        design.names.insert(design.names.end(),
                            {"rbf", "cpfp", "log_total_output", "log_n_inputs", "log_n_outputs",
                             "op_return", "inscription", "log_weight"});
    }
    if (spec.include_state_controls) {
        design.names.insert(design.names.end(),
                            {"util", "log_secs_since_block", "log_mempool_bytes"});
    }

    // Spline block on the impatience proxy; rows without a proxy get zero
    // basis values plus a missingness indicator.
    ISplineBasis* basis = nullptr;
    ISplineBasis basis_storage({0.0, 1.0}, 1);
    if (spec.use_spline) {
        std::vector<double> observed;
        for (std::size_t i : rows) {
            if (data.txs[i].impatience) observed.push_back(*data.txs[i].impatience);
        }
        if (observed.empty()) {
            throw std::runtime_error("impatience spline requested but no row carries the proxy");
        }
        design.spline_knots = quantile_knots(observed, spec.knot_quantiles);
        basis_storage = ISplineBasis(design.spline_knots, spec.spline_degree);
        basis = &basis_storage;
        design.has_spline = true;
        design.spline_begin = design.names.size();
        design.spline_count = basis->size();
        for (std::size_t l = 0; l < basis->size(); ++l) {
            design.names.push_back("impatience_s" + std::to_string(l + 1));
        }
        design.names.push_back("impatience_missing");
        std::sort(observed.begin(), observed.end());
        design.impatience_sorted = std::move(observed);
    }

    const std::size_t p = design.names.size();
    design.x.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    design.y.resize(static_cast<Eigen::Index>(rows.size()));
    design.cluster_of.reserve(rows.size());
    design.row_tx_index = rows;
    design.constrained.assign(p, false);
    if (design.has_spline) {
        for (std::size_t l = 0; l < design.spline_count; ++l) {
            design.constrained[design.spline_begin + l] = true;
        }
    }

    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& tx = data.txs[rows[r]];
        const auto ri = static_cast<Eigen::Index>(r);
        design.y(ri) = std::log(tx.fee_rate.to_double());
        design.cluster_of.push_back(tx.epoch_id);

        Eigen::Index c = 0;
        if (spec.include_slope) {
            design.x(ri, c++) = std::log(std::max(delay.slope[rows[r]], spec.slope_floor));
        }
        if (spec.include_tx_controls) {
            design.x(ri, c++) = tx.rbf ? 1.0 : 0.0;
            design.x(ri, c++) = tx.cpfp_package ? 1.0 : 0.0;
            design.x(ri, c++) = std::log(static_cast<double>(std::max<std::int64_t>(1, tx.total_output_sats)));
            design.x(ri, c++) = std::log(static_cast<double>(std::max<std::int64_t>(1, tx.n_inputs)));
            design.x(ri, c++) = std::log(static_cast<double>(std::max<std::int64_t>(1, tx.n_outputs)));
            design.x(ri, c++) = tx.has_op_return ? 1.0 : 0.0;
            design.x(ri, c++) = tx.has_inscription ? 1.0 : 0.0;
            design.x(ri, c++) = std::log(static_cast<double>(tx.weight_wu));
        }
        if (spec.include_state_controls) {
            design.x(ri, c++) = tx.state_blockspace_util;
            design.x(ri, c++) = std::log1p(tx.state_secs_since_block);
            design.x(ri, c++) = std::log(static_cast<double>(std::max<std::int64_t>(1, tx.state_mempool_bytes)));
        }
        if (design.has_spline) {
            if (tx.impatience) {
                const std::vector<double> b = basis->eval(*tx.impatience);
                for (double v : b) design.x(ri, c++) = v;
                design.x(ri, c++) = 0.0;
            } else {
                for (std::size_t l = 0; l < design.spline_count; ++l) design.x(ri, c++) = 0.0;
                design.x(ri, c++) = 1.0;
            }
        }
    }
    return design;
}

FeeFit fit_fe_ols(const FeeDesign& design, const FeeSpec& spec) {
    const Eigen::Index n = design.x.rows();
    const Eigen::Index p0 = design.x.cols();
    if (n == 0) throw std::runtime_error("empty fee design");

    // Cluster bookkeeping in first-appearance order.
    std::vector<std::int64_t> cluster_ids;
    std::vector<Eigen::Index> cluster_index(static_cast<std::size_t>(n));
    {
        std::map<std::int64_t, Eigen::Index> seen;
        for (Eigen::Index i = 0; i < n; ++i) {
            auto [it, inserted] =
                seen.emplace(design.cluster_of[static_cast<std::size_t>(i)],
                             static_cast<Eigen::Index>(cluster_ids.size()));
            if (inserted) cluster_ids.push_back(design.cluster_of[static_cast<std::size_t>(i)]);
            cluster_index[static_cast<std::size_t>(i)] = it->second;
        }
    }
    const Eigen::Index g = static_cast<Eigen::Index>(cluster_ids.size());

    Eigen::MatrixXd xw;
    Eigen::VectorXd yw;
    std::vector<std::string> names = design.names;
    Eigen::Index k_params;

    if (spec.use_fixed_effects) {
        if (g < 2) {
            throw std::runtime_error(
                "fee model with fixed effects needs at least 2 epochs (the single epoch absorbs everything)");
        }
        // Within-epoch demeaning of the outcome and every regressor.
        Eigen::MatrixXd xsum = Eigen::MatrixXd::Zero(g, p0);
        Eigen::VectorXd ysum = Eigen::VectorXd::Zero(g);
        Eigen::VectorXd count = Eigen::VectorXd::Zero(g);
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index c = cluster_index[static_cast<std::size_t>(i)];
            xsum.row(c) += design.x.row(i);
            ysum(c) += design.y(i);
            count(c) += 1.0;
        }
        xw = design.x;
        yw = design.y;
        for (Eigen::Index i = 0; i < n; ++i) {
            const Eigen::Index c = cluster_index[static_cast<std::size_t>(i)];
            xw.row(i) -= xsum.row(c) / count(c);
            yw(i) -= ysum(c) / count(c);
        }
        k_params = p0 + g;
    } else {
        xw.resize(n, p0 + 1);
        xw.col(0) = Eigen::VectorXd::Ones(n);
        xw.rightCols(p0) = design.x;
        yw = design.y;
        names.insert(names.begin(), "intercept");
        k_params = p0 + 1;
    }
    const Eigen::Index p = xw.cols();

    // Rank condition on the working design.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        std::string msg = "rank-deficient design after demeaning; collinear columns:";
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index j = qr.rank(); j < p; ++j) {
            msg += " " + names[static_cast<std::size_t>(perm(j))];
        }
        throw std::runtime_error(msg);
    }

    std::vector<bool> constrained(static_cast<std::size_t>(p), false);
    bool any_constrained = false;
    {
        const std::size_t shift = spec.use_fixed_effects ? 0 : 1;
        for (std::size_t j = 0; j < design.constrained.size(); ++j) {
            if (design.constrained[j]) {
                constrained[j + shift] = true;
                any_constrained = true;
            }
        }
    }

    FeeFit fit;
    fit.spec = spec;
    fit.names = names;
    if (any_constrained) {
        NnlsResult sol = nnls_partial_ls(xw, yw, constrained);
        if (!sol.converged) throw std::runtime_error("constrained fee fit did not converge");
        fit.coef = sol.x;
    } else {
        fit.coef = qr.solve(yw);
    }

    const Eigen::VectorXd resid = yw - xw * fit.coef;

    // Epoch effects from the raw scale.
    fit.xi.clear();
    if (spec.use_fixed_effects) {
        Eigen::VectorXd rsum = Eigen::VectorXd::Zero(g);
        Eigen::VectorXd count = Eigen::VectorXd::Zero(g);
        const Eigen::VectorXd raw_resid = design.y - design.x * fit.coef;
        for (Eigen::Index i = 0; i < n; ++i) {
            rsum(cluster_index[static_cast<std::size_t>(i)]) += raw_resid(i);
            count(cluster_index[static_cast<std::size_t>(i)]) += 1.0;
        }
        fit.alpha0 = raw_resid.sum() / static_cast<double>(n);
        for (Eigen::Index c = 0; c < g; ++c) {
            fit.xi.emplace_back(cluster_ids[static_cast<std::size_t>(c)],
                                rsum(c) / count(c) - fit.alpha0);
        }
    } else {
        fit.alpha0 = fit.coef(0);
    }

    // Liang-Zeger sandwich over epochs with small-sample scaling.
    Eigen::MatrixXd bread = (xw.transpose() * xw).ldlt().solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(g, p);
    for (Eigen::Index i = 0; i < n; ++i) {
        scores.row(cluster_index[static_cast<std::size_t>(i)]) += resid(i) * xw.row(i);
    }
    Eigen::MatrixXd meat = scores.transpose() * scores;
    const double n_d = static_cast<double>(n);
    const double g_d = static_cast<double>(g);
    const double k_d = static_cast<double>(k_params);
    if (n_d <= k_d) {
        throw std::runtime_error("insufficient degrees of freedom: rows <= parameters");
    }
    double scale = 1.0;
    if (g > 1) scale = g_d / (g_d - 1.0) * (n_d - 1.0) / (n_d - k_d);
    fit.vcov = scale * bread * meat * bread;

    fit.residuals.assign(resid.data(), resid.data() + resid.size());
    fit.psi = smearing_factor(fit.residuals);

    const double sse = resid.squaredNorm();
    const double sst_w = (yw.array() - yw.mean()).square().sum();
    const double sst_raw = (design.y.array() - design.y.mean()).square().sum();
    fit.r2_within = sst_w > 0.0 ? 1.0 - sse / sst_w : 0.0;
    fit.r2_overall = sst_raw > 0.0 ? 1.0 - sse / sst_raw : 0.0;

    fit.n_rows = n;
    fit.n_clusters = g;
    fit.df_t = g_d - 1.0;

    fit.has_spline = design.has_spline;
    fit.spline_begin = design.spline_begin + (spec.use_fixed_effects ? 0 : 1);
    fit.spline_count = design.spline_count;
    fit.spline_knots = design.spline_knots;
    fit.spline_degree = design.spline_degree;
    fit.impatience_sorted = design.impatience_sorted;
    fit.row_tx_index = design.row_tx_index;
    fit.excluded_below_floor = design.excluded_below_floor;
    fit.excluded_missing = design.excluded_missing;
    return fit;
}

FeeFit fit_fee_model(const core::Dataset& data, const stage1::DelayFit& delay,
                     const FeeSpec& spec) {
    return fit_fe_ols(build_fee_design(data, delay, spec), spec);
}

double smearing_factor(const std::vector<double>& residuals) {
    if (residuals.empty()) throw std::invalid_argument("no residuals for the smearing factor");
    double s = 0.0;
    for (double e : residuals) s += std::exp(e);
    return s / static_cast<double>(residuals.size());
}

std::vector<double> smearing_predict(const FeeFit& fit, const Eigen::MatrixXd& rows) {
    const std::size_t offset = fit.spec.use_fixed_effects ? 0 : 1;
    if (rows.cols() + static_cast<Eigen::Index>(offset) != fit.coef.size()) {
        throw std::invalid_argument("prediction rows do not match the fitted design");
    }
    std::vector<double> out(static_cast<std::size_t>(rows.rows()));
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        double mu = fit.spec.use_fixed_effects ? fit.alpha0 : fit.coef(0);
        for (Eigen::Index j = 0; j < rows.cols(); ++j) {
            mu += rows(i, j) * fit.coef(j + static_cast<Eigen::Index>(offset));
        }
        out[static_cast<std::size_t>(i)] = std::exp(mu) * fit.psi;
    }
    return out;
}

std::vector<double> counterfactual(const FeeFit& fit, Eigen::MatrixXd rows,
                                   const std::map<std::string, double>& state, double pi,
                                   double below_eps_mean) {
    if (pi < 0.0 || pi > 1.0) {
        throw std::invalid_argument("selection probability must lie in [0,1]");
    }
    const std::size_t offset = fit.spec.use_fixed_effects ? 0 : 1;
    for (const auto& [name, value] : state) {
        const std::size_t j = fit.col(name) - offset;  // column in the raw design
        rows.col(static_cast<Eigen::Index>(j)).setConstant(value);
    }
    std::vector<double> m = smearing_predict(fit, rows);
    for (double& v : m) v = pi * v + (1.0 - pi) * below_eps_mean;
    return m;
}

std::pair<double, double> aggregate_spline_effect(const FeeFit& fit, double from_q, double to_q) {
    if (!fit.has_spline) {
        throw std::invalid_argument("fit has no impatience spline");
    }
    const auto& sorted = fit.impatience_sorted;
    if (sorted.empty()) throw std::logic_error("spline fit without impatience sample");
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(sorted.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
        const double frac = pos - static_cast<double>(lo);
        return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
    };

    ISplineBasis basis(fit.spline_knots, fit.spline_degree);
    const std::vector<double> b_from = basis.eval(quantile(from_q));
    const std::vector<double> b_to = basis.eval(quantile(to_q));

    double effect = 0.0;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(fit.coef.size());
    for (std::size_t l = 0; l < fit.spline_count; ++l) {
        const Eigen::Index j = static_cast<Eigen::Index>(fit.spline_begin + l);
        const double diff = b_to[l] - b_from[l];
        effect += fit.coef(j) * diff;
        grad(j) = diff;
    }
    const double var = grad.transpose() * fit.vcov * grad;
    return {effect, std::sqrt(std::max(0.0, var))};
}

}  // namespace stage2
}  // namespace feelab

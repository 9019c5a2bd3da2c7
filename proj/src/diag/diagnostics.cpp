// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/diag/diagnostics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <unordered_set>

namespace feelab {
namespace diag {

namespace {

struct Groups {
    std::vector<std::vector<std::size_t>> rows;  // per cluster
    std::size_t n = 0;
};

Groups group_rows(const std::vector<std::int64_t>& cluster_of) {
    std::map<std::int64_t, std::vector<std::size_t>> m;
    for (std::size_t i = 0; i < cluster_of.size(); ++i) m[cluster_of[i]].push_back(i);
    Groups g;
    g.n = cluster_of.size();
    for (auto& [id, rows] : m) g.rows.push_back(std::move(rows));
    return g;
}

double mean_of(const std::vector<double>& v, const std::vector<std::size_t>& idx) {
    double s = 0.0;
    for (std::size_t i : idx) s += v[i];
    return s / static_cast<double>(idx.size());
}

}  // namespace

IccEntry icc(const std::vector<double>& values, const std::vector<std::int64_t>& cluster_of,
             const std::string& name) {
    if (values.size() != cluster_of.size()) throw std::invalid_argument("icc size mismatch");
    if (values.size() < 2) throw std::invalid_argument("icc needs at least 2 rows");
    Groups g = group_rows(cluster_of);
    const std::size_t n_groups = g.rows.size();
    if (n_groups < 2) throw std::invalid_argument("icc needs at least 2 epochs");
    if (n_groups == values.size()) {
        throw std::invalid_argument("icc undefined: every epoch is a singleton");
    }

    const double n = static_cast<double>(values.size());
    const double grand = [&] {
        double s = 0.0;
        for (double v : values) s += v;
        return s / n;
    }();

    double ssb = 0.0, ssw = 0.0;
    for (const auto& rows : g.rows) {
        const double m = mean_of(values, rows);
        ssb += static_cast<double>(rows.size()) * (m - grand) * (m - grand);
        for (std::size_t i : rows) ssw += (values[i] - m) * (values[i] - m);
    }
    const double msb = ssb / (static_cast<double>(n_groups) - 1.0);
    const double msw = ssw / (n - static_cast<double>(n_groups));
    const double m_bar = n / static_cast<double>(n_groups);

    IccEntry e;
    e.name = name;
    const double denom = msb + (m_bar - 1.0) * msw;
    e.icc = denom > 0.0 ? std::clamp((msb - msw) / denom, 0.0, 1.0) : 0.0;
    e.mean_cluster_size = m_bar;
    e.design_effect = 1.0 + (m_bar - 1.0) * e.icc;
    e.effective_n = n / e.design_effect;
    return e;
}

std::vector<IccEntry> icc_report(const stage2::FeeDesign& design) {
    std::vector<IccEntry> out;
    std::vector<double> col(static_cast<std::size_t>(design.y.size()));
    for (Eigen::Index i = 0; i < design.y.size(); ++i) col[static_cast<std::size_t>(i)] = design.y(i);
    out.push_back(icc(col, design.cluster_of, "log_fee_rate"));
    for (std::size_t j = 0; j < design.names.size(); ++j) {
        for (Eigen::Index i = 0; i < design.x.rows(); ++i) {
            col[static_cast<std::size_t>(i)] = design.x(i, static_cast<Eigen::Index>(j));
        }
        out.push_back(icc(col, design.cluster_of, design.names[j]));
    }
    return out;
}

VarianceShares variance_decomposition(const std::vector<double>& values,
                                      const std::vector<std::int64_t>& cluster_of) {
    if (values.size() != cluster_of.size() || values.empty()) {
        throw std::invalid_argument("variance decomposition size mismatch");
    }
    Groups g = group_rows(cluster_of);
    if (g.rows.size() < 2) throw std::invalid_argument("need at least 2 epochs");

    const double n = static_cast<double>(values.size());
    double grand = 0.0;
    for (double v : values) grand += v;
    grand /= n;

    VarianceShares s;
    for (const auto& rows : g.rows) {
        const double m = mean_of(values, rows);
        s.between += static_cast<double>(rows.size()) * (m - grand) * (m - grand) / n;
        for (std::size_t i : rows) s.within += (values[i] - m) * (values[i] - m) / n;
    }
    s.total = s.between + s.within;
    s.icc = s.total > 0.0 ? s.between / s.total : 0.0;
    return s;
}

std::vector<double> fe_autocorrelation(const std::vector<double>& xi, int max_lag) {
    if (max_lag < 1) throw std::invalid_argument("max_lag must be >= 1");
    if (static_cast<int>(xi.size()) < max_lag + 2) {
        throw std::invalid_argument("series too short for the requested lags");
    }
    const double n = static_cast<double>(xi.size());
    double mean = 0.0;
    for (double v : xi) mean += v;
    mean /= n;
    double denom = 0.0;
    for (double v : xi) denom += (v - mean) * (v - mean);
    if (denom <= 0.0) throw std::invalid_argument("autocorrelation undefined for a constant series");

    std::vector<double> rho(static_cast<std::size_t>(max_lag));
    for (int k = 1; k <= max_lag; ++k) {
        double num = 0.0;
        for (std::size_t t = 0; t + static_cast<std::size_t>(k) < xi.size(); ++t) {
            num += (xi[t] - mean) * (xi[t + static_cast<std::size_t>(k)] - mean);
        }
        rho[static_cast<std::size_t>(k - 1)] = num / denom;
    }
    return rho;
}

core::Dataset subset_epoch_range(const core::Dataset& data, std::size_t first, std::size_t count) {
    if (first + count > data.epochs.size()) throw std::out_of_range("epoch range out of bounds");
    core::Dataset out;
    std::unordered_set<std::int64_t> keep;
    for (std::size_t e = first; e < first + count; ++e) {
        out.epochs.push_back(data.epochs[e]);
        keep.insert(data.epochs[e].epoch_id);
    }
    for (const auto& tx : data.txs) {
        if (keep.count(tx.epoch_id)) out.txs.push_back(tx);
    }
    return out;
}

RollingReport rolling_fit(const core::Dataset& data, const stage1::DelayStageConfig& delay_cfg,
                          const stage2::FeeSpec& fee_spec, int n_windows) {
    if (n_windows < 1) throw std::invalid_argument("need at least one window");
    const std::size_t e_total = data.epochs.size();
    if (e_total < static_cast<std::size_t>(n_windows)) {
        throw std::invalid_argument("fewer epochs than windows");
    }

    RollingReport report;
    for (int w = 0; w < n_windows; ++w) {
        const std::size_t first = static_cast<std::size_t>(w) * e_total / static_cast<std::size_t>(n_windows);
        const std::size_t last = static_cast<std::size_t>(w + 1) * e_total / static_cast<std::size_t>(n_windows);
        const std::size_t count = last - first;
        if (count < 2) throw std::invalid_argument("window with fewer than 2 epochs");

        core::Dataset slice = subset_epoch_range(data, first, count);
        stage1::DelayFit delay = stage1::run_delay_stage(slice, delay_cfg);
        stage2::FeeFit fit = stage2::fit_fee_model(slice, delay, fee_spec);

        RollingWindowFit wf;
        wf.first_epoch = first;
        wf.last_epoch = last - 1;
        wf.names = fit.names;
        for (Eigen::Index j = 0; j < fit.coef.size(); ++j) {
            wf.coef.push_back(fit.coef(j));
            wf.se.push_back(fit.se(static_cast<std::size_t>(j)));
        }
        report.windows.push_back(std::move(wf));
    }

    report.names = report.windows.front().names;
    const std::size_t p = report.names.size();
    report.coef_range.assign(p, 0.0);
    report.range_over_se.assign(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        double lo = report.windows.front().coef[j];
        double hi = lo;
        double pooled = 0.0;
        for (const auto& w : report.windows) {
            lo = std::min(lo, w.coef[j]);
            hi = std::max(hi, w.coef[j]);
            pooled += w.se[j] * w.se[j];
        }
        pooled = std::sqrt(pooled / static_cast<double>(report.windows.size()));
        report.coef_range[j] = hi - lo;
        report.range_over_se[j] = pooled > 0.0 ? (hi - lo) / pooled : 0.0;
    }
    return report;
}

OosReport expanding_oos(const core::Dataset& data, const stage1::DelayStageConfig& delay_cfg,
                        const stage2::FeeSpec& fee_spec, const std::vector<double>& fractions) {
    OosReport report;
    const std::size_t e_total = data.epochs.size();

    for (double f : fractions) {
        OosSplit split;
        split.train_fraction = f;
        const std::size_t k = std::min<std::size_t>(
            e_total - 1, std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(
                                                      f * static_cast<double>(e_total)))));
        split.train_epochs = k;
        split.test_epochs = e_total - k;
        if (split.test_epochs == 0 || k < 2) {
            throw std::invalid_argument("training window must span >= 2 epochs and leave a test set");
        }

        core::Dataset train = subset_epoch_range(data, 0, k);
        core::Dataset test = subset_epoch_range(data, k, e_total - k);

        // Stage 1 on the training window: cross-fitted within training; the
        // test window is scored by a forest trained on all training rows.
        stage1::DelayFit train_delay = stage1::run_delay_stage(train, delay_cfg);
        stage2::FeeFit fit_full = stage2::fit_fee_model(train, train_delay, fee_spec);

        stage2::FeeSpec restricted = fee_spec;
        restricted.include_slope = false;
        stage2::FeeFit fit_restr = stage2::fit_fee_model(train, train_delay, restricted);

        // Forward slopes for test epochs.
        stage1::FeatureMatrix all_train;
        all_train.cols.assign(stage1::kDelayFeatureCount, {});
        std::vector<double> y_train;
        for (const auto& tx : train.txs) {
            if (!tx.confirm_time || !tx.state_valid || !tx.percentile) continue;
            all_train.cols[0].push_back(tx.percentile->to_double());
            all_train.cols[1].push_back(tx.state_blockspace_util);
            all_train.cols[2].push_back(static_cast<double>(tx.state_mempool_bytes));
            all_train.cols[3].push_back(static_cast<double>(tx.state_mempool_tx_count));
            y_train.push_back(std::log(static_cast<double>(*tx.confirm_time - tx.entry_time) + 1.0));
        }
        stage1::Forest fwd = stage1::Forest::fit(all_train, y_train, delay_cfg.forest,
                                                 /*stream_salt=*/0x0d05);

        stage1::DelayFit test_delay;
        test_delay.slope.assign(test.txs.size(), std::numeric_limits<double>::quiet_NaN());
        for (std::size_t e = 0; e < test.epochs.size(); ++e) {
            bool any = false;
            for (const auto& tx : test.txs) {
                if (tx.epoch_id == test.epochs[e].epoch_id && tx.confirm_time && tx.state_valid &&
                    tx.percentile) {
                    any = true;
                    break;
                }
            }
            if (!any) continue;
            stage1::EpochSchedule sched =
                stage1::monotone_schedule(fwd, test, e, delay_cfg.grid_points);
            for (std::size_t i = 0; i < test.txs.size(); ++i) {
                const auto& tx = test.txs[i];
                if (tx.epoch_id != test.epochs[e].epoch_id || !tx.confirm_time ||
                    !tx.state_valid || !tx.percentile) {
                    continue;
                }
                test_delay.slope[i] = stage1::local_slope(sched, tx.percentile->to_double(),
                                                          delay_cfg.fd_delta, delay_cfg.trim);
            }
        }

        stage2::FeeDesign test_full = stage2::build_fee_design(test, test_delay, fee_spec);
        stage2::FeeDesign test_restr = stage2::build_fee_design(test, test_delay, restricted);

        auto within_r2 = [](const stage2::FeeDesign& d, const Eigen::VectorXd& beta) {
            // Demean by test-epoch own means, then score with training betas.
            std::map<std::int64_t, std::pair<Eigen::VectorXd, double>> sums;
            std::map<std::int64_t, double> counts;
            const Eigen::Index p = d.x.cols();
            for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
                auto& entry = sums[d.cluster_of[static_cast<std::size_t>(i)]];
                if (entry.first.size() == 0) entry.first = Eigen::VectorXd::Zero(p);
                entry.first += d.x.row(i).transpose();
                entry.second += d.y(i);
                counts[d.cluster_of[static_cast<std::size_t>(i)]] += 1.0;
            }
            double sse = 0.0, sst = 0.0;
            for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
                const auto id = d.cluster_of[static_cast<std::size_t>(i)];
                const double cnt = counts[id];
                const Eigen::VectorXd xd = d.x.row(i).transpose() - sums[id].first / cnt;
                const double yd = d.y(i) - sums[id].second / cnt;
                const double pred = xd.dot(beta);
                sse += (yd - pred) * (yd - pred);
                sst += yd * yd;
            }
            return std::pair<double, double>{sse, sst};
        };

        auto [sse1, sst1] = within_r2(test_full, fit_full.coef);
        auto [sse2, sst2] = within_r2(test_restr, fit_restr.coef);
        if (sst1 < 1e-12 || sst2 < 1e-12) {
            split.degenerate = true;
            report.splits.push_back(split);
            continue;
        }
        split.r2_within_full = 1.0 - sse1 / sst1;
        split.r2_within_restricted = 1.0 - sse2 / sst2;
        split.delta_r2 = split.r2_within_full - split.r2_within_restricted;

        // Strict forecasting: raw outcome, training intercept, no test means.
        {
            double sse = 0.0, sst = 0.0;
            const double ybar = test_full.y.mean();
            for (Eigen::Index i = 0; i < test_full.x.rows(); ++i) {
                const double pred = fit_full.alpha0 + test_full.x.row(i).dot(fit_full.coef);
                sse += (test_full.y(i) - pred) * (test_full.y(i) - pred);
                sst += (test_full.y(i) - ybar) * (test_full.y(i) - ybar);
            }
            if (sst < 1e-12) {
                split.degenerate = true;
            } else {
                split.r2_strict = 1.0 - sse / sst;
            }
        }
        report.splits.push_back(split);
    }
    return report;
}

PrecisionCurve cumulative_precision(const core::Dataset& data,
                                    const stage1::DelayStageConfig& delay_cfg,
                                    const stage2::FeeSpec& fee_spec,
                                    const std::vector<std::size_t>& checkpoints,
                                    const std::string& coef_name) {
    PrecisionCurve curve;
    for (std::size_t k : checkpoints) {
        if (k < 2 || k > data.epochs.size()) {
            throw std::invalid_argument("checkpoint outside the epoch range");
        }
        core::Dataset slice = subset_epoch_range(data, 0, k);
        stage1::DelayFit delay = stage1::run_delay_stage(slice, delay_cfg);
        stage2::FeeFit fit = stage2::fit_fee_model(slice, delay, fee_spec);
        const std::size_t j = fit.col(coef_name);
        curve.points.push_back(PrecisionPoint{k, fit.coef(static_cast<Eigen::Index>(j)), fit.se(j)});
    }

    // Slope of log SE against log epoch count.
    if (curve.points.size() >= 2) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        const double m = static_cast<double>(curve.points.size());
        for (const auto& pt : curve.points) {
            const double x = std::log(static_cast<double>(pt.n_epochs));
            const double y = std::log(pt.clustered_se);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        curve.log_log_slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
    return curve;
}

}  // namespace diag
}  // namespace feelab

// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <limits>

#include "feelab/core/rng.h"
#include "feelab/sim/structural.h"
#include "feelab/stage1/crossfit.h"
#include "feelab/stage1/forest.h"
#include "feelab/stage1/pava.h"
#include "helpers.h"

using namespace feelab;
using namespace feelab::stage1;

namespace {

// Exhaustive best weakly-decreasing fit: enumerate contiguous partitions,
// keep those whose block means are weakly decreasing, minimize SSE.
double best_monotone_sse(const std::vector<double>& y) {
    const std::size_t n = y.size();
    double best = std::numeric_limits<double>::infinity();
    const std::uint32_t masks = 1u << (n - 1);
    for (std::uint32_t mask = 0; mask < masks; ++mask) {
        double sse = 0.0, prev_mean = std::numeric_limits<double>::infinity();
        bool ok = true;
        std::size_t start = 0;
        for (std::size_t i = 0; i < n && ok; ++i) {
            const bool boundary = i + 1 == n || (mask & (1u << i));
            if (!boundary) continue;
            double sum = 0.0;
            for (std::size_t k = start; k <= i; ++k) sum += y[k];
            const double mean = sum / static_cast<double>(i - start + 1);
            if (mean > prev_mean + 1e-12) {
                ok = false;
                break;
            }
            for (std::size_t k = start; k <= i; ++k) sse += (y[k] - mean) * (y[k] - mean);
            prev_mean = mean;
            start = i + 1;
        }
        if (ok) best = std::min(best, sse);
    }
    return best;
}

double sse_against(const std::vector<double>& y, const std::vector<double>& fit) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - fit[i]) * (y[i] - fit[i]);
    return s;
}

}  // namespace

TEST_SUITE("pava") {
    TEST_CASE("already monotone sequences pass through") {
        CHECK(pava_decreasing({3, 2, 1}) == std::vector<double>{3, 2, 1});
        CHECK(pava_decreasing({1, 1, 1}) == std::vector<double>{1, 1, 1});
    }

    TEST_CASE("single violation pools to the block mean") {
        CHECK(pava_decreasing({3, 1, 2}) == std::vector<double>{3, 1.5, 1.5});
    }

    TEST_CASE("empty input throws") {
        CHECK_THROWS_AS(pava_decreasing({}), std::invalid_argument);
    }

    TEST_CASE("idempotence and mean preservation") {
        core::Rng rng(23);
        for (int trial = 0; trial < 100; ++trial) {
            const std::size_t n = 1 + rng.below(30);
            std::vector<double> y(n);
            for (auto& v : y) v = rng.normal(0.0, 1.0);
            const auto fit = pava_decreasing(y);
            CHECK(pava_decreasing(fit) == fit);
            double sum_y = 0.0, sum_fit = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                sum_y += y[i];
                sum_fit += fit[i];
                if (i > 0) CHECK(fit[i] <= fit[i - 1] + 1e-15);
            }
            CHECK(sum_fit == doctest::Approx(sum_y).epsilon(1e-12));
        }
    }

    TEST_CASE("matches the exhaustive monotone fit on short sequences") {
        core::Rng rng(29);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 2 + rng.below(7);  // lengths 2..8
            std::vector<double> y(n);
            for (auto& v : y) v = std::floor(rng.uniform(0.0, 4.0));
            const auto fit = pava_decreasing(y);
            CHECK(sse_against(y, fit) == doctest::Approx(best_monotone_sse(y)).epsilon(1e-9));
        }
    }

    TEST_CASE("increasing variant mirrors the decreasing one") {
        std::vector<double> y = {1, 3, 2, 5, 4};
        auto inc = pava_increasing(y);
        for (std::size_t i = 1; i < inc.size(); ++i) CHECK(inc[i] >= inc[i - 1]);
    }
}

namespace {

FeatureMatrix single_feature(const std::vector<double>& p) {
    FeatureMatrix x;
    x.cols = {p};
    return x;
}

}  // namespace

TEST_SUITE("forest") {
    TEST_CASE("depth zero predicts the training mean") {
        core::Rng rng(31);
        std::vector<double> p(200), y(200);
        double mean = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = rng.uniform01();
            y[i] = rng.normal(1.0, 2.0);
            mean += y[i];
        }
        mean /= static_cast<double>(y.size());

        ForestConfig cfg;
        cfg.n_trees = 5;
        cfg.max_depth = 0;
        cfg.min_leaf = 1;
        cfg.bootstrap = false;
        Forest f = Forest::fit(single_feature(p), y, cfg);
        const double row[1] = {0.3};
        CHECK(f.predict_row(row) == doctest::Approx(mean).epsilon(1e-12));

        cfg.bootstrap = true;
        cfg.n_trees = 400;
        Forest fb = Forest::fit(single_feature(p), y, cfg);
        CHECK(fb.predict_row(row) == doctest::Approx(mean).epsilon(0.1));
    }

    TEST_CASE("step function is recovered with low held-out error") {
        core::Rng rng(37);
        std::vector<double> p(1000), y(1000);
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = rng.uniform01();
            y[i] = p[i] > 0.5 ? 1.0 : 0.0;
        }
        ForestConfig cfg;
        cfg.n_trees = 50;
        cfg.max_depth = 2;
        cfg.min_leaf = 5;
        cfg.seed = 12;
        Forest f = Forest::fit(single_feature(p), y, cfg);
        double mse = 0.0;
        for (int i = 0; i < 500; ++i) {
            const double px = rng.uniform01();
            const double truth = px > 0.5 ? 1.0 : 0.0;
            const double row[1] = {px};
            const double err = f.predict_row(row) - truth;
            mse += err * err;
        }
        mse /= 500.0;
        CHECK(mse < 0.01);
    }

    TEST_CASE("deterministic given the seed") {
        core::Rng rng(41);
        FeatureMatrix x;
        x.cols.assign(3, std::vector<double>(500));
        std::vector<double> y(500);
        for (std::size_t i = 0; i < 500; ++i) {
            for (auto& col : x.cols) col[i] = rng.normal(0.0, 1.0);
            y[i] = x.cols[0][i] * 2.0 + rng.normal(0.0, 0.2);
        }
        ForestConfig cfg;
        cfg.n_trees = 20;
        cfg.max_depth = 6;
        cfg.min_leaf = 5;
        cfg.seed = 77;
        Forest a = Forest::fit(x, y, cfg);
        Forest b = Forest::fit(x, y, cfg);
        const auto pa = a.predict(x);
        const auto pb = b.predict(x);
        CHECK(pa == pb);
    }

    TEST_CASE("constant target collapses to single-leaf trees") {
        std::vector<double> p = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
        std::vector<double> y(6, 4.25);
        ForestConfig cfg;
        cfg.n_trees = 3;
        cfg.max_depth = 8;
        cfg.min_leaf = 1;
        Forest f = Forest::fit(single_feature(p), y, cfg);
        const double row[1] = {0.35};
        CHECK(f.predict_row(row) == 4.25);
    }

    TEST_CASE("input validation") {
        ForestConfig cfg;
        cfg.min_leaf = 10;
        CHECK_THROWS_AS(Forest::fit(FeatureMatrix{}, {}, cfg), std::invalid_argument);
        std::vector<double> p = {0.1, 0.2};
        std::vector<double> y = {1.0, 2.0};
        CHECK_THROWS_AS(Forest::fit(single_feature(p), y, cfg), std::invalid_argument);
        cfg.min_leaf = 1;
        std::vector<double> bad = {0.1, std::numeric_limits<double>::infinity()};
        CHECK_THROWS_AS(Forest::fit(single_feature(bad), y, cfg), std::invalid_argument);
    }

    TEST_CASE("predictions at training rows are invariant to monotone feature maps") {
        core::Rng rng(43);
        FeatureMatrix x;
        x.cols.assign(2, std::vector<double>(300));
        std::vector<double> y(300);
        for (std::size_t i = 0; i < 300; ++i) {
            x.cols[0][i] = rng.uniform(0.1, 3.0);
            x.cols[1][i] = rng.normal(0.0, 1.0);
            y[i] = std::sin(x.cols[0][i]) + 0.5 * x.cols[1][i] + rng.normal(0.0, 0.1);
        }
        ForestConfig cfg;
        cfg.n_trees = 15;
        cfg.max_depth = 5;
        cfg.min_leaf = 4;
        cfg.seed = 3;
        // Invariance is exact at training rows, so every tree must see every
        // row: out-of-bag points can land inside a split gap, where midpoint
        // thresholds are not transform-invariant.
        cfg.bootstrap = false;
        Forest base = Forest::fit(x, y, cfg);

        FeatureMatrix xt = x;
        for (auto& v : xt.cols[0]) v = std::exp(v);  // strictly increasing map
        Forest mapped = Forest::fit(xt, y, cfg);
        CHECK(base.predict(x) == mapped.predict(xt));
    }

    TEST_CASE("feature importance concentrates on the signal feature") {
        core::Rng rng(47);
        FeatureMatrix x;
        x.cols.assign(2, std::vector<double>(800));
        std::vector<double> y(800);
        for (std::size_t i = 0; i < 800; ++i) {
            x.cols[0][i] = rng.uniform01();
            x.cols[1][i] = rng.uniform01();
            y[i] = 3.0 * x.cols[0][i];
        }
        ForestConfig cfg;
        cfg.n_trees = 10;
        cfg.max_depth = 4;
        cfg.min_leaf = 10;
        Forest f = Forest::fit(x, y, cfg);
        CHECK(f.feature_importance()[0] > 0.95);
    }
}

TEST_SUITE("crossfit") {
    TEST_CASE("fold assignment is deterministic and respects K") {
        auto ds = sim::generate_structural(testutil::small_structural(6, 50, 3));
        auto f1 = assign_folds(ds.data.epochs, 3, 99);
        auto f2 = assign_folds(ds.data.epochs, 3, 99);
        CHECK(f1 == f2);
        auto f3 = assign_folds(ds.data.epochs, 3, 100);
        CHECK(f1 != f3);  // different seed, different partition (with high probability)
        CHECK_THROWS_AS(assign_folds(ds.data.epochs, 7, 1), std::invalid_argument);
    }

    TEST_CASE("held-out epochs never train their own forest") {
        auto ds = sim::generate_structural(testutil::small_structural(4, 120, 5));
        auto cfg = testutil::fast_delay_cfg(7, 8, 5, 10, 2);
        DelayFit fit = crossfit_predict(ds.data, cfg);

        // Perturb the targets of one epoch; its own predictions must not move.
        const std::int64_t victim = ds.data.epochs[0].epoch_id;
        core::Dataset mutated = ds.data;
        for (auto& tx : mutated.txs) {
            if (tx.epoch_id == victim && tx.confirm_time) {
                tx.confirm_time = *tx.confirm_time + 5000;
            }
        }
        DelayFit fit2 = crossfit_predict(mutated, cfg);
        for (std::size_t i = 0; i < ds.data.txs.size(); ++i) {
            if (ds.data.txs[i].epoch_id == victim && std::isfinite(fit.predicted_log_wait[i])) {
                CHECK(fit.predicted_log_wait[i] == fit2.predicted_log_wait[i]);
            }
        }
    }

    TEST_CASE("cross-fitted error is close to an independently trained forest's") {
        auto cfg = testutil::fast_delay_cfg(7, 15, 7, 15, 3);
        auto ds = sim::generate_structural(testutil::small_structural(9, 250, 11));
        DelayFit fit = crossfit_predict(ds.data, cfg);

        // Oracle: same learner trained on an independent draw from the same
        // market, evaluated on this dataset.
        auto ds2 = sim::generate_structural(testutil::small_structural(9, 250, 12));
        FeatureMatrix train;
        train.cols.assign(kDelayFeatureCount, {});
        std::vector<double> y;
        for (const auto& tx : ds2.data.txs) {
            if (!tx.confirm_time || !tx.state_valid || !tx.percentile) continue;
            train.cols[0].push_back(tx.percentile->to_double());
            train.cols[1].push_back(tx.state_blockspace_util);
            train.cols[2].push_back(static_cast<double>(tx.state_mempool_bytes));
            train.cols[3].push_back(static_cast<double>(tx.state_mempool_tx_count));
            y.push_back(std::log(static_cast<double>(*tx.confirm_time - tx.entry_time) + 1.0));
        }
        Forest oracle = Forest::fit(train, y, cfg.forest, 0x0ac1e);

        double mse_cf = 0.0, mse_oracle = 0.0;
        std::int64_t n = 0;
        for (std::size_t i = 0; i < ds.data.txs.size(); ++i) {
            const auto& tx = ds.data.txs[i];
            if (!std::isfinite(fit.predicted_log_wait[i]) || !tx.confirm_time) continue;
            const double target =
                std::log(static_cast<double>(*tx.confirm_time - tx.entry_time) + 1.0);
            const double row[4] = {tx.percentile->to_double(), tx.state_blockspace_util,
                                   static_cast<double>(tx.state_mempool_bytes),
                                   static_cast<double>(tx.state_mempool_tx_count)};
            const double e1 = fit.predicted_log_wait[i] - target;
            const double e2 = oracle.predict_row(row) - target;
            mse_cf += e1 * e1;
            mse_oracle += e2 * e2;
            ++n;
        }
        mse_cf /= static_cast<double>(n);
        mse_oracle /= static_cast<double>(n);
        CHECK(mse_cf < 1.1 * mse_oracle);
        CHECK(mse_oracle < 1.1 * mse_cf);
    }
}

TEST_SUITE("monotone_schedule_and_slope") {
    TEST_CASE("forest that ignores priority yields a flat schedule") {
        // Target depends only on the second feature.
        core::Dataset data;
        core::Rng rng(51);
        core::EpochState e;
        e.epoch_id = 0;
        data.epochs = {e};
        for (int i = 0; i < 300; ++i) {
            auto tx = testutil::make_tx("f" + std::to_string(i), 100 + i, 100, i);
            tx.epoch_id = 0;
            tx.state_valid = true;
            tx.state_blockspace_util = rng.uniform01();
            tx.state_mempool_bytes = 1000000;
            tx.state_mempool_tx_count = 100;
            tx.percentile = core::Rational(1 + i, 2 * 300);
            tx.confirm_time = tx.entry_time +
                              static_cast<std::int64_t>(100.0 * tx.state_blockspace_util) + 10;
            data.txs.push_back(tx);
        }
        ForestConfig fcfg;
        fcfg.n_trees = 10;
        fcfg.max_depth = 4;
        fcfg.min_leaf = 10;
        FeatureMatrix x;
        x.cols.assign(kDelayFeatureCount, {});
        std::vector<double> y;
        for (const auto& tx : data.txs) {
            x.cols[0].push_back(tx.percentile->to_double());
            x.cols[1].push_back(tx.state_blockspace_util);
            x.cols[2].push_back(static_cast<double>(tx.state_mempool_bytes));
            x.cols[3].push_back(static_cast<double>(tx.state_mempool_tx_count));
            y.push_back(std::log(static_cast<double>(*tx.confirm_time - tx.entry_time) + 1.0));
        }
        Forest f = Forest::fit(x, y, fcfg);
        EpochSchedule sched = monotone_schedule(f, data, 0, 99);
        REQUIRE(sched.values.size() == 99);
        for (double v : sched.values) CHECK(v == sched.values[0]);
        CHECK(local_slope(sched, 0.5, 0.05, 0.01) == 0.0);
    }

    TEST_CASE("grid follows the m/(M+1) convention and is weakly decreasing") {
        auto ds = sim::generate_structural(testutil::small_structural(3, 200, 13));
        auto cfg = testutil::fast_delay_cfg(5, 8, 6, 10, 2);
        DelayFit fit = run_delay_stage(ds.data, cfg);
        for (const auto& sched : fit.schedules) {
            REQUIRE(sched.grid.size() == 99);
            CHECK(sched.grid.front() == doctest::Approx(0.01).epsilon(1e-12));
            CHECK(sched.grid.back() == doctest::Approx(0.99).epsilon(1e-12));
            for (std::size_t j = 1; j < sched.values.size(); ++j) {
                CHECK(sched.values[j] <= sched.values[j - 1] + 1e-12);
            }
        }
        for (std::size_t i = 0; i < fit.slope.size(); ++i) {
            if (std::isfinite(fit.slope[i])) CHECK(fit.slope[i] >= 0.0);
        }
    }

    TEST_CASE("linear interpolant slope arithmetic") {
        EpochSchedule sched;
        for (int m = 1; m <= 99; ++m) {
            sched.grid.push_back(m / 100.0);
            sched.values.push_back(2.0 - m / 100.0);  // W(p) = 2 - p
        }
        CHECK(local_slope(sched, 0.5, 0.05, 0.01) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(local_slope(sched, 0.9, 0.05, 0.01) == doctest::Approx(1.0).epsilon(1e-12));

        // Boundary clipping: p = 0.005 evaluates at [0.01, 0.055].
        const double expect = (sched.eval(0.01) - sched.eval(0.055)) / 0.045;
        CHECK(local_slope(sched, 0.005, 0.05, 0.01) == doctest::Approx(expect).epsilon(1e-12));
    }

    TEST_CASE("degenerate finite-difference window throws") {
        EpochSchedule sched;
        sched.grid = {0.2, 0.8};
        sched.values = {1.0, 0.5};
        CHECK_THROWS_AS(local_slope(sched, 0.02, 0.005, 0.03), std::invalid_argument);
        CHECK_THROWS_AS(local_slope(sched, 1.5, 0.05, 0.01), std::invalid_argument);
    }

    TEST_CASE("schedules recover the simulated delay curve and sharpen with data") {
        auto cfg = testutil::fast_delay_cfg(7, 15, 7, 15, 3);
        auto mse_at = [&](int txs_per_epoch, std::uint64_t seed) {
            auto ds = sim::generate_structural(testutil::small_structural(6, txs_per_epoch, seed));
            DelayFit fit = run_delay_stage(ds.data, cfg);
            double mse = 0.0;
            std::int64_t n = 0;
            for (std::size_t e = 0; e < ds.data.epochs.size(); ++e) {
                const auto& sched = fit.schedules[e];
                const auto& truth = ds.truth.delay_curve[e];
                for (std::size_t j = 0; j < truth.size(); ++j) {
                    // Interior grid only: the forest flattens at the edges.
                    if (ds.truth.grid[j] < 0.1 || ds.truth.grid[j] > 0.9) continue;
                    const double err = sched.eval(ds.truth.grid[j]) - truth[j];
                    mse += err * err;
                    ++n;
                }
            }
            return mse / static_cast<double>(n);
        };
        const double coarse = mse_at(150, 17);
        const double fine = mse_at(1200, 18);
        CHECK(fine < coarse);
        CHECK(fine < 0.05);
    }

    TEST_CASE("gradient regime report flags flat epochs") {
        auto ds = sim::generate_structural(testutil::small_structural(3, 200, 19));
        auto cfg = testutil::fast_delay_cfg(5, 8, 6, 10, 2);
        DelayFit fit = run_delay_stage(ds.data, cfg);
        CHECK(fit.regime.max_grid_slope.size() == ds.data.epochs.size());
        CHECK(fit.regime.trivial_share >= 0.0);
        CHECK(fit.regime.trivial_share <= 1.0);
        // The structural market has a strong gradient everywhere.
        for (std::size_t e = 0; e < fit.regime.trivial.size(); ++e) {
            CHECK_FALSE(static_cast<bool>(fit.regime.trivial[e]));
        }
    }
}

// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "feelab/core/cpfp.h"
#include "feelab/core/epoch.h"
#include "feelab/core/rank.h"
#include "feelab/core/rational.h"
#include "feelab/core/rng.h"
#include "feelab/core/weights.h"
#include "helpers.h"

using namespace feelab::core;
using testutil::make_tx;

TEST_SUITE("rational") {
    TEST_CASE("normalization and equality across denominators") {
        CHECK(Rational(100, 200) == Rational(5, 10));
        CHECK(Rational(100, 200) == Rational(1, 2));
        CHECK(Rational(-3, -6) == Rational(1, 2));
        CHECK(Rational(3, -6) == Rational(-1, 2));
        CHECK(Rational(0, 7) == Rational(0, 1));
    }

    TEST_CASE("ordering uses exact cross products") {
        CHECK(Rational(1, 3) < Rational(1, 2));
        CHECK(Rational(10, 3) > Rational(3, 1));
        CHECK(Rational(2, 4) <= Rational(1, 2));
        CHECK(Rational(2, 4) >= Rational(1, 2));
    }

    TEST_CASE("arithmetic stays exact") {
        CHECK(Rational(1, 3) + Rational(1, 6) == Rational(1, 2));
        CHECK(Rational(1, 2) - Rational(1, 3) == Rational(1, 6));
        CHECK(Rational(2, 3) * Rational(9, 4) == Rational(3, 2));
        CHECK(Rational(1, 2) / Rational(1, 8) == Rational(4, 1));
        CHECK(Rational(1000, 200).to_double() == doctest::Approx(5.0));
    }

    TEST_CASE("zero denominator and division by zero throw") {
        CHECK_THROWS_AS(Rational(1, 0), std::invalid_argument);
        CHECK_THROWS_AS(Rational(1, 2) / Rational(0, 5), std::invalid_argument);
    }
}

TEST_SUITE("tie_aware_percentile") {
    TEST_CASE("worked example with one tie block") {
        std::vector<Rational> rates = {Rational(1, 1), Rational(2, 1), Rational(2, 1),
                                       Rational(3, 1)};
        auto p = tie_aware_percentile(rates);
        REQUIRE(p.size() == 4);
        CHECK(p[0] == Rational(1, 8));   // 0.125
        CHECK(p[1] == Rational(1, 2));
        CHECK(p[2] == Rational(1, 2));
        CHECK(p[3] == Rational(7, 8));   // 0.875
    }

    TEST_CASE("full tie collapses to the midpoint") {
        std::vector<Rational> rates(4, Rational(5, 1));
        auto p = tie_aware_percentile(rates);
        for (const auto& v : p) CHECK(v == Rational(1, 2));
    }

    TEST_CASE("distinct rates") {
        std::vector<Rational> rates = {Rational(1, 1), Rational(2, 1), Rational(3, 1)};
        auto p = tie_aware_percentile(rates);
        CHECK(p[0] == Rational(1, 6));
        CHECK(p[1] == Rational(1, 2));
        CHECK(p[2] == Rational(5, 6));
    }

    TEST_CASE("empty input throws") {
        CHECK_THROWS_WITH_AS(tie_aware_percentile({}), "empty ranking set",
                             std::invalid_argument);
    }

    TEST_CASE("mean percentile is exactly one half") {
        Rng rng(11);
        for (int trial = 0; trial < 50; ++trial) {
            const std::size_t n = 1 + rng.below(40);
            std::vector<Rational> rates;
            for (std::size_t i = 0; i < n; ++i) {
                rates.emplace_back(static_cast<std::int64_t>(rng.below(6)), 1);
            }
            auto p = tie_aware_percentile(rates);
            Rational sum(0, 1);
            for (const auto& v : p) sum = sum + v;
            CHECK(sum == Rational(static_cast<std::int64_t>(n), 2));
        }
    }

    TEST_CASE("invariant under strictly increasing transforms") {
        std::vector<Rational> rates = {Rational(1, 2), Rational(7, 3), Rational(7, 3),
                                       Rational(9, 4), Rational(11, 1)};
        std::vector<Rational> squared;
        for (const auto& r : rates) squared.push_back(r * r);
        CHECK(tie_aware_percentile(rates) == tie_aware_percentile(squared));
    }

    TEST_CASE("percentiles land strictly inside (0,1) and respect fee order") {
        std::vector<Rational> rates = {Rational(1, 1), Rational(5, 1), Rational(3, 1)};
        auto p = tie_aware_percentile(rates);
        for (const auto& v : p) {
            CHECK(v > Rational(0, 1));
            CHECK(v < Rational(1, 1));
        }
        CHECK(p[0] < p[2]);
        CHECK(p[2] < p[1]);
    }
}

namespace {

std::vector<Snapshot> covering_snapshots(std::int64_t t0, std::int64_t t1, std::int64_t step) {
    std::vector<Snapshot> snaps;
    for (std::int64_t t = t0; t <= t1; t += step) {
        Snapshot s;
        s.ts = t;
        s.mempool_bytes = 1000000;
        s.mempool_tx_count = 500;
        s.secs_since_last_block = 100.0;
        s.blockspace_util = 0.5;
        snaps.push_back(s);
    }
    return snaps;
}

}  // namespace

TEST_SUITE("assign_epochs") {
    TEST_CASE("window arithmetic from the worked example") {
        std::vector<TxRecord> txs = {make_tx("a", 10, 100, 0), make_tx("b", 10, 100, 1700),
                                     make_tx("c", 10, 100, 1900)};
        auto res = assign_epochs(txs, covering_snapshots(0, 3600, 25), 1800);
        REQUIRE(res.epochs.size() == 2);
        CHECK(res.epochs[0].n_tx == 2);
        CHECK(res.epochs[1].n_tx == 1);
        CHECK(res.txs[0].epoch_id == 0);
        CHECK(res.txs[1].epoch_id == 0);
        CHECK(res.txs[2].epoch_id == 1);
    }

    TEST_CASE("single transaction forms one epoch") {
        std::vector<TxRecord> txs = {make_tx("a", 10, 100, 12345)};
        auto res = assign_epochs(txs, covering_snapshots(12300, 12400, 25), 1800);
        REQUIRE(res.epochs.size() == 1);
        CHECK(res.epochs[0].n_tx == 1);
    }

    TEST_CASE("counting oracle on 10k uniform arrivals over 10 hours") {
        Rng rng(3);
        const std::int64_t horizon = 36000;
        std::vector<TxRecord> txs;
        std::int64_t t_min = horizon, t_max = 0;
        for (int i = 0; i < 10000; ++i) {
            const auto t = static_cast<std::int64_t>(rng.below(horizon));
            t_min = std::min(t_min, t);
            t_max = std::max(t_max, t);
            txs.push_back(make_tx("t" + std::to_string(i), 10, 100, t));
        }
        auto res = assign_epochs(txs, covering_snapshots(0, horizon, 25), 1800);
        const std::int64_t expected_epochs = (t_max - t_min) / 1800 + 1;
        CHECK(static_cast<std::int64_t>(res.epochs.size()) == expected_epochs);
        CHECK(res.epochs.size() == 20);
        std::int64_t total = 0;
        for (const auto& e : res.epochs) total += e.n_tx;
        CHECK(total == 10000);
    }

    TEST_CASE("epoch membership is a permutation of the input") {
        Rng rng(4);
        std::vector<TxRecord> txs;
        for (int i = 0; i < 300; ++i) {
            txs.push_back(make_tx("p" + std::to_string(i), 10, 100,
                                  static_cast<std::int64_t>(rng.below(7200))));
        }
        auto res = assign_epochs(txs, covering_snapshots(0, 7200, 25), 1800);
        std::multiset<std::string> in, out;
        for (const auto& t : txs) in.insert(t.tx_id);
        for (const auto& t : res.txs) out.insert(t.tx_id);
        CHECK(in == out);
        for (const auto& t : res.txs) {
            const auto& e = res.epochs[static_cast<std::size_t>(t.epoch_id)];
            CHECK(t.entry_time >= e.window_start);
            CHECK(t.entry_time < e.window_end);
        }
    }

    TEST_CASE("state joins: covered, imputed, dropped") {
        std::vector<TxRecord> txs = {make_tx("covered", 10, 100, 1000),
                                     make_tx("imputed", 10, 100, 890),
                                     make_tx("dropped", 10, 100, 5000)};
        std::vector<Snapshot> snaps;
        Snapshot s;
        s.ts = 950;
        s.blockspace_util = 0.25;
        snaps.push_back(s);
        auto res = assign_epochs(txs, snaps, 1800, /*max_gap_secs=*/60);
        REQUIRE(res.txs.size() == 2);
        CHECK(res.dropped_no_state == 1);
        CHECK(res.imputed_states == 1);
        CHECK(res.txs[0].tx_id == "covered");
        CHECK_FALSE(res.txs[0].state_imputed);
        CHECK(res.txs[0].state_blockspace_util == doctest::Approx(0.25));
        CHECK(res.txs[1].tx_id == "imputed");
        CHECK(res.txs[1].state_imputed);
    }

    TEST_CASE("empty input gives empty outputs") {
        auto res = assign_epochs({}, covering_snapshots(0, 100, 25), 1800);
        CHECK(res.txs.empty());
        CHECK(res.epochs.empty());
    }

    TEST_CASE("epoch aggregates are snapshot means") {
        std::vector<TxRecord> txs = {make_tx("a", 10, 100, 0)};
        std::vector<Snapshot> snaps;
        for (int i = 0; i < 3; ++i) {
            Snapshot s;
            s.ts = i * 25;
            s.mempool_bytes = 1000 * (i + 1);
            s.mempool_tx_count = 10 * (i + 1);
            s.blockspace_util = 0.1 * (i + 1);
            s.secs_since_last_block = 100.0 * (i + 1);
            snaps.push_back(s);
        }
        auto res = assign_epochs(txs, snaps, 1800);
        REQUIRE(res.epochs.size() == 1);
        CHECK(res.epochs[0].mempool_bytes == 2000);
        CHECK(res.epochs[0].mempool_tx_count == 20);
        CHECK(res.epochs[0].blockspace_util == doctest::Approx(0.2));
        CHECK(res.epochs[0].secs_since_last_block == doctest::Approx(200.0));
        CHECK(res.epochs[0].congestion_wu == 8000);
        CHECK(res.epochs[0].has_state);
    }
}

TEST_SUITE("collapse_cpfp") {
    TEST_CASE("parent and child merge into one package observation") {
        std::vector<TxRecord> txs = {make_tx("parent", 100, 100, 50),
                                     make_tx("child", 900, 100, 80)};
        txs[0].confirm_time = 500;
        txs[0].confirm_height = 10;
        txs[1].confirm_time = 600;
        txs[1].confirm_height = 10;
        auto out = collapse_cpfp(txs, {{"child", "parent"}});
        REQUIRE(out.size() == 1);
        CHECK(out[0].fee_sats == 1000);
        CHECK(out[0].vsize_vb == 200);
        CHECK(out[0].fee_rate == Rational(5, 1));
        CHECK(out[0].cpfp_package);
        CHECK(out[0].entry_time == 50);
        CHECK(out[0].confirm_time == 600);
        CHECK(out[0].package_members.size() == 2);
    }

    TEST_CASE("no links is a passthrough") {
        std::vector<TxRecord> txs = {make_tx("a", 10, 100), make_tx("b", 20, 100)};
        auto out = collapse_cpfp(txs, {});
        REQUIRE(out.size() == 2);
        CHECK(out[0].tx_id == "a");
        CHECK(out[1].tx_id == "b");
        CHECK_FALSE(out[0].cpfp_package);
    }

    TEST_CASE("three-transaction chain collapses to 1 sat/vB") {
        std::vector<TxRecord> txs = {make_tx("t1", 10, 100), make_tx("t2", 10, 100),
                                     make_tx("t3", 280, 100)};
        auto out = collapse_cpfp(txs, {{"t2", "t1"}, {"t3", "t2"}});
        REQUIRE(out.size() == 1);
        CHECK(out[0].fee_rate == Rational(1, 1));
    }

    TEST_CASE("cycle detection") {
        std::vector<TxRecord> txs = {make_tx("a", 1, 100), make_tx("b", 1, 100)};
        CHECK_THROWS_AS(collapse_cpfp(txs, {{"a", "b"}, {"b", "a"}}), std::invalid_argument);
    }

    TEST_CASE("unknown id is named in the error") {
        std::vector<TxRecord> txs = {make_tx("a", 1, 100)};
        CHECK_THROWS_WITH_AS(collapse_cpfp(txs, {{"ghost", "a"}}),
                             "cpfp link references unknown tx: ghost", std::invalid_argument);
    }

    TEST_CASE("totals are conserved") {
        Rng rng(9);
        std::vector<TxRecord> txs;
        for (int i = 0; i < 40; ++i) {
            txs.push_back(make_tx("x" + std::to_string(i),
                                  static_cast<std::int64_t>(1 + rng.below(5000)),
                                  static_cast<std::int64_t>(100 + rng.below(300))));
        }
        std::vector<ParentLink> links;
        for (int i = 0; i < 10; ++i) {
            links.push_back({"x" + std::to_string(2 * i + 1), "x" + std::to_string(2 * i)});
        }
        std::int64_t fee_in = 0, vsize_in = 0;
        for (const auto& t : txs) {
            fee_in += t.fee_sats;
            vsize_in += t.vsize_vb;
        }
        auto out = collapse_cpfp(txs, links);
        std::int64_t fee_out = 0, vsize_out = 0;
        for (const auto& t : out) {
            fee_out += t.fee_sats;
            vsize_out += t.vsize_vb;
        }
        CHECK(fee_in == fee_out);
        CHECK(vsize_in == vsize_out);
        CHECK(out.size() == txs.size() - links.size());
    }

    TEST_CASE("package inherits RBF as a disjunction") {
        std::vector<TxRecord> txs = {make_tx("p", 10, 100), make_tx("c", 10, 100)};
        txs[1].rbf = true;
        auto out = collapse_cpfp(txs, {{"c", "p"}});
        REQUIRE(out.size() == 1);
        CHECK(out[0].rbf);
    }
}

TEST_SUITE("correct_weights") {
    TEST_CASE("matched record gets external sizes and a recomputed rate") {
        std::vector<TxRecord> txs = {make_tx("a", 1000, 300)};
        txs[0].weight_wu = 1200;
        std::map<std::string, ExternalSize> ext = {{"a", {200, 800}}};
        auto [out, report] = correct_weights(txs, ext);
        CHECK(out[0].vsize_vb == 200);
        CHECK(out[0].weight_wu == 800);
        CHECK(out[0].fee_rate == Rational(1000, 200));
        CHECK(out[0].weight_corrected);
        CHECK(report.matched == 1);
        CHECK(report.mean_weight_delta == doctest::Approx(-400.0));
        CHECK(report.match_fraction == doctest::Approx(1.0));
    }

    TEST_CASE("empty external map leaves everything unmatched") {
        std::vector<TxRecord> txs = {make_tx("a", 10, 100), make_tx("b", 20, 150)};
        auto [out, report] = correct_weights(txs, {});
        CHECK(report.matched == 0);
        CHECK(report.unmatched == 2);
        CHECK(report.mean_weight_delta == doctest::Approx(0.0));
        CHECK(out[0].fee_rate == txs[0].fee_rate);
        CHECK_FALSE(out[0].weight_corrected);
    }

    TEST_CASE("external rows violating the weight bounds are rejected and counted") {
        std::vector<TxRecord> txs = {make_tx("a", 10, 100)};
        std::map<std::string, ExternalSize> ext = {{"a", {100, 500}}};  // weight > 4*vsize
        auto [out, report] = correct_weights(txs, ext);
        CHECK(report.rejected_rows == 1);
        CHECK(report.matched == 0);
        CHECK(out[0].vsize_vb == 100);
    }

    TEST_CASE("report carries both match fraction and mean delta") {
        std::vector<TxRecord> txs = {make_tx("a", 10, 100), make_tx("b", 20, 100)};
        txs[0].weight_wu = 400;
        std::map<std::string, ExternalSize> ext = {{"a", {100, 300}}};
        auto [out, report] = correct_weights(txs, ext);
        CHECK(report.match_fraction == doctest::Approx(0.5));
        CHECK(report.mean_weight_delta == doctest::Approx(-100.0));
    }
}

TEST_SUITE("rank_dataset") {
    TEST_CASE("ranks are per-epoch and written back onto transactions") {
        Dataset data;
        data.txs = {make_tx("a", 10, 100, 0), make_tx("b", 30, 100, 10),
                    make_tx("c", 20, 100, 2000)};
        data.txs[0].epoch_id = 0;
        data.txs[1].epoch_id = 0;
        data.txs[2].epoch_id = 1;
        EpochState e0, e1;
        e0.epoch_id = 0;
        e1.epoch_id = 1;
        data.epochs = {e0, e1};
        auto ranked = rank_dataset(data);
        REQUIRE(ranked.size() == 3);
        CHECK(*data.txs[0].percentile == Rational(1, 4));
        CHECK(*data.txs[1].percentile == Rational(3, 4));
        CHECK(*data.txs[2].percentile == Rational(1, 2));
    }
}

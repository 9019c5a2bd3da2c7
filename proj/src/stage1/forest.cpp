// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include "feelab/stage1/forest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "feelab/core/rng.h"

namespace feelab {
namespace stage1 {

namespace {

// Per-tree working state. Sample positions (not raw rows) are the unit of
// work so bootstrap duplicates stay distinct. Each feature keeps a sample
// ordering sorted once at the root and partitioned in place afterwards,
// which avoids re-sorting at every node.
struct TreeBuilder {
    const FeatureMatrix& x;
    const std::vector<double>& y;
    const ForestConfig& cfg;
    core::Rng& rng;

    std::vector<std::uint32_t> sample;              // position -> row id
    std::vector<std::vector<std::uint32_t>> order;  // per feature: positions sorted by value
    std::vector<std::uint32_t> scratch;
    std::vector<char> goes_left;
    std::vector<double> ysample;                    // position -> target
    std::vector<int> feat_pool;

    std::vector<Forest::Node> nodes;
    std::vector<double>* importance;

    TreeBuilder(const FeatureMatrix& x_, const std::vector<double>& y_, const ForestConfig& cfg_,
                core::Rng& rng_, std::vector<double>* importance_)
        : x(x_), y(y_), cfg(cfg_), rng(rng_), importance(importance_) {}

    double value_at(std::size_t f, std::uint32_t pos) const { return x.cols[f][sample[pos]]; }

    void bootstrap_rows() {
        const std::size_t n = x.rows();
        sample.resize(n);
        if (cfg.bootstrap) {
            for (std::size_t i = 0; i < n; ++i) {
                sample[i] = static_cast<std::uint32_t>(rng.below(n));
            }
        } else {
            std::iota(sample.begin(), sample.end(), 0u);
        }
        ysample.resize(n);
        for (std::size_t i = 0; i < n; ++i) ysample[i] = y[sample[i]];

        const std::size_t d = x.n_features();
        order.assign(d, {});
        for (std::size_t f = 0; f < d; ++f) {
            auto& ord = order[f];
            ord.resize(n);
            std::iota(ord.begin(), ord.end(), 0u);
            const auto& col = x.cols[f];
            std::sort(ord.begin(), ord.end(), [&](std::uint32_t a, std::uint32_t b) {
                const double va = col[sample[a]];
                const double vb = col[sample[b]];
                if (va != vb) return va < vb;
                return a < b;
            });
        }
        scratch.resize(n);
        goes_left.assign(n, 0);
    }

    struct Split {
        double gain = 0.0;
        int feature = -1;
        double threshold = 0.0;
        std::size_t n_left = 0;
    };

    Split find_split(std::size_t begin, std::size_t end) {
        const std::size_t len = end - begin;
        const std::size_t d = x.n_features();

        feat_pool.clear();
        for (std::size_t f = 0; f < d; ++f) feat_pool.push_back(static_cast<int>(f));
        std::size_t n_consider = d;
        if (cfg.feature_subsample < 1.0) {
            n_consider = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::ceil(cfg.feature_subsample * d)));
            // Partial Fisher-Yates, then restore ascending order so the
            // lowest-index tie-break is independent of the draw order.
            for (std::size_t k = 0; k < n_consider; ++k) {
                const std::size_t j = k + rng.below(d - k);
                std::swap(feat_pool[k], feat_pool[j]);
            }
            feat_pool.resize(n_consider);
            std::sort(feat_pool.begin(), feat_pool.end());
        }

        double total = 0.0;
        {
            const auto& ord = order[static_cast<std::size_t>(feat_pool[0])];
            for (std::size_t i = begin; i < end; ++i) total += ysample[ord[i]];
        }

        Split best;
        const std::size_t min_leaf = static_cast<std::size_t>(cfg.min_leaf);
        const double base_score = total * total / static_cast<double>(len);

        for (int f : feat_pool) {
            const auto& ord = order[static_cast<std::size_t>(f)];
            const auto& col = x.cols[static_cast<std::size_t>(f)];
            double left_sum = 0.0;
            for (std::size_t i = begin; i + 1 < end; ++i) {
                left_sum += ysample[ord[i]];
                const std::size_t n_left = i - begin + 1;
                if (n_left < min_leaf) continue;
                if (len - n_left < min_leaf) break;
                const double v = col[sample[ord[i]]];
                const double v_next = col[sample[ord[i + 1]]];
                if (v == v_next) continue;  // not a boundary between distinct values
                const double right_sum = total - left_sum;
                const double score = left_sum * left_sum / static_cast<double>(n_left) +
                                     right_sum * right_sum / static_cast<double>(len - n_left);
                const double gain = score - base_score;
                if (gain > best.gain) {
                    best.gain = gain;
                    best.feature = f;
                    best.threshold = v + 0.5 * (v_next - v);
                    best.n_left = n_left;
                }
            }
        }
        return best;
    }

    // Stable partition of every feature ordering for [begin, end) so that
    // left-going positions precede right-going ones.
    void partition(std::size_t begin, std::size_t end, const Split& split) {
        const auto& col = x.cols[static_cast<std::size_t>(split.feature)];
        const auto& ord_f = order[static_cast<std::size_t>(split.feature)];
        for (std::size_t i = begin; i < end; ++i) {
            goes_left[ord_f[i]] = col[sample[ord_f[i]]] <= split.threshold ? 1 : 0;
        }
        for (auto& ord : order) {
            std::size_t nl = begin;
            std::size_t nr = 0;
            for (std::size_t i = begin; i < end; ++i) {
                if (goes_left[ord[i]]) {
                    ord[nl++] = ord[i];
                } else {
                    scratch[nr++] = ord[i];
                }
            }
            std::copy(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(nr),
                      ord.begin() + static_cast<std::ptrdiff_t>(nl));
        }
    }

    int build(std::size_t begin, std::size_t end, int depth) {
        const std::size_t len = end - begin;
        const auto& ord0 = order[0];
        double sum = 0.0;
        for (std::size_t i = begin; i < end; ++i) sum += ysample[ord0[i]];
        const double mean = sum / static_cast<double>(len);

        const int node_id = static_cast<int>(nodes.size());
        nodes.push_back(Forest::Node{});
        nodes[static_cast<std::size_t>(node_id)].value = mean;

        if (depth >= cfg.max_depth || len < 2 * static_cast<std::size_t>(cfg.min_leaf)) {
            return node_id;
        }
        Split split = find_split(begin, end);
        if (split.feature < 0 || split.gain <= 0.0) {
            return node_id;
        }
        (*importance)[static_cast<std::size_t>(split.feature)] += split.gain;

        partition(begin, end, split);
        const std::size_t mid = begin + split.n_left;
        const int left = build(begin, mid, depth + 1);
        const int right = build(mid, end, depth + 1);
        nodes[static_cast<std::size_t>(node_id)].feature = split.feature;
        nodes[static_cast<std::size_t>(node_id)].threshold = split.threshold;
        nodes[static_cast<std::size_t>(node_id)].left = left;
        nodes[static_cast<std::size_t>(node_id)].right = right;
        return node_id;
    }
};

}  // namespace

void ForestConfig::validate() const {
    if (n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
    if (max_depth < 0) throw std::invalid_argument("max_depth must be >= 0");
    if (min_leaf < 1) throw std::invalid_argument("min_leaf must be >= 1");
    if (feature_subsample <= 0.0 || feature_subsample > 1.0) {
        throw std::invalid_argument("feature_subsample must be in (0,1]");
    }
}

Forest Forest::fit(const FeatureMatrix& x, const std::vector<double>& y, const ForestConfig& cfg,
                   std::uint64_t stream_salt) {
    cfg.validate();
    if (x.rows() == 0 || x.n_features() == 0) {
        throw std::invalid_argument("forest training set is empty");
    }
    if (y.size() != x.rows()) {
        throw std::invalid_argument("feature/target row mismatch");
    }
    if (x.rows() < static_cast<std::size_t>(cfg.min_leaf)) {
        throw std::invalid_argument("fewer training rows than min_leaf");
    }
    for (const auto& col : x.cols) {
        for (double v : col) {
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature value");
        }
    }
    for (double v : y) {
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite target value");
    }

    Forest forest;
    forest.trees_.resize(static_cast<std::size_t>(cfg.n_trees));
    forest.importance_.assign(x.n_features(), 0.0);

    for (int t = 0; t < cfg.n_trees; ++t) {
        core::Rng rng(core::Rng::mix(cfg.seed, stream_salt, static_cast<std::uint64_t>(t)));
        TreeBuilder builder(x, y, cfg, rng, &forest.importance_);
        builder.bootstrap_rows();
        builder.nodes.reserve(64);
        builder.build(0, x.rows(), 0);
        forest.trees_[static_cast<std::size_t>(t)] = std::move(builder.nodes);
    }

    double total = 0.0;
    for (double v : forest.importance_) total += v;
    if (total > 0.0) {
        for (double& v : forest.importance_) v /= total;
    }
    return forest;
}

double Forest::predict_row(const double* features) const {
    double sum = 0.0;
    for (const auto& tree : trees_) {
        int i = 0;
        while (tree[static_cast<std::size_t>(i)].feature >= 0) {
            const Node& n = tree[static_cast<std::size_t>(i)];
            i = features[n.feature] <= n.threshold ? n.left : n.right;
        }
        sum += tree[static_cast<std::size_t>(i)].value;
    }
    return sum / static_cast<double>(trees_.size());
}

std::vector<double> Forest::predict(const FeatureMatrix& x) const {
    const std::size_t n = x.rows();
    const std::size_t d = x.n_features();
    std::vector<double> row(d);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t f = 0; f < d; ++f) row[f] = x.cols[f][i];
        out[i] = predict_row(row.data());
    }
    return out;
}

}  // namespace stage1
}  // namespace feelab

// Copyright (c) 2026 The feelab developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#ifndef FEELAB_STAGE1_FOREST_H
#define FEELAB_STAGE1_FOREST_H

#include <cstdint>
#include <vector>

namespace feelab {
namespace stage1 {

struct ForestConfig {
    int n_trees = 200;
    int max_depth = 15;
    int min_leaf = 20;
    double feature_subsample = 1.0;  // fraction of features considered per split
    bool bootstrap = true;           // row sampling with replacement, same size
    std::uint64_t seed = 0;
    int n_folds = 5;                 // epoch-level cross-fitting folds

    void validate() const;
};

// Column-major feature storage.
struct FeatureMatrix {
    std::vector<std::vector<double>> cols;
    std::size_t rows() const { return cols.empty() ? 0 : cols[0].size(); }
    std::size_t n_features() const { return cols.size(); }
};

// Bagged regression trees with exact variance-reduction splits. Split
// thresholds sit at midpoints between adjacent distinct feature values; split
// ties are broken by the lowest feature index, then the first boundary in
// feature-sorted order, which makes predictions invariant to strictly
// increasing transformations of any single feature. Deterministic given the
// seed: each tree draws from its own derived RNG stream, so fitting order
// (or a parallel schedule) cannot change the result.
class Forest {
public:
    struct Node {
        int feature = -1;  // -1 marks a leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };

    static Forest fit(const FeatureMatrix& x, const std::vector<double>& y,
                      const ForestConfig& cfg, std::uint64_t stream_salt = 0);

    double predict_row(const double* features) const;
    std::vector<double> predict(const FeatureMatrix& x) const;

    const std::vector<double>& feature_importance() const { return importance_; }
    std::size_t n_trees() const { return trees_.size(); }

private:
    std::vector<std::vector<Node>> trees_;
    std::vector<double> importance_;  // normalized total variance reduction
};

}  // namespace stage1
}  // namespace feelab

#endif  // FEELAB_STAGE1_FOREST_H

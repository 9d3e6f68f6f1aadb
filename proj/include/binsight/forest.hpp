#pragma once

#include <cstdint>
#include <vector>

namespace binsight {

struct ForestConfig {
    std::size_t n_trees = 100;
    std::size_t max_depth = 12;
    std::size_t min_leaf = 2;
    std::size_t features_per_split = 16;  // sqrt(256)
    std::uint64_t seed = 0;
    bool bootstrap = true;
};

/// Flat node storage; node 0 is the root. Split sends x[feature] < threshold
/// to `left`, the rest to `right`.
struct TreeNode {
    bool is_leaf = true;
    double positive_fraction = 0.0;  // leaves only
    std::size_t feature = 0;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
};

struct Tree {
    std::vector<TreeNode> nodes;
};

struct Forest {
    ForestConfig config;
    std::size_t dim = 0;  // training feature dimension
    std::vector<Tree> trees;
};

/// CART with exhaustive midpoint-threshold search over a seeded random
/// feature subset, minimizing weighted Gini impurity. Each tree trains on a
/// seeded bootstrap sample unless config.bootstrap is off.
/// Throws SingleClassError when labels are all equal.
Forest fit_forest(const std::vector<std::vector<double>>& features,
                  const std::vector<int>& labels, const ForestConfig& config);

/// Mean of per-tree leaf positive fractions.
double predict_forest(const Forest& forest, const std::vector<double>& features);

} // namespace binsight

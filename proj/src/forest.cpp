#include "binsight/forest.hpp"
#include "binsight/errors.hpp"
#include "binsight/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace binsight {

namespace {

struct Builder {
    const std::vector<std::vector<double>>& x;
    const std::vector<int>& y;
    const ForestConfig& cfg;
    std::size_t dim;
    Rng& rng;
    Tree tree;

    double leaf_fraction(const std::vector<std::size_t>& idx) const
    {
        std::size_t pos = 0;
        for (std::size_t i : idx) pos += y[i];
        return static_cast<double>(pos) / static_cast<double>(idx.size());
    }

    // Distinct features, ascending, chosen without replacement.
    std::vector<std::size_t> feature_subset()
    {
        const std::size_t k = std::min(cfg.features_per_split, dim);
        std::vector<std::size_t> all(dim);
        for (std::size_t i = 0; i < dim; ++i) all[i] = i;
        for (std::size_t i = 0; i < k; ++i)
            std::swap(all[i], all[i + rng.below(dim - i)]);
        all.resize(k);
        std::sort(all.begin(), all.end());
        return all;
    }

    std::int32_t build(std::vector<std::size_t>& idx, std::size_t depth)
    {
        const std::int32_t id = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.emplace_back();
        const double frac = leaf_fraction(idx);

        bool stop = depth >= cfg.max_depth || frac == 0.0 || frac == 1.0 ||
                    idx.size() < 2 * cfg.min_leaf;

        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        double best_gini = std::numeric_limits<double>::infinity();

        if (!stop) {
            const double n = static_cast<double>(idx.size());
            std::size_t total_pos = 0;
            for (std::size_t i : idx) total_pos += y[i];

            std::vector<std::pair<double, int>> vals(idx.size());
            for (std::size_t f : feature_subset()) {
                for (std::size_t i = 0; i < idx.size(); ++i)
                    vals[i] = {x[idx[i]][f], y[idx[i]]};
                std::sort(vals.begin(), vals.end());

                std::size_t left_n = 0, left_pos = 0;
                for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                    ++left_n;
                    left_pos += vals[i].second;
                    if (vals[i].first == vals[i + 1].first)
                        continue;  // no threshold between equal values
                    const std::size_t right_n = idx.size() - left_n;
                    if (left_n < cfg.min_leaf || right_n < cfg.min_leaf)
                        continue;
                    const double lp = static_cast<double>(left_pos) / left_n;
                    const double rp = static_cast<double>(total_pos - left_pos) / right_n;
                    const double gini = (left_n * 2.0 * lp * (1.0 - lp) +
                                         right_n * 2.0 * rp * (1.0 - rp)) / n;
                    if (gini < best_gini) {
                        best_gini = gini;
                        best_feature = f;
                        best_threshold = 0.5 * (vals[i].first + vals[i + 1].first);
                    }
                }
            }
            if (!std::isfinite(best_gini))
                stop = true;
        }

        if (stop) {
            tree.nodes[id].is_leaf = true;
            tree.nodes[id].positive_fraction = frac;
            return id;
        }

        std::vector<std::size_t> left, right;
        for (std::size_t i : idx)
            (x[i][best_feature] < best_threshold ? left : right).push_back(i);
        idx.clear();
        idx.shrink_to_fit();

        const std::int32_t l = build(left, depth + 1);
        const std::int32_t r = build(right, depth + 1);
        TreeNode& node = tree.nodes[id];
        node.is_leaf = false;
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = l;
        node.right = r;
        return id;
    }
};

} // namespace

Forest fit_forest(const std::vector<std::vector<double>>& features,
                  const std::vector<int>& labels, const ForestConfig& config)
{
    if (features.size() < 2 || features.size() != labels.size())
        throw Error("fit_forest: need >= 2 labeled samples");
    const std::size_t dim = features[0].size();
    for (const auto& f : features)
        if (f.size() != dim)
            throw DimensionMismatchError("fit_forest: inconsistent feature dimensions");
    const bool has0 = std::find(labels.begin(), labels.end(), 0) != labels.end();
    const bool has1 = std::find(labels.begin(), labels.end(), 1) != labels.end();
    if (!has0 || !has1)
        throw SingleClassError("fit_forest: both classes must be present");

    Forest forest;
    forest.config = config;
    forest.dim = dim;
    forest.trees.reserve(config.n_trees);

    Rng rng(config.seed);
    for (std::size_t t = 0; t < config.n_trees; ++t) {
        std::vector<std::size_t> idx(features.size());
        if (config.bootstrap) {
            for (auto& i : idx)
                i = rng.below(features.size());
        } else {
            for (std::size_t i = 0; i < idx.size(); ++i)
                idx[i] = i;
        }
        Builder b{features, labels, config, dim, rng, {}};
        b.build(idx, 0);
        forest.trees.push_back(std::move(b.tree));
    }
    return forest;
}

double predict_forest(const Forest& forest, const std::vector<double>& features)
{
    if (features.size() != forest.dim)
        throw DimensionMismatchError("predict_forest: feature dimension mismatch");
    double acc = 0.0;
    for (const auto& tree : forest.trees) {
        const TreeNode* node = &tree.nodes[0];
        while (!node->is_leaf)
            node = &tree.nodes[features[node->feature] < node->threshold ? node->left
                                                                         : node->right];
        acc += node->positive_fraction;
    }
    return acc / static_cast<double>(forest.trees.size());
}

} // namespace binsight

#pragma once

#include "lur/common.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lur::models {

/// Internal nodes send x[feature] <= threshold to `left`. Leaves have feature -1.
/// `cover` is the training sample count (RF) or hessian sum (GBT) at the node.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    double cover = 0.0;

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const TreeNode &, const TreeNode &) = default;
};

struct RegressionTree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    double predict(std::span<const double> x) const;
    int leaf_index(std::span<const double> x) const;
    int depth() const;
    /// Binary, all nodes reachable, finite thresholds, positive covers.
    void validate(std::size_t n_features) const;
    /// Cover-weighted mean of the leaf values.
    double expected_value() const;

    nlohmann::json to_json() const;
    static RegressionTree from_json(const nlohmann::json &j);

    friend bool operator==(const RegressionTree &, const RegressionTree &) = default;
};

/// prediction = base_score + tree_weight * sum_t tree_t(x)
struct TreeEnsemble {
    double base_score = 0.0;
    double tree_weight = 1.0;
    std::vector<RegressionTree> trees;

    double predict(std::span<const double> x) const;
};

struct RfParams {
    int n_trees = 500;
    int mtry = 1;
    int min_node = 5;
    bool bootstrap = true;
};

struct RfResult {
    TreeEnsemble ensemble;
    std::optional<double> oob_mse;
};

/// Unpruned variance-reduction CART trees on bootstrap samples, mtry features
/// drawn per split. Each tree draws from its own counter-based substream so
/// results do not depend on the thread count.
RfResult fit_random_forest(const Matrix &x, std::span<const double> y, const RfParams &p, std::uint64_t seed,
                           unsigned threads = 0);

struct GbtParams {
    double eta = 0.1;
    int max_depth = 4;
    int rounds = 100;
    double subsample = 1.0;
    double colsample = 1.0;
    double reg_lambda = 1.0;
    double reg_gamma = 0.0;
    double min_child_weight = 1.0;
};

struct GbtResult {
    TreeEnsemble ensemble;
    std::vector<double> training_mse; // index 0 is the base score, then one per round
};

/// Second-order boosting with squared-error loss (g = f - y, h = 1), exact
/// greedy splits, base score mean(y). Leaf values are stored already scaled by eta.
GbtResult fit_gradient_boosting(const Matrix &x, std::span<const double> y, const GbtParams &p, std::uint64_t seed);

} // namespace lur::models

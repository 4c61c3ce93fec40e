#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace relval {

/// Binary CART node. feature == -1 marks a leaf; leaves carry the weighted
/// mean target (value) and the training weight they cover.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
    double cover = 0.0;
};

struct DecisionTreeModel {
    std::vector<TreeNode> nodes;  // node 0 is the root

    double predict_row(const std::vector<std::vector<double>>& columns, std::size_t row) const;
    /// Index of the leaf node the row lands in; usable as a co-occurrence id.
    std::size_t leaf_index(const std::vector<std::vector<double>>& columns,
                           std::size_t row) const;
};

struct TreeConfig {
    std::size_t max_depth = 12;
    double min_samples_leaf = 1.0;  // weighted minimum per child
    double max_features = 1.0;      // fraction of usable features tried per node
    std::size_t max_borders = 128;
    std::uint64_t seed = 0;
};

/// Greedy CART on a numerical feature matrix (columns feature-major).
DecisionTreeModel train_decision_tree(const std::vector<std::vector<double>>& columns,
                                      const std::vector<double>& y,
                                      const std::vector<double>& weights,
                                      const TreeConfig& config);

struct ForestConfig {
    std::size_t n_estimators = 100;
    std::size_t max_depth = 12;
    double min_samples_leaf = 1.0;
    double max_features = 0.6;
    std::size_t max_borders = 128;
    std::uint64_t seed = 0;
    bool bootstrap = true;  // off: every tree sees the full fold once
};

struct RandomForestModel {
    std::vector<DecisionTreeModel> trees;

    double predict_row(const std::vector<std::vector<double>>& columns, std::size_t row) const;
};

RandomForestModel train_random_forest(const std::vector<std::vector<double>>& columns,
                                      const std::vector<double>& y,
                                      const std::vector<double>& weights,
                                      const ForestConfig& config);

/// Leaf id per (record, tree), for leaf co-occurrence proximities.
std::vector<std::vector<std::uint32_t>> forest_leaves(
    const RandomForestModel& model, const std::vector<std::vector<double>>& columns);

struct NetConfig {
    double alpha = 0.0;
    double l1_ratio = 0.5;
    std::size_t max_iter = 1000;
    double tol = 1e-7;
};

/// Linear model fit by cyclic coordinate descent on internally standardized
/// features, minimizing (1/2n)|y - Xb|^2 + alpha (l1 |b|_1 + (1-l1)/2 |b|_2^2).
struct ElasticNetModel {
    std::vector<double> coefficients;  // per feature, in standardized space
    double intercept = 0.0;
    std::vector<double> feature_mean;
    std::vector<double> feature_std;
    double alpha = 0.0;
    double l1_ratio = 0.5;
    bool converged = true;

    double predict_row(const std::vector<std::vector<double>>& columns, std::size_t row) const;
};

ElasticNetModel train_elastic_net(const std::vector<std::vector<double>>& columns,
                                  const std::vector<double>& y, const NetConfig& config);

void save_decision_tree(const DecisionTreeModel& model, const std::string& path);
DecisionTreeModel load_decision_tree(const std::string& path);
void save_random_forest(const RandomForestModel& model, const std::string& path);
RandomForestModel load_random_forest(const std::string& path);
void save_elastic_net(const ElasticNetModel& model, const std::string& path);
ElasticNetModel load_elastic_net(const std::string& path);

}  // namespace relval

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "glassbox/dataset.hpp"

namespace glassbox {

struct TreeNode {
    // internal
    std::size_t feature = 0;
    double threshold = 0.0;
    std::unique_ptr<TreeNode> left, right;
    // every node: class counts of the training rows that reached it
    std::vector<std::size_t> counts;

    bool is_leaf() const { return !left; }
    std::size_t total() const;
    std::vector<double> distribution() const;  // counts normalized
};

struct TreeParams {
    std::size_t max_depth = 8;  // 0 fits a root leaf
    std::size_t min_leaf = 2;
    std::size_t features_per_split = 0;  // 0 = all
    bool random_thresholds = false;      // ERT-style uniform draws in [min, max]
};

enum class SurrogateKind { DT, RF, ERT };

struct SurrogateModel {
    SurrogateKind kind = SurrogateKind::DT;
    std::vector<std::unique_ptr<TreeNode>> trees;
    std::vector<std::uint64_t> tree_seeds;
    TreeParams params;
    std::size_t n_features = 0;
    std::size_t n_classes = 0;
};

struct ForestParams {
    std::size_t n_trees = 100;
    TreeParams tree;  // features_per_split 0 means sqrt(k) for forests
};

struct FidelityScore {
    double r_squared = 0.0;
    double sse_surrogate = 0.0;
    double sse_blackbox = 0.0;
    double threshold = 0.8;
    bool replace = false;  // verdict: surrogate may stand in for the black-box
};

// Sum p_k (1 - p_k) after normalization.
double gini(std::span<const double> dist);
double gini_counts(std::span<const std::size_t> counts);

std::unique_ptr<TreeNode> fit_tree(const Dataset& d, const TreeParams& params,
                                   std::uint64_t seed);

SurrogateModel fit_dt(const Dataset& d, const TreeParams& params, std::uint64_t seed);
SurrogateModel fit_forest(const Dataset& d, const ForestParams& params, SurrogateKind kind,
                          std::uint64_t seed, std::size_t threads = 1);

const TreeNode& descend(const TreeNode& root, std::span<const double> x);
std::vector<double> predict_dist(const SurrogateModel& m, std::span<const double> x);
std::size_t predict(const SurrogateModel& m, std::span<const double> x);
std::vector<std::size_t> predict_all(const SurrogateModel& m, const Dataset& d);

// Mean decrease in impurity, averaged across trees, normalized to sum 1
// (uniform fallback when no splits exist).
std::vector<double> mdi_importance(const SurrogateModel& m);

FidelityScore r_squared(std::span<const double> surrogate_preds,
                        std::span<const double> blackbox_preds, double threshold = 0.8);

std::string tree_to_json(const TreeNode& root);
std::unique_ptr<TreeNode> tree_from_json(const std::string& text);
std::string surrogate_to_json(const SurrogateModel& m);
SurrogateModel surrogate_from_json(const std::string& text);

}  // namespace glassbox

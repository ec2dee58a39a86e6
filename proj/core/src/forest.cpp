#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "glassbox/errors.hpp"
#include "glassbox/parallel.hpp"
#include "glassbox/surrogate.hpp"
#include "glassbox/tensor.hpp"

namespace glassbox {

SurrogateModel fit_dt(const Dataset& d, const TreeParams& params, std::uint64_t seed) {
    SurrogateModel m;
    m.kind = SurrogateKind::DT;
    m.params = params;
    m.n_features = d.n_cols;
    m.n_classes = d.n_classes();
    m.tree_seeds = {seed};
    m.trees.push_back(fit_tree(d, params, seed));
    return m;
}

namespace {

Dataset bootstrap_rows(const Dataset& d, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, d.n_rows - 1);
    Dataset out;
    out.n_rows = d.n_rows;
    out.n_cols = d.n_cols;
    out.feature_names = d.feature_names;
    out.class_names = d.class_names;
    out.features.reserve(d.features.size());
    out.labels.reserve(d.n_rows);
    for (std::size_t i = 0; i < d.n_rows; ++i) {
        const std::size_t r = pick(rng);
        auto row = d.row(r);
        out.features.insert(out.features.end(), row.begin(), row.end());
        out.labels.push_back(d.labels[r]);
    }
    return out;
}

}  // namespace

SurrogateModel fit_forest(const Dataset& d, const ForestParams& params, SurrogateKind kind,
                          std::uint64_t seed, std::size_t threads) {
    if (kind == SurrogateKind::DT) throw UsageError("InvalidConfig", "use fit_dt for a single tree");
    if (params.n_trees < 1) throw UsageError("InvalidConfig", "need at least one tree");

    TreeParams tp = params.tree;
    if (tp.features_per_split == 0) {
        tp.features_per_split = std::max<std::size_t>(
            1, static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(d.n_cols)))));
    }
    tp.random_thresholds = kind == SurrogateKind::ERT;

    SurrogateModel m;
    m.kind = kind;
    m.params = tp;
    m.n_features = d.n_cols;
    m.n_classes = d.n_classes();
    m.trees.resize(params.n_trees);
    m.tree_seeds.resize(params.n_trees);
    for (std::size_t t = 0; t < params.n_trees; ++t) m.tree_seeds[t] = mix_seed(seed, t);

    parallel_for(params.n_trees, threads, [&](std::size_t t) {
        std::mt19937_64 rng(m.tree_seeds[t]);
        if (kind == SurrogateKind::RF) {
            Dataset sample = bootstrap_rows(d, rng);
            m.trees[t] = fit_tree(sample, tp, rng());
        } else {
            m.trees[t] = fit_tree(d, tp, m.tree_seeds[t]);
        }
    });
    return m;
}

std::vector<double> predict_dist(const SurrogateModel& m, std::span<const double> x) {
    if (x.size() != m.n_features) throw DataError("ShapeMismatch", "predict: row width mismatch");
    std::vector<double> acc(m.n_classes, 0.0);
    for (const auto& tree : m.trees) {
        const std::vector<double> dist = descend(*tree, x).distribution();
        for (std::size_t c = 0; c < m.n_classes; ++c) acc[c] += dist[c];
    }
    for (double& v : acc) v /= static_cast<double>(m.trees.size());
    return acc;
}

std::size_t predict(const SurrogateModel& m, std::span<const double> x) {
    const std::vector<double> dist = predict_dist(m, x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < dist.size(); ++c) {
        if (dist[c] > dist[best]) best = c;
    }
    return best;
}

std::vector<std::size_t> predict_all(const SurrogateModel& m, const Dataset& d) {
    std::vector<std::size_t> out(d.n_rows);
    for (std::size_t r = 0; r < d.n_rows; ++r) out[r] = predict(m, d.row(r));
    return out;
}

namespace {

void accumulate_mdi(const TreeNode& node, double n_root, std::vector<double>& acc) {
    if (node.is_leaf()) return;
    const double n = static_cast<double>(node.total());
    const double nl = static_cast<double>(node.left->total());
    const double nr = static_cast<double>(node.right->total());
    const double decrease = gini_counts(node.counts) -
                            (nl / n) * gini_counts(node.left->counts) -
                            (nr / n) * gini_counts(node.right->counts);
    acc[node.feature] += (n / n_root) * decrease;
    accumulate_mdi(*node.left, n_root, acc);
    accumulate_mdi(*node.right, n_root, acc);
}

}  // namespace

std::vector<double> mdi_importance(const SurrogateModel& m) {
    std::vector<double> acc(m.n_features, 0.0);
    for (const auto& tree : m.trees) {
        std::vector<double> per_tree(m.n_features, 0.0);
        accumulate_mdi(*tree, static_cast<double>(tree->total()), per_tree);
        for (std::size_t f = 0; f < m.n_features; ++f) acc[f] += per_tree[f];
    }
    const double total = std::accumulate(acc.begin(), acc.end(), 0.0);
    if (total > 0.0) {
        for (double& v : acc) v /= total;
    } else {
        std::fill(acc.begin(), acc.end(), 1.0 / static_cast<double>(m.n_features));
    }
    return acc;
}

FidelityScore r_squared(std::span<const double> surrogate_preds,
                        std::span<const double> blackbox_preds, double threshold) {
    if (surrogate_preds.size() != blackbox_preds.size() || surrogate_preds.size() < 2) {
        throw DataError("ShapeMismatch", "r_squared: need equal lengths >= 2");
    }
    double mean = 0.0;
    for (double v : blackbox_preds) mean += v;
    mean /= static_cast<double>(blackbox_preds.size());

    FidelityScore score;
    score.threshold = threshold;
    for (std::size_t i = 0; i < surrogate_preds.size(); ++i) {
        const double ds = surrogate_preds[i] - blackbox_preds[i];
        const double db = blackbox_preds[i] - mean;
        score.sse_surrogate += ds * ds;
        score.sse_blackbox += db * db;
    }
    if (score.sse_blackbox <= 0.0) {
        throw NumericError("ZeroVariance", "black-box predictions are constant");
    }
    score.r_squared = 1.0 - score.sse_surrogate / score.sse_blackbox;
    score.replace = score.r_squared >= threshold;
    return score;
}

}  // namespace glassbox

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "glassbox/errors.hpp"
#include "glassbox/surrogate.hpp"
#include "glassbox/tensor.hpp"
#include "json.hpp"

namespace glassbox {

std::size_t TreeNode::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
}

std::vector<double> TreeNode::distribution() const {
    const double n = static_cast<double>(total());
    std::vector<double> dist(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
        dist[i] = n > 0.0 ? static_cast<double>(counts[i]) / n : 0.0;
    }
    return dist;
}

double gini(std::span<const double> dist) {
    double total = 0.0;
    for (double v : dist) {
        if (v < 0.0) throw DataError("EmptyNode", "gini: negative entry");
        total += v;
    }
    if (total <= 0.0) throw DataError("EmptyNode", "gini: empty distribution");
    double acc = 0.0;
    for (double v : dist) {
        const double p = v / total;
        acc += p * (1.0 - p);
    }
    return acc;
}

double gini_counts(std::span<const std::size_t> counts) {
    std::vector<double> d(counts.begin(), counts.end());
    return gini(d);
}

namespace {

struct SplitCandidate {
    bool valid = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double gain = -1.0;
};

struct Builder {
    const Dataset& d;
    const TreeParams& params;
    std::mt19937_64 rng;
    std::size_t n_classes;

    std::unique_ptr<TreeNode> build(std::vector<std::size_t>& rows, std::size_t depth) {
        auto node = std::make_unique<TreeNode>();
        node->counts.assign(n_classes, 0);
        for (std::size_t r : rows) node->counts[d.labels[r]]++;

        const bool pure =
            std::count_if(node->counts.begin(), node->counts.end(),
                          [](std::size_t c) { return c > 0; }) <= 1;
        if (pure || depth >= params.max_depth || rows.size() < 2 * params.min_leaf) {
            return node;
        }

        SplitCandidate best = find_split(rows, *node);
        if (!best.valid) return node;

        node->feature = best.feature;
        node->threshold = best.threshold;
        std::vector<std::size_t> left_rows, right_rows;
        for (std::size_t r : rows) {
            (d.at(r, best.feature) < best.threshold ? left_rows : right_rows).push_back(r);
        }
        node->left = build(left_rows, depth + 1);
        node->right = build(right_rows, depth + 1);
        return node;
    }

    SplitCandidate find_split(const std::vector<std::size_t>& rows, const TreeNode& node) {
        std::vector<std::size_t> features(d.n_cols);
        std::iota(features.begin(), features.end(), 0);
        if (params.features_per_split > 0 && params.features_per_split < d.n_cols) {
            std::shuffle(features.begin(), features.end(), rng);
            features.resize(params.features_per_split);
            std::sort(features.begin(), features.end());
        }

        const double parent_impurity = gini_counts(node.counts);
        const double n = static_cast<double>(rows.size());
        SplitCandidate best;

        for (std::size_t f : features) {
            if (params.random_thresholds) {
                double lo = d.at(rows[0], f), hi = lo;
                for (std::size_t r : rows) {
                    lo = std::min(lo, d.at(r, f));
                    hi = std::max(hi, d.at(r, f));
                }
                if (hi <= lo) continue;
                std::uniform_real_distribution<double> dist(lo, hi);
                consider(best, rows, parent_impurity, n, f, dist(rng));
            } else {
                std::vector<double> vals;
                vals.reserve(rows.size());
                for (std::size_t r : rows) vals.push_back(d.at(r, f));
                std::sort(vals.begin(), vals.end());
                vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
                for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                    consider(best, rows, parent_impurity, n, f, 0.5 * (vals[i] + vals[i + 1]));
                }
            }
        }
        return best;
    }

    void consider(SplitCandidate& best, const std::vector<std::size_t>& rows,
                  double parent_impurity, double n, std::size_t f, double threshold) {
        std::vector<std::size_t> lc(n_classes, 0), rc(n_classes, 0);
        for (std::size_t r : rows) {
            (d.at(r, f) < threshold ? lc : rc)[d.labels[r]]++;
        }
        const std::size_t ln = std::accumulate(lc.begin(), lc.end(), std::size_t{0});
        const std::size_t rn = rows.size() - ln;
        if (ln < params.min_leaf || rn < params.min_leaf) return;
        const double gain = parent_impurity -
                            (static_cast<double>(ln) / n) * gini_counts(lc) -
                            (static_cast<double>(rn) / n) * gini_counts(rc);
        // Candidates arrive in ascending (feature, threshold) order, so a
        // strict improvement test keeps the lowest-index winner on ties.
        if (gain > best.gain) best = {true, f, threshold, gain};
    }
};

}  // namespace

std::unique_ptr<TreeNode> fit_tree(const Dataset& d, const TreeParams& params,
                                   std::uint64_t seed) {
    if (d.n_rows == 0) throw DataError("EmptyDataset", "fit_tree: no rows");
    Builder b{d, params, std::mt19937_64(seed), d.n_classes()};
    std::vector<std::size_t> rows(d.n_rows);
    std::iota(rows.begin(), rows.end(), 0);
    return b.build(rows, 0);
}

const TreeNode& descend(const TreeNode& root, std::span<const double> x) {
    const TreeNode* node = &root;
    while (!node->is_leaf()) {
        node = x[node->feature] < node->threshold ? node->left.get() : node->right.get();
    }
    return *node;
}

namespace {

using nlohmann::json;

json node_to_json(const TreeNode& n) {
    if (n.is_leaf()) {
        return json{{"leaf", {{"dist", n.distribution()}, {"n", n.total()},
                              {"counts", n.counts}}}};
    }
    return json{{"feature", n.feature},
                {"threshold", n.threshold},
                {"counts", n.counts},
                {"left", node_to_json(*n.left)},
                {"right", node_to_json(*n.right)}};
}

std::unique_ptr<TreeNode> node_from_json(const json& j) {
    auto n = std::make_unique<TreeNode>();
    if (j.contains("leaf")) {
        n->counts = j.at("leaf").at("counts").get<std::vector<std::size_t>>();
        return n;
    }
    n->feature = j.at("feature").get<std::size_t>();
    n->threshold = j.at("threshold").get<double>();
    n->counts = j.at("counts").get<std::vector<std::size_t>>();
    n->left = node_from_json(j.at("left"));
    n->right = node_from_json(j.at("right"));
    return n;
}

}  // namespace

std::string tree_to_json(const TreeNode& root) { return node_to_json(root).dump(); }

std::unique_ptr<TreeNode> tree_from_json(const std::string& text) {
    return node_from_json(json::parse(text));
}

std::string surrogate_to_json(const SurrogateModel& m) {
    json j;
    j["kind"] = m.kind == SurrogateKind::DT ? "dt" : (m.kind == SurrogateKind::RF ? "rf" : "ert");
    j["n_features"] = m.n_features;
    j["n_classes"] = m.n_classes;
    j["tree_seeds"] = m.tree_seeds;
    j["params"] = {{"max_depth", m.params.max_depth},
                   {"min_leaf", m.params.min_leaf},
                   {"features_per_split", m.params.features_per_split},
                   {"random_thresholds", m.params.random_thresholds}};
    for (const auto& t : m.trees) j["trees"].push_back(node_to_json(*t));
    return j.dump();
}

SurrogateModel surrogate_from_json(const std::string& text) {
    json j = json::parse(text);
    SurrogateModel m;
    const std::string kind = j.at("kind").get<std::string>();
    m.kind = kind == "dt" ? SurrogateKind::DT
                          : (kind == "rf" ? SurrogateKind::RF : SurrogateKind::ERT);
    m.n_features = j.at("n_features").get<std::size_t>();
    m.n_classes = j.at("n_classes").get<std::size_t>();
    m.tree_seeds = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
    m.params.max_depth = j.at("params").at("max_depth").get<std::size_t>();
    m.params.min_leaf = j.at("params").at("min_leaf").get<std::size_t>();
    m.params.features_per_split = j.at("params").at("features_per_split").get<std::size_t>();
    m.params.random_thresholds = j.at("params").at("random_thresholds").get<bool>();
    for (const auto& t : j.at("trees")) m.trees.push_back(node_from_json(t));
    return m;
}

}  // namespace glassbox

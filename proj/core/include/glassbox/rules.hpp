#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glassbox/attribution.hpp"
#include "glassbox/dataset.hpp"
#include "glassbox/surrogate.hpp"
#include "glassbox/tensor.hpp"

namespace glassbox {

// Half-open interval [lower, upper) on one feature; matches the tree
// convention "left iff x < threshold".
struct Condition {
    std::size_t feature = 0;
    double lower;  // -inf when unbounded below
    double upper;  // +inf when unbounded above

    bool matches(double v) const { return v >= lower && v < upper; }
};

struct Rule {
    std::vector<Condition> antecedent;  // sorted by feature, one entry per feature
    std::vector<double> consequent;     // class distribution
    double support = 0.0;
    double confidence = 0.0;
    std::size_t coverage = 0;
    std::size_t tree_id = 0;
    std::size_t leaf_id = 0;

    bool matches(std::span<const double> x) const;
    std::size_t predicted_class() const;
};

struct RuleThresholds {
    double min_support = 0.01;
    double min_confidence = 0.6;
    std::size_t min_coverage = 5;
};

struct DecisionList {
    std::vector<Rule> rules;  // evaluated first-match
    std::size_t default_class = 0;
    RuleThresholds thresholds;
    bool degenerate = false;  // no rule survived filtering

    std::size_t predict(std::span<const double> x) const;
    // index of the first matching rule, or -1 for the default
    int match_index(std::span<const double> x) const;
};

std::vector<Rule> extract_rules(const TreeNode& tree, std::size_t tree_id = 0);

Rule score_rule(Rule rule, const Dataset& d);
std::vector<Rule> filter_rules(std::vector<Rule> rules, const RuleThresholds& t);

// Greedy sequential covering: repeatedly appends the best rule on the
// uncovered remainder (confidence, then support, then fewer conditions,
// then source order) until no rule meets the thresholds.
DecisionList assemble_decision_list(const std::vector<Rule>& rules, const Dataset& d,
                                    const RuleThresholds& t);

double list_fidelity(const DecisionList& list, const SurrogateModel& surrogate,
                     const Dataset& d);
double list_fidelity(const DecisionList& list, const std::vector<std::size_t>& model_preds,
                     const Dataset& d);
double list_confidence(const DecisionList& list, const Dataset& d);

std::string rule_to_text(const Rule& rule, const std::vector<std::string>& feature_names,
                         const std::vector<std::string>& class_names);

struct Counterfactual {
    std::vector<std::size_t> changed_features;
    std::vector<double> new_values;  // aligned with changed_features
    std::vector<double> x_prime;
    std::size_t original_class = 0;
    std::size_t new_class = 0;
    double l1_cost = 0.0;  // sigma-weighted
    bool blackbox_agrees = false;  // re-check on the black-box, when wired
};

struct CounterfactualParams {
    std::optional<std::size_t> target;
    std::size_t max_changes = 2;
    std::size_t quantile_candidates = 9;  // per-feature background quantiles
    double boundary_epsilon = 1e-6;
    std::size_t max_results = 3;
};

// Candidate values per feature come from decision-list interval boundaries
// (+- epsilon) and background quantiles; search widens one touched feature
// at a time up to max_changes. Every returned solution is re-verified
// against predict_fn.
std::vector<Counterfactual> find_counterfactuals(
    const PredictDistFn& fn, std::span<const double> x, const DecisionList& list,
    const Tensor& background, std::span<const double> feature_scale,
    const CounterfactualParams& params);

struct WhatIfEntry {
    std::size_t feature = 0;
    std::vector<double> new_dist;
    std::size_t new_class = 0;
    bool flipped = false;
};

// "Removal" = replace the feature with its background mean.
WhatIfEntry whatif_remove_feature(const PredictDistFn& fn, std::span<const double> x,
                                  std::size_t feature, const Tensor& background);

struct LocalExplanation {
    std::size_t instance_id = 0;
    std::size_t predicted_class = 0;
    double predicted_prob = 0.0;
    std::vector<double> phi;  // exact Shapley contributions, predicted class
    double phi_base = 0.0;
    int matched_rule = -1;  // index into the decision list, -1 = default
    std::vector<Counterfactual> counterfactuals;
    std::vector<WhatIfEntry> whatif;
};

struct ExplainContext {
    const SurrogateModel* surrogate = nullptr;
    const DecisionList* list = nullptr;
    const Tensor* background = nullptr;
    std::vector<double> feature_scale;
    PredictDistFn blackbox;  // over the same reduced space; may be empty
    CounterfactualParams cf_params;
};

LocalExplanation explain_instance(const ExplainContext& ctx, std::span<const double> x,
                                  std::size_t instance_id);

}  // namespace glassbox

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "glassbox/errors.hpp"
#include "glassbox/rules.hpp"

namespace glassbox {

namespace {

// Candidate replacement values for one feature: decision-list interval
// boundaries nudged to either side, plus background quantiles.
std::vector<double> candidate_values(std::size_t feature, const DecisionList& list,
                                     const Tensor& background,
                                     const CounterfactualParams& params) {
    std::set<double> vals;
    for (const Rule& r : list.rules) {
        for (const Condition& c : r.antecedent) {
            if (c.feature != feature) continue;
            for (double b : {c.lower, c.upper}) {
                if (!std::isfinite(b)) continue;
                const double eps = std::max(params.boundary_epsilon,
                                            std::abs(b) * params.boundary_epsilon);
                vals.insert(b - eps);
                vals.insert(b + eps);
                vals.insert(b);
            }
        }
    }
    const std::size_t n_bg = background.shape[0];
    const std::size_t k = background.shape[1];
    std::vector<double> col(n_bg);
    for (std::size_t r = 0; r < n_bg; ++r) col[r] = background.values[r * k + feature];
    std::sort(col.begin(), col.end());
    vals.insert(col.front());
    vals.insert(col.back());
    for (std::size_t q = 1; q <= params.quantile_candidates; ++q) {
        const double pos = static_cast<double>(q) /
                           static_cast<double>(params.quantile_candidates + 1) *
                           static_cast<double>(n_bg - 1);
        const std::size_t lo = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(lo);
        const double v = lo + 1 < n_bg ? col[lo] * (1.0 - frac) + col[lo + 1] * frac : col[lo];
        vals.insert(v);
    }
    return {vals.begin(), vals.end()};
}

struct Candidate {
    std::vector<std::size_t> features;
    std::vector<double> values;
    double cost = 0.0;
};

}  // namespace

std::vector<Counterfactual> find_counterfactuals(
    const PredictDistFn& fn, std::span<const double> x, const DecisionList& list,
    const Tensor& background, std::span<const double> feature_scale,
    const CounterfactualParams& params) {
    const std::size_t k = x.size();
    if (params.max_changes < 1) throw UsageError("InvalidConfig", "max_changes must be >= 1");

    const std::size_t original_class = argmax_class(fn(x));
    auto accepts = [&](std::size_t cls) {
        return params.target ? cls == *params.target : cls != original_class;
    };

    if (params.target && *params.target == original_class) {
        Counterfactual same;
        same.x_prime.assign(x.begin(), x.end());
        same.original_class = original_class;
        same.new_class = original_class;
        return {same};
    }

    std::vector<std::vector<double>> cands(k);
    for (std::size_t f = 0; f < k; ++f) {
        cands[f] = candidate_values(f, list, background, params);
    }
    auto move_cost = [&](std::size_t f, double v) {
        const double sigma = f < feature_scale.size() && feature_scale[f] > 0.0
                                 ? feature_scale[f]
                                 : 1.0;
        return std::abs(v - x[f]) / sigma;
    };

    std::vector<Counterfactual> found;
    std::vector<double> probe(x.begin(), x.end());

    // widen one touched feature at a time; the first level with solutions wins
    std::vector<Candidate> frontier = {{{}, {}, 0.0}};
    for (std::size_t level = 1; level <= params.max_changes && found.empty(); ++level) {
        std::vector<Candidate> next;
        for (const Candidate& base : frontier) {
            const std::size_t first_free = base.features.empty() ? 0 : base.features.back() + 1;
            for (std::size_t f = first_free; f < k; ++f) {
                for (double v : cands[f]) {
                    if (v == x[f]) continue;
                    Candidate c = base;
                    c.features.push_back(f);
                    c.values.push_back(v);
                    c.cost = base.cost + move_cost(f, v);

                    std::copy(x.begin(), x.end(), probe.begin());
                    for (std::size_t i = 0; i < c.features.size(); ++i) {
                        probe[c.features[i]] = c.values[i];
                    }
                    const std::size_t cls = argmax_class(fn(probe));
                    if (accepts(cls)) {
                        Counterfactual cf;
                        cf.changed_features = c.features;
                        cf.new_values = c.values;
                        cf.x_prime = probe;
                        cf.original_class = original_class;
                        cf.new_class = cls;
                        cf.l1_cost = c.cost;
                        found.push_back(std::move(cf));
                    } else if (level < params.max_changes) {
                        next.push_back(std::move(c));
                    }
                }
            }
        }
        frontier = std::move(next);
    }

    if (found.empty()) {
        throw DataError("NoCounterfactualFound",
                        "no class flip within " + std::to_string(params.max_changes) +
                            " feature changes");
    }
    std::stable_sort(found.begin(), found.end(),
                     [](const Counterfactual& a, const Counterfactual& b) {
                         return a.l1_cost < b.l1_cost;
                     });
    if (found.size() > params.max_results) found.resize(params.max_results);
    // re-verify on the predictor before returning
    std::erase_if(found, [&](const Counterfactual& cf) {
        return !(params.target ? argmax_class(fn(cf.x_prime)) == *params.target
                               : argmax_class(fn(cf.x_prime)) != original_class);
    });
    return found;
}

WhatIfEntry whatif_remove_feature(const PredictDistFn& fn, std::span<const double> x,
                                  std::size_t feature, const Tensor& background) {
    if (feature >= x.size()) throw UsageError("InvalidFeature", "feature index out of range");
    const std::size_t n_bg = background.shape[0];
    const std::size_t k = background.shape[1];
    double mean = 0.0;
    for (std::size_t r = 0; r < n_bg; ++r) mean += background.values[r * k + feature];
    mean /= static_cast<double>(n_bg);

    const std::size_t old_class = argmax_class(fn(x));
    std::vector<double> probe(x.begin(), x.end());
    probe[feature] = mean;

    WhatIfEntry e;
    e.feature = feature;
    e.new_dist = fn(probe);
    e.new_class = argmax_class(e.new_dist);
    e.flipped = e.new_class != old_class;
    return e;
}

LocalExplanation explain_instance(const ExplainContext& ctx, std::span<const double> x,
                                  std::size_t instance_id) {
    if (!ctx.surrogate || !ctx.list || !ctx.background) {
        throw UsageError("InvalidConfig", "explain_instance: context incomplete");
    }
    const PredictDistFn fn = surrogate_predict_fn(*ctx.surrogate);

    LocalExplanation e;
    e.instance_id = instance_id;
    const std::vector<double> dist = fn(x);
    e.predicted_class = argmax_class(dist);
    e.predicted_prob = dist[e.predicted_class];

    if (x.size() <= 12) {
        ShapleyResult s = shapley_exact(fn, x, *ctx.background, e.predicted_class);
        e.phi = std::move(s.phi);
        e.phi_base = s.base;
    } else {
        ShapleyResult s = shapley_sampled(fn, x, *ctx.background, e.predicted_class, 200,
                                          mix_seed(0xce, instance_id));
        e.phi = std::move(s.phi);
        e.phi_base = s.base;
    }

    e.matched_rule = ctx.list->match_index(x);

    try {
        e.counterfactuals = find_counterfactuals(fn, x, *ctx.list, *ctx.background,
                                                 ctx.feature_scale, ctx.cf_params);
    } catch (const DataError&) {
        // no counterfactual within budget; report without one
    }
    if (ctx.blackbox) {
        const std::size_t bb_orig = argmax_class(ctx.blackbox(x));
        for (Counterfactual& cf : e.counterfactuals) {
            cf.blackbox_agrees = argmax_class(ctx.blackbox(cf.x_prime)) != bb_orig;
        }
    }

    // what-if removal for every feature, strongest contributions first
    std::vector<std::size_t> order(x.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(e.phi[a]) > std::abs(e.phi[b]);
    });
    for (std::size_t f : order) {
        e.whatif.push_back(whatif_remove_feature(fn, x, f, *ctx.background));
    }
    return e;
}

}  // namespace glassbox

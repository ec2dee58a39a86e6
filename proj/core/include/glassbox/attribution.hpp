#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "glassbox/dataset.hpp"
#include "glassbox/surrogate.hpp"
#include "glassbox/tensor.hpp"

namespace glassbox {

// Any classifier exposed as a class-distribution function over one row.
using PredictDistFn = std::function<std::vector<double>(std::span<const double>)>;

PredictDistFn surrogate_predict_fn(const SurrogateModel& m);
std::size_t argmax_class(std::span<const double> dist);

enum class PfiMetric { Accuracy, MacroF1 };

struct PfiResult {
    std::vector<double> scores;  // baseline metric minus mean shuffled metric
    std::vector<double> stddev;  // over repeats
    double baseline = 0.0;
};

PfiResult permutation_importance(const PredictDistFn& fn, const Dataset& d, PfiMetric metric,
                                 std::size_t repeats, std::uint64_t seed);

struct ShapleyResult {
    std::vector<double> phi;
    std::vector<double> stderr_phi;  // sampled method only
    double base = 0.0;               // mean prediction over the background
};

// Exact coalition enumeration; v(S) substitutes background values for the
// features outside S, averaged over background rows. Masks are evaluated in
// ascending order so results do not depend on worker count.
ShapleyResult shapley_exact(const PredictDistFn& fn, std::span<const double> x,
                            const Tensor& background, std::size_t target_class,
                            std::size_t threads = 1);

// Monte-Carlo over random feature orderings; unbiased estimate of the exact
// values, deterministic per seed.
ShapleyResult shapley_sampled(const PredictDistFn& fn, std::span<const double> x,
                              const Tensor& background, std::size_t target_class,
                              std::size_t n_perms, std::uint64_t seed);

struct GlobalAttribution {
    std::vector<double> gfi;       // mean |phi| over instances, predicted class
    std::vector<double> mean_phi;  // signed mean, the positive/negative reading
    std::string method;
};

GlobalAttribution global_shap(const PredictDistFn& fn, const Dataset& d,
                              const Tensor& background, std::size_t threads = 1);

// Unweighted mean of the per-model global importances (DT, RF, ERT stack).
GlobalAttribution stacked_shap(const std::vector<const SurrogateModel*>& models,
                               const Dataset& d, const Tensor& background,
                               std::size_t threads = 1);

// Background = `size` rows sampled from d without replacement (all rows if
// d is smaller), deterministic per seed.
Tensor sample_background(const Dataset& d, std::size_t size, std::uint64_t seed);

}  // namespace glassbox

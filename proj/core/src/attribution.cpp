#include "glassbox/attribution.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>

#include "glassbox/errors.hpp"
#include "glassbox/metrics.hpp"
#include "glassbox/parallel.hpp"

namespace glassbox {

PredictDistFn surrogate_predict_fn(const SurrogateModel& m) {
    return [&m](std::span<const double> x) { return predict_dist(m, x); };
}

std::size_t argmax_class(std::span<const double> dist) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < dist.size(); ++c) {
        if (dist[c] > dist[best]) best = c;
    }
    return best;
}

PfiResult permutation_importance(const PredictDistFn& fn, const Dataset& d, PfiMetric metric,
                                 std::size_t repeats, std::uint64_t seed) {
    if (repeats < 1) throw UsageError("InvalidConfig", "repeats must be >= 1");
    const std::size_t classes = d.n_classes();

    auto score_of = [&](const Dataset& data) {
        std::vector<std::size_t> preds(data.n_rows);
        for (std::size_t r = 0; r < data.n_rows; ++r) preds[r] = argmax_class(fn(data.row(r)));
        const Metrics m = compute_metrics(preds, data.labels, classes);
        return metric == PfiMetric::Accuracy ? m.accuracy : m.macro_f1;
    };

    PfiResult out;
    out.baseline = score_of(d);
    out.scores.assign(d.n_cols, 0.0);
    out.stddev.assign(d.n_cols, 0.0);

    for (std::size_t f = 0; f < d.n_cols; ++f) {
        std::vector<double> drops(repeats);
        for (std::size_t rep = 0; rep < repeats; ++rep) {
            Dataset shuffled = d;
            std::vector<std::size_t> perm(d.n_rows);
            std::iota(perm.begin(), perm.end(), 0);
            std::mt19937_64 rng(mix_seed(seed, f * repeats + rep));
            std::shuffle(perm.begin(), perm.end(), rng);
            for (std::size_t r = 0; r < d.n_rows; ++r) {
                shuffled.features[r * d.n_cols + f] = d.at(perm[r], f);
            }
            drops[rep] = out.baseline - score_of(shuffled);
        }
        double mean = std::accumulate(drops.begin(), drops.end(), 0.0) /
                      static_cast<double>(repeats);
        double var = 0.0;
        for (double v : drops) var += (v - mean) * (v - mean);
        out.scores[f] = mean;
        out.stddev[f] = repeats > 1 ? std::sqrt(var / static_cast<double>(repeats - 1)) : 0.0;
    }
    return out;
}

namespace {

// v(S): features in S from x, the rest from each background row, averaged.
double coalition_value(const PredictDistFn& fn, std::span<const double> x,
                       const Tensor& background, std::size_t target_class, std::uint64_t mask) {
    const std::size_t k = x.size();
    const std::size_t n_bg = background.shape[0];
    std::vector<double> composite(k);
    double acc = 0.0;
    for (std::size_t b = 0; b < n_bg; ++b) {
        for (std::size_t f = 0; f < k; ++f) {
            composite[f] = (mask >> f) & 1ull ? x[f] : background.values[b * k + f];
        }
        acc += fn(composite)[target_class];
    }
    return acc / static_cast<double>(n_bg);
}

}  // namespace

Tensor sample_background(const Dataset& d, std::size_t size, std::uint64_t seed) {
    std::vector<std::size_t> rows(d.n_rows);
    std::iota(rows.begin(), rows.end(), 0);
    std::mt19937_64 rng(mix_seed(seed, 0xb6));
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t n = std::min(size, d.n_rows);
    rows.resize(n);
    std::sort(rows.begin(), rows.end());
    Tensor bg = Tensor::zeros({n, d.n_cols});
    for (std::size_t i = 0; i < n; ++i) {
        auto row = d.row(rows[i]);
        std::copy(row.begin(), row.end(), bg.values.begin() + i * d.n_cols);
    }
    return bg;
}

ShapleyResult shapley_exact(const PredictDistFn& fn, std::span<const double> x,
                            const Tensor& background, std::size_t target_class,
                            std::size_t threads) {
    const std::size_t k = x.size();
    if (k > 12) {
        throw UsageError("TooManyFeatures",
                         "exact enumeration capped at 12 features, got " + std::to_string(k));
    }
    if (background.shape.size() != 2 || background.shape[1] != k || background.shape[0] == 0) {
        throw DataError("ShapeMismatch", "background shape does not match instance");
    }
    const std::size_t n_masks = std::size_t{1} << k;
    std::vector<double> v(n_masks);
    parallel_for(n_masks, threads, [&](std::size_t mask) {
        v[mask] = coalition_value(fn, x, background, target_class,
                                  mask);
    });

    // weight(s) = s! (k-s-1)! / k!
    std::vector<double> weight(k);
    for (std::size_t s = 0; s < k; ++s) {
        double w = 1.0;
        for (std::size_t i = 1; i <= s; ++i) w *= static_cast<double>(i);
        for (std::size_t i = 1; i + s < k; ++i) w *= static_cast<double>(i);
        for (std::size_t i = 1; i <= k; ++i) w /= static_cast<double>(i);
        weight[s] = w;
    }

    ShapleyResult out;
    out.base = v[0];
    out.phi.assign(k, 0.0);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t bit = std::size_t{1} << i;
        for (std::size_t mask = 0; mask < n_masks; ++mask) {
            if (mask & bit) continue;
            const std::size_t s = static_cast<std::size_t>(std::popcount(mask));
            out.phi[i] += weight[s] * (v[mask | bit] - v[mask]);
        }
    }
    return out;
}

ShapleyResult shapley_sampled(const PredictDistFn& fn, std::span<const double> x,
                              const Tensor& background, std::size_t target_class,
                              std::size_t n_perms, std::uint64_t seed) {
    const std::size_t k = x.size();
    if (n_perms < 1) throw UsageError("InvalidConfig", "n_perms must be >= 1");
    if (k > 64) throw UsageError("TooManyFeatures", "sampled method capped at 64 features");
    if (background.shape.size() != 2 || background.shape[1] != k || background.shape[0] == 0) {
        throw DataError("ShapeMismatch", "background shape does not match instance");
    }
    std::vector<double> sum(k, 0.0), sum_sq(k, 0.0);
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);

    const double base = coalition_value(fn, x, background, target_class, 0);

    for (std::size_t p = 0; p < n_perms; ++p) {
        std::mt19937_64 rng(mix_seed(seed, p));
        std::shuffle(order.begin(), order.end(), rng);
        std::uint64_t mask = 0;
        double prev = base;
        for (std::size_t f : order) {
            mask |= std::uint64_t{1} << f;
            const double cur = coalition_value(fn, x, background, target_class, mask);
            const double marginal = cur - prev;
            sum[f] += marginal;
            sum_sq[f] += marginal * marginal;
            prev = cur;
        }
    }

    ShapleyResult out;
    out.base = base;
    out.phi.assign(k, 0.0);
    out.stderr_phi.assign(k, 0.0);
    const double n = static_cast<double>(n_perms);
    for (std::size_t f = 0; f < k; ++f) {
        out.phi[f] = sum[f] / n;
        if (n_perms > 1) {
            const double var = (sum_sq[f] - sum[f] * sum[f] / n) / (n - 1.0);
            out.stderr_phi[f] = std::sqrt(std::max(0.0, var) / n);
        }
    }
    return out;
}

GlobalAttribution global_shap(const PredictDistFn& fn, const Dataset& d,
                              const Tensor& background, std::size_t threads) {
    if (d.n_rows == 0) throw DataError("EmptyDataset", "global_shap: no evaluation rows");
    const std::size_t k = d.n_cols;
    std::vector<std::vector<double>> phis(d.n_rows);
    parallel_for(d.n_rows, threads, [&](std::size_t r) {
        auto x = d.row(r);
        const std::size_t cls = argmax_class(fn(x));
        if (k <= 12) {
            phis[r] = shapley_exact(fn, x, background, cls, 1).phi;
        } else {
            phis[r] = shapley_sampled(fn, x, background, cls, 200, mix_seed(0x5a, r)).phi;
        }
    });

    GlobalAttribution out;
    out.method = k <= 12 ? "shap-exact" : "shap-sampled";
    out.gfi.assign(k, 0.0);
    out.mean_phi.assign(k, 0.0);
    for (const auto& phi : phis) {
        for (std::size_t f = 0; f < k; ++f) {
            out.gfi[f] += std::abs(phi[f]);
            out.mean_phi[f] += phi[f];
        }
    }
    const double n = static_cast<double>(d.n_rows);
    for (std::size_t f = 0; f < k; ++f) {
        out.gfi[f] /= n;
        out.mean_phi[f] /= n;
    }
    return out;
}

GlobalAttribution stacked_shap(const std::vector<const SurrogateModel*>& models,
                               const Dataset& d, const Tensor& background,
                               std::size_t threads) {
    if (models.empty()) throw UsageError("InvalidConfig", "stacked_shap: no models");
    for (const SurrogateModel* m : models) {
        if (m->n_features != d.n_cols) {
            throw DataError("MismatchedFeatureSpaces",
                            "stacked_shap: model feature space differs from data");
        }
    }
    GlobalAttribution out;
    out.method = "shap-stacked";
    out.gfi.assign(d.n_cols, 0.0);
    out.mean_phi.assign(d.n_cols, 0.0);
    for (const SurrogateModel* m : models) {
        GlobalAttribution g = global_shap(surrogate_predict_fn(*m), d, background, threads);
        for (std::size_t f = 0; f < d.n_cols; ++f) {
            out.gfi[f] += g.gfi[f];
            out.mean_phi[f] += g.mean_phi[f];
        }
    }
    const double n = static_cast<double>(models.size());
    for (std::size_t f = 0; f < d.n_cols; ++f) {
        out.gfi[f] /= n;
        out.mean_phi[f] /= n;
    }
    return out;
}

}  // namespace glassbox

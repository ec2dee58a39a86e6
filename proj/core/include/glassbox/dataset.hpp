#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "glassbox/ranking.hpp"

namespace glassbox {

// Labeled tabular matrix. Immutable after construction.
struct Dataset {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> features;  // row-major n_rows * n_cols
    std::vector<std::size_t> labels;
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names;

    std::size_t n_classes() const { return class_names.size(); }
    std::span<const double> row(std::size_t i) const {
        return {features.data() + i * n_cols, n_cols};
    }
    double at(std::size_t r, std::size_t c) const { return features[r * n_cols + c]; }

    void validate() const;  // throws DataError on invariant violation
};

struct ScalerParams {
    std::vector<double> means;
    std::vector<double> std_devs;  // constant columns recorded as 0, treated as 1
};

struct ReducedDataset {
    Dataset base;                               // columns restricted to the selection
    std::vector<std::size_t> selected_indices;  // strictly increasing original indices
    std::vector<std::size_t> rank_order;        // same columns, by descending relevance
};

Dataset load_csv(const std::string& path, const std::string& label_column,
                 char delimiter = ',');

// Population convention (divisor N). Constant columns become all-zero.
std::pair<Dataset, ScalerParams> standardize(const Dataset& d);
Dataset apply_scaler(const Dataset& d, const ScalerParams& p);
Dataset invert_scaler(const Dataset& d, const ScalerParams& p);

// Stratified where class counts permit; deterministic per seed.
std::pair<Dataset, Dataset> split(const Dataset& d, double test_fraction,
                                  std::uint64_t seed);

struct SynthDataset {
    Dataset data;
    std::vector<std::size_t> informative;  // ground-truth informative columns
};

// Informative columns are class-conditional Gaussians with per-class mean
// offsets; the rest is pure noise.
SynthDataset synth_highdim(std::size_t n, std::size_t m_total, std::size_t m_informative,
                           std::size_t classes, double noise_sigma, std::uint64_t seed);

ReducedDataset reduce_to_topk(const Dataset& d, const FeatureRanking& ranking,
                              std::size_t k);

}  // namespace glassbox

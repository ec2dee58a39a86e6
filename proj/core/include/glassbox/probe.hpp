#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glassbox/cae.hpp"
#include "glassbox/dataset.hpp"
#include "glassbox/ranking.hpp"
#include "glassbox/tensor.hpp"

namespace glassbox {

// Softmax-gated elementwise attention over the input features or the
// embedding, with a small dense classifier used only during probe training.
struct AttentionProbe {
    enum class Placement { Input, Embedding };
    Placement placement = Placement::Embedding;
    std::size_t dim = 0;  // M for input placement, K for embedding
    std::size_t n_heads = 1;
    std::vector<Tensor> att_w;  // per head [dim, dim]
    std::vector<Tensor> att_b;  // per head [dim]
    Tensor l1_w, l1_b;  // dim -> hidden
    Tensor l2_w, l2_b;  // hidden -> classes
};

struct SensitivityEntry {
    std::size_t feature = 0;
    double s_value = 0.0;     // MSE(perturbed) - MSE(original), one-hot targets
    double top2_shift = 0.0;  // mean |dp| of the two most probable classes
};

struct SensitivityReport {
    std::vector<SensitivityEntry> entries;
    double w = 1.0;
    std::string scheme;
};

enum class PerturbScheme { GaussianNoise, Permute };

// Omega(V) = (1/k) sum_heads V (.) softmax(W_h V + b_h), row by row.
Tensor attention_forward(const AttentionProbe& probe, const Tensor& rows);

// R = (1/k) sum_heads softmax(diag(W_h)); a probability vector over dim.
std::vector<double> extract_relevance(const AttentionProbe& probe);

struct ProbeTrainConfig {
    std::size_t n_heads = 1;
    std::size_t epochs = 30;
    std::size_t batch_size = 64;
    std::size_t hidden = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
};

// Trains Omega -> dense -> dense -> softmax against the dataset labels.
// The black-box is read-only throughout.
AttentionProbe train_probe(const CAEClassifier& model, const Dataset& standardized,
                           AttentionProbe::Placement placement, const ProbeTrainConfig& cfg);

// Chains embedding relevances through the mean absolute encoder Jacobian:
// score_i = sum_j R[j] * mean_over_sample |dz_j/dx_i|, normalized to sum 1.
FeatureRanking input_attribution(const CAEClassifier& model, const AttentionProbe& probe,
                                 const Tensor& sample_rows, std::size_t k_cut);

// Ranking directly from an input-placement probe's relevances.
FeatureRanking input_ranking(const AttentionProbe& probe, std::size_t k_cut);

SensitivityEntry sensitivity(const CAEClassifier& model, const Dataset& standardized,
                             std::size_t feature, double w, PerturbScheme scheme,
                             std::uint64_t seed);

SensitivityReport validate_topk(const CAEClassifier& model, const Dataset& standardized,
                                const FeatureRanking& ranking, double w, PerturbScheme scheme,
                                std::uint64_t seed, std::size_t threads = 1);

}  // namespace glassbox

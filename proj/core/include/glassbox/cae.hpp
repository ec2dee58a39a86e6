#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "glassbox/dataset.hpp"
#include "glassbox/tape.hpp"
#include "glassbox/tensor.hpp"

namespace glassbox {

struct ConvSpec {
    std::size_t channels = 8;
    std::size_t width = 5;
    std::size_t stride = 1;
};

struct CAEConfig {
    std::vector<ConvSpec> encoder_layers = {{8, 5, 1}, {16, 5, 1}};
    std::size_t pool_window = 2;
    std::size_t embedding_dim = 16;  // K, must stay below the input width
    double alpha_recon = 0.5;
    double alpha_ce = 0.5;
    double weight_decay = 1e-4;  // lambda, applied to kernels and dense weights
    std::size_t epochs = 50;
    std::size_t batch_size = 64;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;

    void validate(std::size_t input_dim) const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double loss = 0.0;
    double loss_recon = 0.0;
    double loss_ce = 0.0;
};

// The black-box: conv/pool encoder to a K-dim embedding, softmax head,
// switch-based unpool/transposed-conv decoder with sigmoid output.
struct CAEClassifier {
    CAEConfig config;
    std::size_t input_dim = 0;
    std::size_t n_classes = 0;
    ScalerParams scaler;  // of the training stream, for reporting/inverse

    // Reconstruction target is the min-max(0,1) map of standardized inputs.
    std::vector<double> target_min;
    std::vector<double> target_max;

    std::vector<Tensor> enc_w, enc_b;
    Tensor embed_w, embed_b;
    Tensor head_w, head_b;
    Tensor dec_embed_w, dec_embed_b;
    std::vector<Tensor> dec_w, dec_b;

    // Per-stage lengths along the feature axis: conv output and pooled
    // output for each encoder layer.
    std::vector<std::size_t> conv_len, pool_len;

    std::vector<EpochStats> history;

    std::size_t flat_dim() const;  // channels * length after the last pool
    std::vector<double> minmax_target(std::span<const double> row) const;
};

CAEClassifier init_cae(const CAEConfig& cfg, std::size_t input_dim, std::size_t n_classes);

// Expects a standardized dataset. Deterministic for a fixed config seed.
CAEClassifier train_cae(const Dataset& train, const CAEConfig& cfg,
                        const ScalerParams& scaler = {});

Tensor encode(const CAEClassifier& model, const Dataset& d);            // [N, K]
Tensor encode_rows(const CAEClassifier& model, const Tensor& rows);     // [N, K]
Tensor decode(const CAEClassifier& model, const Tensor& z);             // [N, M], in (0,1)
Tensor predict_proba(const CAEClassifier& model, const Dataset& d);     // [N, C]
Tensor predict_proba_rows(const CAEClassifier& model, const Tensor& rows);
std::vector<std::size_t> predict_class(const CAEClassifier& model, const Dataset& d);

struct LossBreakdown {
    double total = 0.0;
    double recon = 0.0;  // MSE + weight decay
    double ce = 0.0;
};

LossBreakdown joint_loss(const CAEClassifier& model, const Dataset& batch);
std::vector<double> reconstruct_error(const CAEClassifier& model, const Dataset& d);

std::string save_checkpoint_json(const CAEClassifier& model);
CAEClassifier load_checkpoint_json(const std::string& text);

// Internal forward-pass plumbing, exposed for the probe's encoder Jacobians.
namespace detail {

struct BoundCAE {
    std::vector<Var> enc_w, enc_b;
    Var embed_w = 0, embed_b = 0;
    Var head_w = 0, head_b = 0;
    Var dec_embed_w = 0, dec_embed_b = 0;
    std::vector<Var> dec_w, dec_b;
};

BoundCAE bind_params(GradTape& tape, const CAEClassifier& model);
Var encode_row(GradTape& tape, const BoundCAE& bound, const CAEClassifier& model, Var input,
               std::vector<Switches>* switches_out);
Var decode_embedding(GradTape& tape, const BoundCAE& bound, const CAEClassifier& model, Var z,
                     const std::vector<Switches>& switches);
std::vector<Switches> center_switches(const CAEClassifier& model);

}  // namespace detail

}  // namespace glassbox

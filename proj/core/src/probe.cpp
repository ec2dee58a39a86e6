#include "glassbox/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "glassbox/errors.hpp"
#include "glassbox/optim.hpp"
#include "glassbox/parallel.hpp"
#include "glassbox/tape.hpp"

namespace glassbox {

namespace {

void softmax_vec(std::vector<double>& v) {
    double mx = *std::max_element(v.begin(), v.end());
    double total = 0.0;
    for (double& x : v) {
        x = std::exp(x - mx);
        total += x;
    }
    for (double& x : v) x /= total;
}

}  // namespace

Tensor attention_forward(const AttentionProbe& probe, const Tensor& rows) {
    if (rows.shape.size() != 2 || rows.shape[1] != probe.dim) {
        throw DataError("ShapeMismatch", "attention_forward: row width != probe dim");
    }
    const std::size_t n = rows.shape[0], d = probe.dim;
    Tensor out = Tensor::zeros({n, d});
    std::vector<double> gate(d);
    for (std::size_t r = 0; r < n; ++r) {
        const double* v = &rows.values[r * d];
        for (std::size_t h = 0; h < probe.n_heads; ++h) {
            const Tensor& w = probe.att_w[h];
            const Tensor& b = probe.att_b[h];
            for (std::size_t i = 0; i < d; ++i) {
                double acc = b[i];
                for (std::size_t j = 0; j < d; ++j) acc += w.values[i * d + j] * v[j];
                gate[i] = acc;
            }
            softmax_vec(gate);
            for (std::size_t i = 0; i < d; ++i) out.values[r * d + i] += v[i] * gate[i];
        }
        for (std::size_t i = 0; i < d; ++i) {
            out.values[r * d + i] /= static_cast<double>(probe.n_heads);
        }
    }
    return out;
}

std::vector<double> extract_relevance(const AttentionProbe& probe) {
    const std::size_t d = probe.dim;
    std::vector<double> relevance(d, 0.0);
    std::vector<double> diag(d);
    for (std::size_t h = 0; h < probe.n_heads; ++h) {
        for (std::size_t i = 0; i < d; ++i) diag[i] = probe.att_w[h].values[i * d + i];
        softmax_vec(diag);
        for (std::size_t i = 0; i < d; ++i) relevance[i] += diag[i];
    }
    for (double& v : relevance) v /= static_cast<double>(probe.n_heads);
    return relevance;
}

namespace {

struct BoundProbe {
    std::vector<Var> att_w, att_b;
    Var l1_w = 0, l1_b = 0, l2_w = 0, l2_b = 0;
};

BoundProbe bind_probe(GradTape& tape, const AttentionProbe& p) {
    BoundProbe b;
    for (const auto& t : p.att_w) b.att_w.push_back(tape.leaf(t));
    for (const auto& t : p.att_b) b.att_b.push_back(tape.leaf(t));
    b.l1_w = tape.leaf(p.l1_w);
    b.l1_b = tape.leaf(p.l1_b);
    b.l2_w = tape.leaf(p.l2_w);
    b.l2_b = tape.leaf(p.l2_b);
    return b;
}

Var probe_logits(GradTape& tape, const BoundProbe& b, const AttentionProbe& p, Var v) {
    Var omega = 0;
    for (std::size_t h = 0; h < p.n_heads; ++h) {
        Var gate = tape.softmax(tape.dense(v, b.att_w[h], b.att_b[h]));
        Var weighted = tape.mul(v, gate);
        omega = h == 0 ? weighted : tape.add(omega, weighted);
    }
    omega = tape.scale(omega, 1.0 / static_cast<double>(p.n_heads));
    Var h1 = tape.elu(tape.dense(omega, b.l1_w, b.l1_b));
    return tape.dense(h1, b.l2_w, b.l2_b);
}

std::vector<Tensor*> probe_params(AttentionProbe& p) {
    std::vector<Tensor*> out;
    for (auto& t : p.att_w) out.push_back(&t);
    for (auto& t : p.att_b) out.push_back(&t);
    out.push_back(&p.l1_w);
    out.push_back(&p.l1_b);
    out.push_back(&p.l2_w);
    out.push_back(&p.l2_b);
    return out;
}

std::vector<Var> bound_probe_vars(const BoundProbe& b) {
    std::vector<Var> out;
    for (Var v : b.att_w) out.push_back(v);
    for (Var v : b.att_b) out.push_back(v);
    out.push_back(b.l1_w);
    out.push_back(b.l1_b);
    out.push_back(b.l2_w);
    out.push_back(b.l2_b);
    return out;
}

}  // namespace

AttentionProbe train_probe(const CAEClassifier& model, const Dataset& standardized,
                           AttentionProbe::Placement placement, const ProbeTrainConfig& cfg) {
    if (cfg.n_heads < 1) throw UsageError("InvalidConfig", "need at least one attention head");
    standardized.validate();

    AttentionProbe p;
    p.placement = placement;
    p.n_heads = cfg.n_heads;
    p.dim = placement == AttentionProbe::Placement::Input ? standardized.n_cols
                                                          : model.config.embedding_dim;
    const std::size_t classes = standardized.n_classes();
    std::uint64_t stream = 0;
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
        p.att_w.push_back(glorot_init({p.dim, p.dim}, mix_seed(cfg.seed, stream++)));
        p.att_b.push_back(Tensor::zeros({p.dim}));
    }
    p.l1_w = glorot_init({cfg.hidden, p.dim}, mix_seed(cfg.seed, stream++));
    p.l1_b = Tensor::zeros({cfg.hidden});
    p.l2_w = glorot_init({classes, cfg.hidden}, mix_seed(cfg.seed, stream++));
    p.l2_b = Tensor::zeros({classes});

    Tensor inputs = placement == AttentionProbe::Placement::Input
                        ? Tensor({standardized.n_rows, standardized.n_cols}, standardized.features)
                        : encode(model, standardized);

    std::vector<Tensor*> params = probe_params(p);
    std::vector<AdamState> states;
    for (Tensor* t : params) states.push_back(AdamState::for_param(*t));
    AdamConfig adam{cfg.learning_rate, 0.9, 0.999, 1e-8};

    std::vector<std::size_t> order(standardized.n_rows);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(mix_seed(cfg.seed, 5000 + epoch));
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            GradTape tape;
            BoundProbe b = bind_probe(tape, p);
            Var loss_sum = 0;
            bool first = true;
            for (std::size_t i = start; i < end; ++i) {
                const std::size_t r = order[i];
                Var v = tape.leaf(Tensor({p.dim}, {inputs.values.begin() + r * p.dim,
                                                   inputs.values.begin() + (r + 1) * p.dim}));
                Var probs = tape.softmax(probe_logits(tape, b, p, v));
                Var nll = tape.negative_log_likelihood(probs, standardized.labels[r]);
                loss_sum = first ? nll : tape.add(loss_sum, nll);
                first = false;
            }
            Var loss = tape.scale(loss_sum, 1.0 / static_cast<double>(end - start));
            tape.backward(loss);
            auto vars = bound_probe_vars(b);
            for (std::size_t i = 0; i < params.size(); ++i) {
                adam_step(*params[i], tape.grad(vars[i]), states[i], adam);
            }
            epoch_loss += tape.value(loss).values[0];
            ++n_batches;
        }
        if (!std::isfinite(epoch_loss / static_cast<double>(n_batches))) {
            throw NumericError("NonFiniteLoss",
                               "probe training diverged at epoch " + std::to_string(epoch));
        }
    }
    return p;
}

FeatureRanking input_attribution(const CAEClassifier& model, const AttentionProbe& probe,
                                 const Tensor& sample_rows, std::size_t k_cut) {
    if (probe.placement != AttentionProbe::Placement::Embedding) {
        throw UsageError("InvalidConfig", "input_attribution needs an embedding-placement probe");
    }
    if (sample_rows.shape.size() != 2 || sample_rows.shape[0] == 0) {
        throw DataError("EmptySample", "input_attribution needs at least one sample row");
    }
    const std::size_t n = sample_rows.shape[0];
    const std::size_t m = model.input_dim;
    const std::size_t k = model.config.embedding_dim;
    const std::vector<double> relevance = extract_relevance(probe);

    // mean |dz_j/dx_i| over the sample
    std::vector<double> mean_abs_jac(k * m, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        GradTape tape;
        auto b = detail::bind_params(tape, model);
        Var x = tape.leaf(Tensor({1, m}, {sample_rows.values.begin() + r * m,
                                          sample_rows.values.begin() + (r + 1) * m}));
        Var z = detail::encode_row(tape, b, model, x, nullptr);
        for (std::size_t j = 0; j < k; ++j) {
            tape.zero_grads();
            Tensor seed = Tensor::zeros({k});
            seed.values[j] = 1.0;
            tape.backward(z, seed);
            const Tensor& gx = tape.grad(x);
            for (std::size_t i = 0; i < m; ++i) {
                mean_abs_jac[j * m + i] += std::abs(gx.values[i]);
            }
        }
    }
    std::vector<double> scores(m, 0.0);
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t i = 0; i < m; ++i) {
            scores[i] += relevance[j] * mean_abs_jac[j * m + i] / static_cast<double>(n);
        }
    }
    double total = std::accumulate(scores.begin(), scores.end(), 0.0);
    if (total > 0.0) {
        for (double& s : scores) s /= total;
    }
    return FeatureRanking::from_scores(std::move(scores), k_cut, "attention-embedding-chained");
}

FeatureRanking input_ranking(const AttentionProbe& probe, std::size_t k_cut) {
    if (probe.placement != AttentionProbe::Placement::Input) {
        throw UsageError("InvalidConfig", "input_ranking needs an input-placement probe");
    }
    return FeatureRanking::from_scores(extract_relevance(probe), k_cut, "attention-input");
}

namespace {

double onehot_mse(const Tensor& probs, const std::vector<std::size_t>& labels) {
    const std::size_t n = probs.shape[0], c = probs.shape[1];
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < c; ++j) {
            const double target = labels[r] == j ? 1.0 : 0.0;
            const double diff = probs.values[r * c + j] - target;
            total += diff * diff;
        }
    }
    return total / static_cast<double>(n * c);
}

SensitivityEntry sensitivity_impl(const CAEClassifier& model, const Dataset& d,
                                  const Tensor& orig_probs, double orig_mse, std::size_t feature,
                                  double w, PerturbScheme scheme, std::uint64_t seed) {
    if (feature >= d.n_cols) throw UsageError("InvalidFeature", "feature index out of range");
    if (!(w >= 0.0)) throw UsageError("InvalidConfig", "perturbation magnitude must be >= 0");

    Dataset perturbed = d;
    std::mt19937_64 rng(mix_seed(seed, feature));
    if (scheme == PerturbScheme::GaussianNoise) {
        double mean = 0.0;
        for (std::size_t r = 0; r < d.n_rows; ++r) mean += d.at(r, feature);
        mean /= static_cast<double>(d.n_rows);
        double var = 0.0;
        for (std::size_t r = 0; r < d.n_rows; ++r) {
            const double dv = d.at(r, feature) - mean;
            var += dv * dv;
        }
        const double sigma = std::sqrt(var / static_cast<double>(d.n_rows));
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (std::size_t r = 0; r < d.n_rows; ++r) {
            perturbed.features[r * d.n_cols + feature] += w * sigma * gauss(rng);
        }
    } else {
        std::vector<std::size_t> perm(d.n_rows);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t r = 0; r < d.n_rows; ++r) {
            perturbed.features[r * d.n_cols + feature] = d.at(perm[r], feature);
        }
    }

    const Tensor new_probs = predict_proba(model, perturbed);
    SensitivityEntry e;
    e.feature = feature;
    e.s_value = onehot_mse(new_probs, d.labels) - orig_mse;

    const std::size_t c = orig_probs.shape[1];
    double shift = 0.0;
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        std::size_t top1 = 0, top2 = c > 1 ? 1 : 0;
        if (orig_probs.values[r * c + top2] > orig_probs.values[r * c + top1]) std::swap(top1, top2);
        for (std::size_t j = 2; j < c; ++j) {
            if (orig_probs.values[r * c + j] > orig_probs.values[r * c + top1]) {
                top2 = top1;
                top1 = j;
            } else if (orig_probs.values[r * c + j] > orig_probs.values[r * c + top2]) {
                top2 = j;
            }
        }
        shift += 0.5 * (std::abs(new_probs.values[r * c + top1] - orig_probs.values[r * c + top1]) +
                        std::abs(new_probs.values[r * c + top2] - orig_probs.values[r * c + top2]));
    }
    e.top2_shift = shift / static_cast<double>(d.n_rows);
    return e;
}

}  // namespace

SensitivityEntry sensitivity(const CAEClassifier& model, const Dataset& standardized,
                             std::size_t feature, double w, PerturbScheme scheme,
                             std::uint64_t seed) {
    const Tensor orig = predict_proba(model, standardized);
    return sensitivity_impl(model, standardized, orig, onehot_mse(orig, standardized.labels),
                            feature, w, scheme, seed);
}

SensitivityReport validate_topk(const CAEClassifier& model, const Dataset& standardized,
                                const FeatureRanking& ranking, double w, PerturbScheme scheme,
                                std::uint64_t seed, std::size_t threads) {
    const Tensor orig = predict_proba(model, standardized);
    const double orig_mse = onehot_mse(orig, standardized.labels);

    SensitivityReport report;
    report.w = w;
    report.scheme = scheme == PerturbScheme::GaussianNoise ? "gaussian-noise" : "permute";
    const std::size_t k = std::min(ranking.k_cut, ranking.order.size());
    report.entries.resize(k);
    parallel_for(k, threads, [&](std::size_t i) {
        report.entries[i] = sensitivity_impl(model, standardized, orig, orig_mse,
                                             ranking.order[i], w, scheme, seed);
    });
    return report;
}

}  // namespace glassbox

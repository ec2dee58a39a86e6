#include "glassbox/cae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "glassbox/errors.hpp"
#include "glassbox/optim.hpp"
#include "json.hpp"

namespace glassbox {

void CAEConfig::validate(std::size_t input_dim) const {
    if (encoder_layers.empty()) throw UsageError("InvalidConfig", "no encoder layers");
    if (embedding_dim < 1 || embedding_dim >= input_dim) {
        throw UsageError("InvalidConfig", "embedding_dim must be in [1, input_dim)");
    }
    if (alpha_recon < 0.0 || alpha_ce < 0.0 || (alpha_recon == 0.0 && alpha_ce == 0.0)) {
        throw UsageError("InvalidConfig", "loss weights must be nonnegative, not both zero");
    }
    if (pool_window == 0 || batch_size == 0) {
        throw UsageError("InvalidConfig", "pool_window and batch_size must be positive");
    }
    for (const ConvSpec& s : encoder_layers) {
        if (s.channels == 0 || s.width == 0 || s.stride == 0) {
            throw UsageError("InvalidConfig", "conv spec entries must be positive");
        }
    }
}

namespace {

std::size_t same_padding(const ConvSpec& s) { return (s.width - 1) / 2; }

std::size_t conv_out_len(std::size_t len, const ConvSpec& s) {
    const std::size_t p = same_padding(s);
    if (len + 2 * p < s.width) throw DataError("ShapeMismatch", "input shorter than kernel");
    return (len + 2 * p - s.width) / s.stride + 1;
}

// Weights first (decay applies to these), then biases; order is the
// checkpoint and optimizer-state order.
std::vector<Tensor*> weight_params(CAEClassifier& m) {
    std::vector<Tensor*> out;
    for (auto& t : m.enc_w) out.push_back(&t);
    out.push_back(&m.embed_w);
    out.push_back(&m.head_w);
    out.push_back(&m.dec_embed_w);
    for (auto& t : m.dec_w) out.push_back(&t);
    return out;
}

std::vector<Tensor*> all_params(CAEClassifier& m) {
    std::vector<Tensor*> out = weight_params(m);
    for (auto& t : m.enc_b) out.push_back(&t);
    out.push_back(&m.embed_b);
    out.push_back(&m.head_b);
    out.push_back(&m.dec_embed_b);
    for (auto& t : m.dec_b) out.push_back(&t);
    return out;
}

}  // namespace

std::size_t CAEClassifier::flat_dim() const {
    return config.encoder_layers.back().channels * pool_len.back();
}

std::vector<double> CAEClassifier::minmax_target(std::span<const double> row) const {
    std::vector<double> out(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
        const double span = target_max[i] - target_min[i];
        out[i] = span > 0.0 ? (row[i] - target_min[i]) / span : 0.5;
    }
    return out;
}

CAEClassifier init_cae(const CAEConfig& cfg, std::size_t input_dim, std::size_t n_classes) {
    cfg.validate(input_dim);
    if (n_classes < 2) throw UsageError("InvalidConfig", "need at least two classes");

    CAEClassifier m;
    m.config = cfg;
    m.input_dim = input_dim;
    m.n_classes = n_classes;
    m.target_min.assign(input_dim, 0.0);
    m.target_max.assign(input_dim, 1.0);

    std::size_t len = input_dim;
    std::size_t channels = 1;
    std::uint64_t stream = 0;
    for (const ConvSpec& s : cfg.encoder_layers) {
        m.enc_w.push_back(glorot_init({s.channels, channels, s.width}, mix_seed(cfg.seed, stream++)));
        m.enc_b.push_back(Tensor::zeros({s.channels}));
        m.dec_w.push_back(glorot_init({s.channels, channels, s.width}, mix_seed(cfg.seed, stream++)));
        m.dec_b.push_back(Tensor::zeros({channels}));
        len = conv_out_len(len, s);
        m.conv_len.push_back(len);
        len = (len + cfg.pool_window - 1) / cfg.pool_window;
        m.pool_len.push_back(len);
        channels = s.channels;
    }
    const std::size_t flat = channels * len;
    m.embed_w = glorot_init({cfg.embedding_dim, flat}, mix_seed(cfg.seed, stream++));
    m.embed_b = Tensor::zeros({cfg.embedding_dim});
    m.head_w = glorot_init({n_classes, cfg.embedding_dim}, mix_seed(cfg.seed, stream++));
    m.head_b = Tensor::zeros({n_classes});
    m.dec_embed_w = glorot_init({flat, cfg.embedding_dim}, mix_seed(cfg.seed, stream++));
    m.dec_embed_b = Tensor::zeros({flat});
    return m;
}

namespace detail {

BoundCAE bind_params(GradTape& tape, const CAEClassifier& m) {
    BoundCAE b;
    for (const auto& t : m.enc_w) b.enc_w.push_back(tape.leaf(t));
    b.embed_w = tape.leaf(m.embed_w);
    b.head_w = tape.leaf(m.head_w);
    b.dec_embed_w = tape.leaf(m.dec_embed_w);
    for (const auto& t : m.dec_w) b.dec_w.push_back(tape.leaf(t));
    for (const auto& t : m.enc_b) b.enc_b.push_back(tape.leaf(t));
    b.embed_b = tape.leaf(m.embed_b);
    b.head_b = tape.leaf(m.head_b);
    b.dec_embed_b = tape.leaf(m.dec_embed_b);
    for (const auto& t : m.dec_b) b.dec_b.push_back(tape.leaf(t));
    return b;
}

std::vector<Var> bound_param_vars(const BoundCAE& b) {
    std::vector<Var> out;
    for (Var v : b.enc_w) out.push_back(v);
    out.push_back(b.embed_w);
    out.push_back(b.head_w);
    out.push_back(b.dec_embed_w);
    for (Var v : b.dec_w) out.push_back(v);
    for (Var v : b.enc_b) out.push_back(v);
    out.push_back(b.embed_b);
    out.push_back(b.head_b);
    out.push_back(b.dec_embed_b);
    for (Var v : b.dec_b) out.push_back(v);
    return out;
}

Var encode_row(GradTape& tape, const BoundCAE& b, const CAEClassifier& m, Var input,
               std::vector<Switches>* switches_out) {
    Var h = input;
    for (std::size_t i = 0; i < m.config.encoder_layers.size(); ++i) {
        const ConvSpec& s = m.config.encoder_layers[i];
        h = tape.conv1d(h, b.enc_w[i], b.enc_b[i], s.stride, same_padding(s));
        h = tape.elu(h);
        auto [pooled, sw] = tape.maxpool(h, m.config.pool_window);
        h = pooled;
        if (switches_out) switches_out->push_back(std::move(sw));
    }
    h = tape.dense(h, b.embed_w, b.embed_b);
    return tape.elu(h);
}

Var decode_embedding(GradTape& tape, const BoundCAE& b, const CAEClassifier& m, Var z,
                     const std::vector<Switches>& switches) {
    Var h = tape.dense(z, b.dec_embed_w, b.dec_embed_b);
    h = tape.elu(h);
    const std::size_t n_layers = m.config.encoder_layers.size();
    h = tape.reshape(h, {m.config.encoder_layers.back().channels, m.pool_len.back()});
    for (std::size_t i = n_layers; i-- > 0;) {
        const ConvSpec& s = m.config.encoder_layers[i];
        h = tape.unpool(h, switches[i]);
        const std::size_t out_len = i == 0 ? m.input_dim : m.pool_len[i - 1];
        h = tape.transposed_conv1d(h, b.dec_w[i], b.dec_b[i], s.stride, same_padding(s), out_len);
        h = i == 0 ? tape.sigmoid(h) : tape.elu(h);
    }
    return h;
}

std::vector<Switches> center_switches(const CAEClassifier& m) {
    std::vector<Switches> out;
    for (std::size_t i = 0; i < m.conv_len.size(); ++i) {
        Switches sw;
        sw.channels = m.config.encoder_layers[i].channels;
        sw.pooled_len = m.pool_len[i];
        sw.input_len = m.conv_len[i];
        sw.window = m.config.pool_window;
        sw.argmax.resize(sw.channels * sw.pooled_len);
        for (std::size_t c = 0; c < sw.channels; ++c) {
            for (std::size_t t = 0; t < sw.pooled_len; ++t) {
                sw.argmax[c * sw.pooled_len + t] =
                    std::min(t * sw.window + (sw.window - 1) / 2, sw.input_len - 1);
            }
        }
        out.push_back(std::move(sw));
    }
    return out;
}

}  // namespace detail

namespace {

Tensor row_tensor(std::span<const double> row) {
    return Tensor({1, row.size()}, std::vector<double>(row.begin(), row.end()));
}

}  // namespace

Tensor encode_rows(const CAEClassifier& m, const Tensor& rows) {
    if (rows.shape.size() != 2 || rows.shape[1] != m.input_dim) {
        throw DataError("ShapeMismatch", "encode: row width differs from training width");
    }
    const std::size_t n = rows.shape[0];
    Tensor z = Tensor::zeros({n, m.config.embedding_dim});
    for (std::size_t r = 0; r < n; ++r) {
        GradTape tape;
        auto b = detail::bind_params(tape, m);
        Var x = tape.leaf(row_tensor({&rows.values[r * m.input_dim], m.input_dim}));
        Var zr = detail::encode_row(tape, b, m, x, nullptr);
        const Tensor& zv = tape.value(zr);
        std::copy(zv.values.begin(), zv.values.end(), z.values.begin() + r * m.config.embedding_dim);
    }
    return z;
}

Tensor encode(const CAEClassifier& m, const Dataset& d) {
    return encode_rows(m, Tensor({d.n_rows, d.n_cols}, d.features));
}

Tensor decode(const CAEClassifier& m, const Tensor& z) {
    if (z.shape.size() != 2 || z.shape[1] != m.config.embedding_dim) {
        throw DataError("ShapeMismatch", "decode: embedding width mismatch");
    }
    const auto switches = detail::center_switches(m);
    const std::size_t n = z.shape[0];
    Tensor out = Tensor::zeros({n, m.input_dim});
    for (std::size_t r = 0; r < n; ++r) {
        GradTape tape;
        auto b = detail::bind_params(tape, m);
        Var zv = tape.leaf(Tensor({m.config.embedding_dim},
                                  {z.values.begin() + r * m.config.embedding_dim,
                                   z.values.begin() + (r + 1) * m.config.embedding_dim}));
        Var xr = detail::decode_embedding(tape, b, m, zv, switches);
        const Tensor& xv = tape.value(xr);
        std::copy(xv.values.begin(), xv.values.end(), out.values.begin() + r * m.input_dim);
    }
    return out;
}

namespace {

void softmax_inplace(double* v, std::size_t n) {
    double mx = v[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v[i]);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = std::exp(v[i] - mx);
        total += v[i];
    }
    for (std::size_t i = 0; i < n; ++i) v[i] /= total;
}

}  // namespace

Tensor predict_proba_rows(const CAEClassifier& m, const Tensor& rows) {
    Tensor z = encode_rows(m, rows);
    const std::size_t n = z.shape[0], k = m.config.embedding_dim, c = m.n_classes;
    Tensor probs = Tensor::zeros({n, c});
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t o = 0; o < c; ++o) {
            double acc = m.head_b[o];
            for (std::size_t i = 0; i < k; ++i) {
                acc += m.head_w.values[o * k + i] * z.values[r * k + i];
            }
            probs.values[r * c + o] = acc;
        }
        softmax_inplace(&probs.values[r * c], c);
    }
    return probs;
}

Tensor predict_proba(const CAEClassifier& m, const Dataset& d) {
    return predict_proba_rows(m, Tensor({d.n_rows, d.n_cols}, d.features));
}

std::vector<std::size_t> predict_class(const CAEClassifier& m, const Dataset& d) {
    Tensor p = predict_proba(m, d);
    std::vector<std::size_t> out(d.n_rows);
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < m.n_classes; ++c) {
            if (p.values[r * m.n_classes + c] > p.values[r * m.n_classes + best]) best = c;
        }
        out[r] = best;
    }
    return out;
}

namespace {

struct BatchGraph {
    GradTape tape;
    detail::BoundCAE bound;
    Var loss = 0;
    double mean_mse = 0.0;
    double mean_ce = 0.0;
    double decay = 0.0;
};

// Builds the joint objective for a set of rows on one tape:
// alpha_r * (mean MSE + lambda * sum of squared weights) + alpha_ce * mean CE.
BatchGraph build_joint_graph(const CAEClassifier& m, const Dataset& d,
                             const std::vector<std::size_t>& rows) {
    if (rows.empty()) throw DataError("EmptyBatch", "joint loss needs a nonempty batch");
    BatchGraph graph;
    GradTape& tape = graph.tape;
    graph.bound = detail::bind_params(tape, m);
    const auto& b = graph.bound;

    std::vector<Var> weight_vars;
    for (Var v : b.enc_w) weight_vars.push_back(v);
    weight_vars.push_back(b.embed_w);
    weight_vars.push_back(b.head_w);
    weight_vars.push_back(b.dec_embed_w);
    for (Var v : b.dec_w) weight_vars.push_back(v);

    Var decay = tape.sum_squares(weight_vars[0]);
    for (std::size_t i = 1; i < weight_vars.size(); ++i) {
        decay = tape.add(decay, tape.sum_squares(weight_vars[i]));
    }

    Var mse_sum = 0;
    Var ce_sum = 0;
    bool first = true;
    for (std::size_t r : rows) {
        Var x = tape.leaf(row_tensor(d.row(r)));
        std::vector<Switches> sw;
        Var z = detail::encode_row(tape, b, m, x, &sw);
        Var probs = tape.softmax(tape.dense(z, b.head_w, b.head_b));
        Var ce = tape.negative_log_likelihood(probs, d.labels[r]);
        Var xr = detail::decode_embedding(tape, b, m, z, sw);
        Tensor target({1, m.input_dim}, m.minmax_target(d.row(r)));
        Var mse = tape.mean_squared_error(xr, target);
        if (first) {
            mse_sum = mse;
            ce_sum = ce;
            first = false;
        } else {
            mse_sum = tape.add(mse_sum, mse);
            ce_sum = tape.add(ce_sum, ce);
        }
    }
    const double inv_n = 1.0 / static_cast<double>(rows.size());
    Var mean_mse = tape.scale(mse_sum, inv_n);
    Var mean_ce = tape.scale(ce_sum, inv_n);
    Var recon = tape.add(mean_mse, tape.scale(decay, m.config.weight_decay));
    graph.loss = tape.add(tape.scale(recon, m.config.alpha_recon),
                          tape.scale(mean_ce, m.config.alpha_ce));
    graph.mean_mse = tape.value(mean_mse).values[0];
    graph.mean_ce = tape.value(mean_ce).values[0];
    graph.decay = tape.value(decay).values[0];
    return graph;
}

}  // namespace

LossBreakdown joint_loss(const CAEClassifier& m, const Dataset& batch) {
    std::vector<std::size_t> rows(batch.n_rows);
    std::iota(rows.begin(), rows.end(), 0);
    BatchGraph g = build_joint_graph(m, batch, rows);
    LossBreakdown out;
    out.recon = g.mean_mse + m.config.weight_decay * g.decay;
    out.ce = g.mean_ce;
    out.total = g.tape.value(g.loss).values[0];
    return out;
}

CAEClassifier train_cae(const Dataset& train, const CAEConfig& cfg, const ScalerParams& scaler) {
    train.validate();
    CAEClassifier m = init_cae(cfg, train.n_cols, train.n_classes());
    m.scaler = scaler;

    m.target_min.assign(train.n_cols, 0.0);
    m.target_max.assign(train.n_cols, 0.0);
    for (std::size_t c = 0; c < train.n_cols; ++c) {
        double lo = train.at(0, c), hi = train.at(0, c);
        for (std::size_t r = 1; r < train.n_rows; ++r) {
            lo = std::min(lo, train.at(r, c));
            hi = std::max(hi, train.at(r, c));
        }
        m.target_min[c] = lo;
        m.target_max[c] = hi;
    }

    std::vector<Tensor*> params = all_params(m);
    std::vector<AdamState> states;
    for (Tensor* p : params) states.push_back(AdamState::for_param(*p));
    AdamConfig adam{cfg.learning_rate, 0.9, 0.999, 1e-8};

    std::vector<std::size_t> order(train.n_rows);
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::mt19937_64 rng(mix_seed(cfg.seed, 1000 + epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double epoch_mse = 0.0, epoch_ce = 0.0, epoch_loss = 0.0;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, order.size());
            std::vector<std::size_t> rows(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(end));
            BatchGraph g = build_joint_graph(m, train, rows);
            g.tape.backward(g.loss);

            auto leaf_vars = detail::bound_param_vars(g.bound);
            for (std::size_t i = 0; i < params.size(); ++i) {
                adam_step(*params[i], g.tape.grad(leaf_vars[i]), states[i], adam);
            }
            epoch_mse += g.mean_mse;
            epoch_ce += g.mean_ce;
            epoch_loss += g.tape.value(g.loss).values[0];
            ++n_batches;
        }
        EpochStats st;
        st.epoch = epoch;
        st.loss = epoch_loss / static_cast<double>(n_batches);
        st.loss_recon = epoch_mse / static_cast<double>(n_batches);
        st.loss_ce = epoch_ce / static_cast<double>(n_batches);
        if (!std::isfinite(st.loss)) {
            throw NumericError("NonFiniteLoss",
                               "training diverged at epoch " + std::to_string(epoch));
        }
        m.history.push_back(st);
    }
    return m;
}

std::vector<double> reconstruct_error(const CAEClassifier& m, const Dataset& d) {
    std::vector<double> out(d.n_rows, 0.0);
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        GradTape tape;
        auto b = detail::bind_params(tape, m);
        Var x = tape.leaf(row_tensor(d.row(r)));
        std::vector<Switches> sw;
        Var z = detail::encode_row(tape, b, m, x, &sw);
        Var xr = detail::decode_embedding(tape, b, m, z, sw);
        const Tensor& rec = tape.value(xr);
        const std::vector<double> target = m.minmax_target(d.row(r));
        double acc = 0.0;
        for (std::size_t c = 0; c < d.n_cols; ++c) {
            const double diff = rec.values[c] - target[c];
            acc += diff * diff;
        }
        out[r] = acc / static_cast<double>(d.n_cols);
    }
    return out;
}

namespace {

using nlohmann::json;

json tensor_to_json(const Tensor& t) {
    return json{{"shape", t.shape}, {"values", t.values}};
}

Tensor tensor_from_json(const json& j) {
    return Tensor(j.at("shape").get<std::vector<std::size_t>>(),
                  j.at("values").get<std::vector<double>>());
}

}  // namespace

std::string save_checkpoint_json(const CAEClassifier& m) {
    json j;
    j["schema"] = 1;
    json cfg;
    for (const ConvSpec& s : m.config.encoder_layers) {
        cfg["encoder_layers"].push_back({{"channels", s.channels}, {"width", s.width},
                                         {"stride", s.stride}});
    }
    cfg["pool_window"] = m.config.pool_window;
    cfg["embedding_dim"] = m.config.embedding_dim;
    cfg["alpha_recon"] = m.config.alpha_recon;
    cfg["alpha_ce"] = m.config.alpha_ce;
    cfg["weight_decay"] = m.config.weight_decay;
    cfg["epochs"] = m.config.epochs;
    cfg["batch_size"] = m.config.batch_size;
    cfg["learning_rate"] = m.config.learning_rate;
    cfg["seed"] = m.config.seed;
    j["config"] = cfg;
    j["input_dim"] = m.input_dim;
    j["n_classes"] = m.n_classes;
    j["scaler"] = {{"means", m.scaler.means}, {"std_devs", m.scaler.std_devs}};
    j["target_min"] = m.target_min;
    j["target_max"] = m.target_max;

    json params;
    for (std::size_t i = 0; i < m.enc_w.size(); ++i) {
        params["enc_w" + std::to_string(i)] = tensor_to_json(m.enc_w[i]);
        params["enc_b" + std::to_string(i)] = tensor_to_json(m.enc_b[i]);
        params["dec_w" + std::to_string(i)] = tensor_to_json(m.dec_w[i]);
        params["dec_b" + std::to_string(i)] = tensor_to_json(m.dec_b[i]);
    }
    params["embed_w"] = tensor_to_json(m.embed_w);
    params["embed_b"] = tensor_to_json(m.embed_b);
    params["head_w"] = tensor_to_json(m.head_w);
    params["head_b"] = tensor_to_json(m.head_b);
    params["dec_embed_w"] = tensor_to_json(m.dec_embed_w);
    params["dec_embed_b"] = tensor_to_json(m.dec_embed_b);
    j["params"] = params;

    for (const EpochStats& e : m.history) {
        j["history"].push_back({{"epoch", e.epoch}, {"loss", e.loss},
                                {"loss_r", e.loss_recon}, {"loss_ce", e.loss_ce}});
    }
    return j.dump(2);
}

CAEClassifier load_checkpoint_json(const std::string& text) {
    json j = json::parse(text);
    CAEConfig cfg;
    cfg.encoder_layers.clear();
    for (const auto& s : j.at("config").at("encoder_layers")) {
        cfg.encoder_layers.push_back({s.at("channels").get<std::size_t>(),
                                      s.at("width").get<std::size_t>(),
                                      s.at("stride").get<std::size_t>()});
    }
    const auto& jc = j.at("config");
    cfg.pool_window = jc.at("pool_window").get<std::size_t>();
    cfg.embedding_dim = jc.at("embedding_dim").get<std::size_t>();
    cfg.alpha_recon = jc.at("alpha_recon").get<double>();
    cfg.alpha_ce = jc.at("alpha_ce").get<double>();
    cfg.weight_decay = jc.at("weight_decay").get<double>();
    cfg.epochs = jc.at("epochs").get<std::size_t>();
    cfg.batch_size = jc.at("batch_size").get<std::size_t>();
    cfg.learning_rate = jc.at("learning_rate").get<double>();
    cfg.seed = jc.at("seed").get<std::uint64_t>();

    CAEClassifier m = init_cae(cfg, j.at("input_dim").get<std::size_t>(),
                               j.at("n_classes").get<std::size_t>());
    m.scaler.means = j.at("scaler").at("means").get<std::vector<double>>();
    m.scaler.std_devs = j.at("scaler").at("std_devs").get<std::vector<double>>();
    m.target_min = j.at("target_min").get<std::vector<double>>();
    m.target_max = j.at("target_max").get<std::vector<double>>();

    const json& params = j.at("params");
    for (std::size_t i = 0; i < m.enc_w.size(); ++i) {
        m.enc_w[i] = tensor_from_json(params.at("enc_w" + std::to_string(i)));
        m.enc_b[i] = tensor_from_json(params.at("enc_b" + std::to_string(i)));
        m.dec_w[i] = tensor_from_json(params.at("dec_w" + std::to_string(i)));
        m.dec_b[i] = tensor_from_json(params.at("dec_b" + std::to_string(i)));
    }
    m.embed_w = tensor_from_json(params.at("embed_w"));
    m.embed_b = tensor_from_json(params.at("embed_b"));
    m.head_w = tensor_from_json(params.at("head_w"));
    m.head_b = tensor_from_json(params.at("head_b"));
    m.dec_embed_w = tensor_from_json(params.at("dec_embed_w"));
    m.dec_embed_b = tensor_from_json(params.at("dec_embed_b"));

    if (j.contains("history")) {
        for (const auto& e : j.at("history")) {
            m.history.push_back({e.at("epoch").get<std::size_t>(), e.at("loss").get<double>(),
                                 e.at("loss_r").get<double>(), e.at("loss_ce").get<double>()});
        }
    }
    return m;
}

}  // namespace glassbox

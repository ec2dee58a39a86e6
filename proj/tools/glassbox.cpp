#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "glassbox/attribution.hpp"
#include "glassbox/cae.hpp"
#include "glassbox/config.hpp"
#include "glassbox/dataset.hpp"
#include "glassbox/errors.hpp"
#include "glassbox/metrics.hpp"
#include "glassbox/probe.hpp"
#include "glassbox/report.hpp"
#include "glassbox/rules.hpp"
#include "glassbox/surrogate.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace glassbox;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("ReadFailed", "cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("WriteFailed", "cannot write " + p.string());
    out << text;
}

json load_json(const fs::path& p) {
    try {
        return json::parse(read_file(p));
    } catch (const json::exception& e) {
        throw DataError("JsonParse", p.string() + ": " + e.what());
    }
}

void save_json(const fs::path& p, const json& j) { write_file(p, j.dump(2) + "\n"); }

json dataset_to_json(const Dataset& d) {
    return {{"n_rows", d.n_rows},
            {"n_cols", d.n_cols},
            {"features", d.features},
            {"labels", d.labels},
            {"feature_names", d.feature_names},
            {"class_names", d.class_names}};
}

Dataset dataset_from_json(const json& j) {
    Dataset d;
    d.n_rows = j.at("n_rows").get<std::size_t>();
    d.n_cols = j.at("n_cols").get<std::size_t>();
    d.features = j.at("features").get<std::vector<double>>();
    d.labels = j.at("labels").get<std::vector<std::size_t>>();
    d.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    d.class_names = j.at("class_names").get<std::vector<std::string>>();
    d.validate();
    return d;
}

json tensor_to_json(const Tensor& t) { return {{"shape", t.shape}, {"values", t.values}}; }

Tensor tensor_from_json(const json& j) {
    Tensor t;
    t.shape = j.at("shape").get<std::vector<std::size_t>>();
    t.values = j.at("values").get<std::vector<double>>();
    return t;
}

struct Shared {
    std::string config_path;
    std::string run_dir = "run";
    long seed = -1;       // -1 = keep config value
    long top_k = -1;
    long threads = -1;
    std::string placement;
    std::string surrogate;
};

// resolved config = defaults <- file <- flags
RunConfig resolve_config(const Shared& sh) {
    RunConfig cfg;
    if (!sh.config_path.empty()) cfg.load_file(sh.config_path);
    if (sh.seed >= 0) cfg.set("seed", std::to_string(sh.seed));
    if (sh.top_k >= 0) cfg.set("top_k", std::to_string(sh.top_k));
    if (sh.threads >= 0) cfg.set("threads", std::to_string(sh.threads));
    if (!sh.placement.empty()) cfg.set("placement", sh.placement);
    if (!sh.surrogate.empty()) cfg.set("surrogate", sh.surrogate);
    return cfg;
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void persist_config(const fs::path& dir, const RunConfig& cfg) {
    fs::create_directories(dir);
    json j = {{"hash", hash_hex(cfg.hash())}, {"values", cfg.resolved()}};
    save_json(dir / "config.json", j);
}

CAEConfig cae_config(const RunConfig& cfg) {
    CAEConfig c;
    c.encoder_layers.clear();
    const std::size_t width = static_cast<std::size_t>(cfg.get_int("cae.kernel_width"));
    std::stringstream ss(cfg.get("cae.channels"));
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        c.encoder_layers.push_back({static_cast<std::size_t>(std::stoul(tok)), width, 1});
    }
    c.pool_window = static_cast<std::size_t>(cfg.get_int("cae.pool_window"));
    c.embedding_dim = static_cast<std::size_t>(cfg.get_int("cae.embedding_dim"));
    c.alpha_recon = cfg.get_double("cae.alpha_recon");
    c.alpha_ce = cfg.get_double("cae.alpha_ce");
    c.weight_decay = cfg.get_double("cae.weight_decay");
    c.epochs = static_cast<std::size_t>(cfg.get_int("cae.epochs"));
    c.batch_size = static_cast<std::size_t>(cfg.get_int("cae.batch_size"));
    c.learning_rate = cfg.get_double("cae.learning_rate");
    c.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    return c;
}

struct DataBundle {
    Dataset train, test;
    ScalerParams scaler;
};

DataBundle load_data(const fs::path& dir) {
    json j = load_json(dir / "data.json");
    DataBundle b;
    b.train = dataset_from_json(j.at("train"));
    b.test = dataset_from_json(j.at("test"));
    b.scaler.means = j.at("scaler").at("means").get<std::vector<double>>();
    b.scaler.std_devs = j.at("scaler").at("std_devs").get<std::vector<double>>();
    return b;
}

void save_data(const fs::path& dir, const DataBundle& b, const json& extra = json::object()) {
    json j = {{"train", dataset_to_json(b.train)},
              {"test", dataset_to_json(b.test)},
              {"scaler", {{"means", b.scaler.means}, {"std_devs", b.scaler.std_devs}}}};
    for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
    save_json(dir / "data.json", j);
}

CAEClassifier load_model(const fs::path& dir) {
    return load_checkpoint_json(read_file(dir / "checkpoint.json"));
}

FeatureRanking load_ranking(const fs::path& dir) {
    json j = load_json(dir / "ranking.json");
    FeatureRanking r;
    r.scores = j.at("scores").get<std::vector<double>>();
    r.order = j.at("order").get<std::vector<std::size_t>>();
    r.k_cut = j.at("k_cut").get<std::size_t>();
    r.method = j.at("method").get<std::string>();
    return r;
}

SurrogateKind kind_of(const std::string& s) {
    if (s == "dt") return SurrogateKind::DT;
    if (s == "rf") return SurrogateKind::RF;
    if (s == "ert") return SurrogateKind::ERT;
    throw UsageError("InvalidConfig", "surrogate must be dt|rf|ert, got: " + s);
}

std::string kind_name(SurrogateKind k) {
    switch (k) {
        case SurrogateKind::DT: return "dt";
        case SurrogateKind::RF: return "rf";
        default: return "ert";
    }
}

void print_metrics_table(const std::string& title, const Metrics& m) {
    std::printf("%s\n", title.c_str());
    std::printf("  %-16s %10s\n", "metric", "value");
    std::printf("  %-16s %10.4f\n", "accuracy", m.accuracy);
    std::printf("  %-16s %10.4f\n", "macro_precision", m.macro_precision);
    std::printf("  %-16s %10.4f\n", "macro_recall", m.macro_recall);
    std::printf("  %-16s %10.4f\n", "macro_f1", m.macro_f1);
    std::printf("  %-16s %10.4f\n", "mcc", m.mcc);
}

json metrics_to_json(const Metrics& m) {
    return {{"accuracy", m.accuracy},
            {"macro_precision", m.macro_precision},
            {"macro_recall", m.macro_recall},
            {"macro_f1", m.macro_f1},
            {"mcc", m.mcc}};
}

Dataset reduce_columns(const Dataset& d, const std::vector<std::size_t>& cols) {
    Dataset r;
    r.n_rows = d.n_rows;
    r.n_cols = cols.size();
    r.features.resize(r.n_rows * r.n_cols);
    for (std::size_t i = 0; i < d.n_rows; ++i) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
            r.features[i * r.n_cols + c] = d.at(i, cols[c]);
        }
    }
    r.labels = d.labels;
    for (std::size_t c : cols) r.feature_names.push_back(d.feature_names[c]);
    r.class_names = d.class_names;
    return r;
}

struct SurrogateStage {
    SurrogateModel model;
    Dataset train_reduced, test_reduced;
    std::vector<std::size_t> selected;
    std::vector<std::size_t> bb_train_pred, bb_test_pred;
    json meta;
};

std::vector<std::size_t> selected_columns(const FeatureRanking& ranking) {
    std::vector<std::size_t> sel(ranking.order.begin(),
                                 ranking.order.begin() +
                                     static_cast<std::ptrdiff_t>(ranking.k_cut));
    std::sort(sel.begin(), sel.end());
    return sel;
}

SurrogateStage load_surrogate_stage(const fs::path& dir, const std::string& kind) {
    SurrogateStage st;
    st.meta = load_json(dir / ("surrogate_" + kind + ".json"));
    st.model = surrogate_from_json(st.meta.at("model").dump());
    DataBundle data = load_data(dir);
    st.selected = st.meta.at("selected_features").get<std::vector<std::size_t>>();
    st.train_reduced = reduce_columns(data.train, st.selected);
    st.test_reduced = reduce_columns(data.test, st.selected);
    st.bb_train_pred = st.meta.at("blackbox_train_pred").get<std::vector<std::size_t>>();
    st.bb_test_pred = st.meta.at("blackbox_test_pred").get<std::vector<std::size_t>>();
    return st;
}

// Black-box over the reduced space: absent features held at the train mean
// (zero after standardization).
PredictDistFn reduced_blackbox_fn(const CAEClassifier& model,
                                  const std::vector<std::size_t>& selected) {
    return [&model, selected](std::span<const double> x) {
        Tensor row = Tensor::zeros({1, model.input_dim});
        for (std::size_t i = 0; i < selected.size(); ++i) row.values[selected[i]] = x[i];
        Tensor p = predict_proba_rows(model, row);
        return std::vector<double>(p.values.begin(), p.values.end());
    };
}

json counterfactual_to_json(const Counterfactual& cf) {
    return {{"changed_features", cf.changed_features},
            {"new_values", cf.new_values},
            {"x_prime", cf.x_prime},
            {"original_class", cf.original_class},
            {"new_class", cf.new_class},
            {"l1_cost", cf.l1_cost},
            {"blackbox_agrees", cf.blackbox_agrees}};
}

json explanation_to_json(const LocalExplanation& e) {
    json cfs = json::array();
    for (const auto& cf : e.counterfactuals) cfs.push_back(counterfactual_to_json(cf));
    json wi = json::array();
    for (const auto& w : e.whatif) {
        wi.push_back({{"feature", w.feature},
                      {"new_dist", w.new_dist},
                      {"new_class", w.new_class},
                      {"flipped", w.flipped}});
    }
    return {{"instance_id", e.instance_id},
            {"predicted_class", e.predicted_class},
            {"predicted_prob", e.predicted_prob},
            {"phi", e.phi},
            {"phi_base", e.phi_base},
            {"matched_rule", e.matched_rule},
            {"counterfactuals", cfs},
            {"whatif", wi}};
}

std::string now_iso8601() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::vector<double> column_stds(const Dataset& d) {
    std::vector<double> s(d.n_cols, 0.0), mean(d.n_cols, 0.0);
    for (std::size_t i = 0; i < d.n_rows; ++i) {
        for (std::size_t c = 0; c < d.n_cols; ++c) mean[c] += d.at(i, c);
    }
    for (double& m : mean) m /= static_cast<double>(d.n_rows);
    for (std::size_t i = 0; i < d.n_rows; ++i) {
        for (std::size_t c = 0; c < d.n_cols; ++c) {
            const double dv = d.at(i, c) - mean[c];
            s[c] += dv * dv;
        }
    }
    for (double& v : s) v = std::sqrt(v / static_cast<double>(d.n_rows));
    return s;
}

// ---- stage implementations ----

void cmd_ingest(const Shared& sh, const std::string& input, const std::string& label,
                const std::string& delim) {
    RunConfig cfg = resolve_config(sh);
    const fs::path dir = sh.run_dir;
    persist_config(dir, cfg);
    Dataset raw = load_csv(input, label, delim.empty() ? ',' : delim[0]);
    auto [std_data, scaler] = standardize(raw);
    auto [train, test] =
        split(std_data, cfg.get_double("test_fraction"),
              static_cast<std::uint64_t>(cfg.get_int("seed")));
    DataBundle b{std::move(train), std::move(test), std::move(scaler)};
    save_data(dir, b, {{"source", input}});
    std::printf("ingested %zu rows, %zu features, %zu classes (train %zu / test %zu)\n",
                raw.n_rows, raw.n_cols, raw.n_classes(), b.train.n_rows, b.test.n_rows);
}

void cmd_synth(const Shared& sh) {
    RunConfig cfg = resolve_config(sh);
    const fs::path dir = sh.run_dir;
    persist_config(dir, cfg);
    SynthDataset s = synth_highdim(
        static_cast<std::size_t>(cfg.get_int("synth.rows")),
        static_cast<std::size_t>(cfg.get_int("synth.cols")),
        static_cast<std::size_t>(cfg.get_int("synth.informative")),
        static_cast<std::size_t>(cfg.get_int("synth.classes")),
        cfg.get_double("synth.noise_sigma"), static_cast<std::uint64_t>(cfg.get_int("seed")));
    auto [std_data, scaler] = standardize(s.data);
    auto [train, test] =
        split(std_data, cfg.get_double("test_fraction"),
              static_cast<std::uint64_t>(cfg.get_int("seed")));
    DataBundle b{std::move(train), std::move(test), std::move(scaler)};
    save_data(dir, b, {{"source", "synth"}, {"informative", s.informative}});
    std::printf("synthesized %zu rows, %zu features (%zu informative), %zu classes\n",
                s.data.n_rows, s.data.n_cols, s.informative.size(), s.data.n_classes());
}

void cmd_train_blackbox(const Shared& sh) {
    RunConfig cfg = resolve_config(sh);
    const fs::path dir = sh.run_dir;
    persist_config(dir, cfg);
    DataBundle b = load_data(dir);
    CAEClassifier model = train_cae(b.train, cae_config(cfg), b.scaler);
    write_file(dir / "checkpoint.json", save_checkpoint_json(model));
    Metrics train_m = compute_metrics(predict_class(model, b.train), b.train.labels,
                                      b.train.n_classes());
    Metrics test_m =
        compute_metrics(predict_class(model, b.test), b.test.labels, b.test.n_classes());
    save_json(dir / "blackbox_metrics.json",
              {{"train", metrics_to_json(train_m)}, {"test", metrics_to_json(test_m)}});
    print_metrics_table("black-box train", train_m);
    print_metrics_table("black-box test", test_m);
}

void cmd_probe(const Shared& sh) {
    RunConfig cfg = resolve_config(sh);
    const fs::path dir = sh.run_dir;
    persist_config(dir, cfg);
    DataBundle b = load_data(dir);
    CAEClassifier model = load_model(dir);
    const std::string placement_s = cfg.get("placement");
    AttentionProbe::Placement placement;
    if (placement_s == "input") {
        placement = AttentionProbe::Placement::Input;
    } else if (placement_s == "embedding") {
        placement = AttentionProbe::Placement::Embedding;
    } else {
        throw UsageError("InvalidConfig", "placement must be input|embedding");
    }
    ProbeTrainConfig pc;
    pc.n_heads = static_cast<std::size_t>(cfg.get_int("probe.heads"));
    pc.epochs = static_cast<std::size_t>(cfg.get_int("probe.epochs"));
    pc.hidden = static_cast<std::size_t>(cfg.get_int("probe.hidden"));
    pc.learning_rate = cfg.get_double("probe.learning_rate");
    pc.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    AttentionProbe probe = train_probe(model, b.train, placement, pc);

    const std::size_t k_cut =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.get_int("top_k")),
                              b.train.n_cols);
    FeatureRanking ranking;
    if (placement == AttentionProbe::Placement::Input) {
        ranking = input_ranking(probe, k_cut);
    } else {
        const std::size_t n_sample = std::min<std::size_t>(256, b.train.n_rows);
        Tensor sample = Tensor::zeros({n_sample, b.train.n_cols});
        sample.values.assign(b.train.features.begin(),
                             b.train.features.begin() +
                                 static_cast<std::ptrdiff_t>(n_sample * b.train.n_cols));
        ranking = input_attribution(model, probe, sample, k_cut);
    }

    json pj = {{"placement", placement_s},
               {"dim", probe.dim},
               {"n_heads", probe.n_heads},
               {"relevance", extract_relevance(probe)},
               {"l1_w", tensor_to_json(probe.l1_w)},
               {"l1_b", tensor_to_json(probe.l1_b)},
               {"l2_w", tensor_to_json(probe.l2_w)},
               {"l2_b", tensor_to_json(probe.l2_b)}};
    pj["att_w"] = json::array();
    pj["att_b"] = json::array();
    for (std::size_t h = 0; h < probe.n_heads; ++h) {
        pj["att_w"].push_back(tensor_to_json(probe.att_w[h]));
        pj["att_b"].push_back(tensor_to_json(probe.att_b[h]));
    }
    save_json(dir / "probe.json", pj);
    save_json(dir / "ranking.json", {{"scores", ranking.scores},
                                     {"order", ranking.order},
                                     {"k_cut", ranking.k_cut},
                                     {"method", ranking.method}});
    std::printf("ranking method %s, top-%zu of %zu features\n", ranking.method.c_str(),
                ranking.k_cut, ranking.scores.size());
    for (std::size_t i = 0; i < std::min<std::size_t>(10, ranking.k_cut); ++i) {
        const std::size_t f = ranking.order[i];
        std::printf("  %2zu. %-12s %.6f\n", i + 1, b.train.feature_names[f].c_str(),
                    ranking.scores[f]);
    }
}

void cmd_sensitivity(const Shared& sh) {
    RunConfig cfg = resolve_config(sh);
    const fs::path dir = sh.run_dir;
    persist_config(dir, cfg);
    DataBundle b = load_data(dir);
    CAEClassifier model = load_model(dir);
    FeatureRanking ranking = load_ranking(dir);
    const std::string scheme_s = cfg.get("sensitivity.scheme");
    PerturbScheme scheme;
    if (scheme_s == "gaussian") {
        scheme = PerturbScheme::GaussianNoise;
    } else if (scheme_s == "permute") {
        scheme = PerturbScheme::Permute;
    } else {
        throw UsageError("InvalidConfig", "sensitivity.scheme must be gaussian|permute");
    }
    SensitivityReport rep = validate_topk(
        model, b.train, ranking, cfg.get_double("sensitivity.weight"), scheme,
        static_cast<std::uint64_t>(cfg.get_int("seed")),
        static_cast<std::size_t>(cfg.get_int("threads")));
    json entries = json::array();
    for (const auto& e : rep.entries) {
        entries.push_back(
            {{"feature", e.feature}, {"s_value", e.s_value}, {"top2_shift", e.top2_shift}});
    }
    save_json(dir / "sensitivity.json",
              {{"entries", entries}, {"w", rep.w}, {"scheme", rep.scheme}});
    std::printf("  %-12s %12s %12s\n", "feature", "S", "top2_shift");
    for (const auto& e : rep.entries) {
        std::printf("  %-12s %12.6f %12.6f\n", b.train.feature_names[e.feature].c_str(),
                    e.s_value, e.top2_shift);
    }
}

void cmd_surrogate(const Shared& sh) {
    RunConfig cfg = resolve_config(sh);
    const fs::path dir = sh.run_dir;
    persist_config(dir, cfg);
    DataBundle b = load_data(dir);
    CAEClassifier model = load_model(dir);
    FeatureRanking ranking = load_ranking(dir);
    const SurrogateKind kind = kind_of(cfg.get("surrogate"));
    const std::size_t threads = static_cast<std::size_t>(cfg.get_int("threads"));
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed"));

    std::vector<std::size_t> sel = selected_columns(ranking);
    Dataset train_r = reduce_columns(b.train, sel);
    Dataset test_r = reduce_columns(b.test, sel);

    // default targets are the ground-truth labels; black-box labels optional
    std::vector<std::size_t> bb_train = predict_class(model, b.train);
    std::vector<std::size_t> bb_test = predict_class(model, b.test);
    Tensor bb_train_proba = predict_proba(model, b.train);
    Dataset fit_data = train_r;
    if (cfg.get("surrogate.targets") == "blackbox") fit_data.labels = bb_train;

    TreeParams tp;
    tp.max_depth = static_cast<std::size_t>(cfg.get_int("forest.max_depth"));
    tp.min_leaf = static_cast<std::size_t>(cfg.get_int("forest.min_leaf"));
    SurrogateModel m;
    if (kind == SurrogateKind::DT) {
        m = fit_dt(fit_data, tp, seed);
    } else {
        ForestParams fp;
        fp.n_trees = static_cast<std::size_t>(cfg.get_int("forest.n_trees"));
        fp.tree = tp;
        m = fit_forest(fit_data, fp, kind, seed, threads);
    }

    // fidelity sequences: class indices cast to floats (default) or the
    // probability assigned to the black-box predicted class
    const std::size_t C = b.train.n_classes();
    const bool proba_targets = cfg.get("fidelity.targets") == "proba";
    std::vector<double> bb_seq(train_r.n_rows), sur_seq(train_r.n_rows);
    for (std::size_t i = 0; i < train_r.n_rows; ++i) {
        if (proba_targets) {
            bb_seq[i] = bb_train_proba.values[i * C + bb_train[i]];
            sur_seq[i] = predict_dist(m, train_r.row(i))[bb_train[i]];
        } else {
            bb_seq[i] = static_cast<double>(bb_train[i]);
            sur_seq[i] = static_cast<double>(predict(m, train_r.row(i)));
        }
    }
    FidelityScore fid = r_squared(sur_seq, bb_seq);
    Metrics agree_train = compute_metrics(predict_all(m, train_r), bb_train, C);
    Metrics agree_test = compute_metrics(predict_all(m, test_r), bb_test, C);
    Metrics vs_labels = compute_metrics(predict_all(m, test_r), test_r.labels, C);

    json j = {{"kind", kind_name(kind)},
              {"model", json::parse(surrogate_to_json(m))},
              {"selected_features", sel},
              {"rank_order",
               std::vector<std::size_t>(ranking.order.begin(),
                                        ranking.order.begin() +
                                            static_cast<std::ptrdiff_t>(ranking.k_cut))},
              {"blackbox_train_pred", bb_train},
              {"blackbox_test_pred", bb_test},
              {"fidelity",
               {{"r_squared", fid.r_squared},
                {"sse_surrogate", fid.sse_surrogate},
                {"sse_blackbox", fid.sse_blackbox},
                {"threshold", fid.threshold},
                {"replace", fid.replace}}},
              {"agreement_train", metrics_to_json(agree_train)},
              {"agreement_test", metrics_to_json(agree_test)},
              {"test_vs_labels", metrics_to_json(vs_labels)},
              {"mdi", mdi_importance(m)}};
    save_json(dir / ("surrogate_" + kind_name(kind) + ".json"), j);
    std::printf("%s surrogate: R^2 = %.4f (%s), train agreement %.4f, test agreement %.4f\n",
                kind_name(kind).c_str(), fid.r_squared,
                fid.replace ? "replace" : "keep black-box", agree_train.accuracy,
                agree_test.accuracy);
}

void cmd_importance(const Shared& sh) {
    RunConfig cfg = resolve_config(sh);
    const fs::path dir = sh.run_dir;
    persist_config(dir, cfg);
    const std::size_t threads = static_cast<std::size_t>(cfg.get_int("threads"));
    const std::uint64_t seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
    const std::string kind = cfg.get("surrogate");
    SurrogateStage st = load_surrogate_stage(dir, kind);

    Tensor background = sample_background(
        st.train_reduced, static_cast<std::size_t>(cfg.get_int("shap.background")), seed);
    PredictDistFn fn = surrogate_predict_fn(st.model);
    // global Shapley on a test slice keeps the stage inside desk-scale budgets
    const std::size_t n_eval = std::min<std::size_t>(64, st.test_reduced.n_rows);
    Dataset eval = st.test_reduced;
    eval.n_rows = n_eval;
    eval.features.resize(n_eval * eval.n_cols);
    eval.labels.resize(n_eval);
    GlobalAttribution shap = global_shap(fn, eval, background, threads);
    PfiResult pfi = permutation_importance(fn, st.test_reduced, PfiMetric::Accuracy, 5, seed);

    json j = {{"kind", kind},
              {"selected_features", st.selected},
              {"mdi", mdi_importance(st.model)},
              {"shap_gfi", shap.gfi},
              {"shap_mean_phi", shap.mean_phi},
              {"shap_method", shap.method},
              {"pfi_scores", pfi.scores},
              {"pfi_stddev", pfi.stddev},
              {"pfi_baseline", pfi.baseline}};

    // stack all fitted surrogates when available
    std::vector<SurrogateModel> loaded;
    std::vector<std::string> stacked_kinds;
    for (const std::string& k : {"dt", "rf", "ert"}) {
        if (fs::exists(dir / ("surrogate_" + k + ".json"))) {
            loaded.push_back(load_surrogate_stage(dir, k).model);
            stacked_kinds.push_back(k);
        }
    }
    if (loaded.size() > 1) {
        std::vector<const SurrogateModel*> ptrs;
        for (const auto& m : loaded) ptrs.push_back(&m);
        GlobalAttribution stacked = stacked_shap(ptrs, eval, background, threads);
        j["stacked_gfi"] = stacked.gfi;
        j["stacked_kinds"] = stacked_kinds;
    }
    save_json(dir / "importance.json", j);
    std::printf("  %-12s %10s %10s %10s\n", "feature", "mdi", "shap_gfi", "pfi");
    const auto mdi = j["mdi"].get<std::vector<double>>();
    for (std::size_t i = 0; i < st.selected.size(); ++i) {
        std::printf("  %-12s %10.6f %10.6f %10.6f\n",
                    st.train_reduced.feature_names[i].c_str(), mdi[i], shap.gfi[i],
                    pfi.scores[i]);
    }
}

void cmd_rules(const Shared& sh) {
    RunConfig cfg = resolve_config(sh);
    const fs::path dir = sh.run_dir;
    persist_config(dir, cfg);
    const std::string kind = cfg.get("surrogate");
    SurrogateStage st = load_surrogate_stage(dir, kind);

    RuleThresholds th;
    th.min_support = cfg.get_double("rules.min_support");
    th.min_confidence = cfg.get_double("rules.min_confidence");

    Dataset scored = st.train_reduced;
    scored.labels = st.bb_train_pred;
    std::vector<Rule> pool;
    for (std::size_t t = 0; t < st.model.trees.size(); ++t) {
        std::vector<Rule> tr = extract_rules(*st.model.trees[t], t);
        for (Rule& r : tr) {
            if (r.antecedent.size() >
                static_cast<std::size_t>(cfg.get_int("rules.max_conditions"))) {
                continue;
            }
            pool.push_back(score_rule(std::move(r), scored));
        }
    }
    DecisionList list = assemble_decision_list(pool, scored, th);
    const double fid_train = list_fidelity(list, st.bb_train_pred, st.train_reduced);
    const double fid_test = list_fidelity(list, st.bb_test_pred, st.test_reduced);
    const double conf = list_confidence(list, scored);

    json rules_j = json::array();
    std::string txt;
    for (const Rule& r : list.rules) {
        json cj = json::array();
        for (const Condition& c : r.antecedent) {
            // unbounded sides are stored as null; JSON has no infinity
            json lo = std::isfinite(c.lower) ? json(c.lower) : json();
            json hi = std::isfinite(c.upper) ? json(c.upper) : json();
            cj.push_back({{"feature", c.feature}, {"lower", lo}, {"upper", hi}});
        }
        rules_j.push_back({{"antecedent", cj},
                           {"consequent", r.consequent},
                           {"support", r.support},
                           {"confidence", r.confidence},
                           {"coverage", r.coverage},
                           {"tree_id", r.tree_id},
                           {"leaf_id", r.leaf_id}});
        txt += rule_to_text(r, st.train_reduced.feature_names,
                            st.train_reduced.class_names) +
               "\n";
    }
    txt += "ELSE class=" + st.train_reduced.class_names[list.default_class] + "\n";
    json j = {{"kind", kind},
              {"rules", rules_j},
              {"default_class", list.default_class},
              {"degenerate", list.degenerate},
              {"thresholds",
               {{"min_support", th.min_support},
                {"min_confidence", th.min_confidence},
                {"min_coverage", th.min_coverage}}},
              {"fidelity_train", fid_train},
              {"fidelity_test", fid_test},
              {"confidence", conf}};
    save_json(dir / "rules.json", j);
    write_file(dir / "rules.txt", txt);
    std::printf("%zu rules, fidelity train %.4f / test %.4f, confidence %.4f\n",
                list.rules.size(), fid_train, fid_test, conf);
}

DecisionList load_list(const fs::path& dir) {
    json j = load_json(dir / "rules.json");
    DecisionList list;
    for (const json& rj : j.at("rules")) {
        Rule r;
        for (const json& cj : rj.at("antecedent")) {
            const json& lo = cj.at("lower");
            const json& hi = cj.at("upper");
            r.antecedent.push_back(
                {cj.at("feature").get<std::size_t>(),
                 lo.is_null() ? -std::numeric_limits<double>::infinity() : lo.get<double>(),
                 hi.is_null() ? std::numeric_limits<double>::infinity() : hi.get<double>()});
        }
        r.consequent = rj.at("consequent").get<std::vector<double>>();
        r.support = rj.at("support").get<double>();
        r.confidence = rj.at("confidence").get<double>();
        r.coverage = rj.at("coverage").get<std::size_t>();
        r.tree_id = rj.at("tree_id").get<std::size_t>();
        r.leaf_id = rj.at("leaf_id").get<std::size_t>();
        list.rules.push_back(std::move(r));
    }
    list.default_class = j.at("default_class").get<std::size_t>();
    list.degenerate = j.at("degenerate").get<bool>();
    return list;
}

ExplainContext make_context(const fs::path& dir, const RunConfig& cfg,
                            const SurrogateStage& st, const DecisionList& list,
                            Tensor& background_storage, const CAEClassifier* model) {
    background_storage = sample_background(
        st.train_reduced, static_cast<std::size_t>(cfg.get_int("shap.background")),
        static_cast<std::uint64_t>(cfg.get_int("seed")));
    ExplainContext ctx;
    ctx.surrogate = &st.model;
    ctx.list = &list;
    ctx.background = &background_storage;
    ctx.feature_scale = column_stds(st.train_reduced);
    if (model) ctx.blackbox = reduced_blackbox_fn(*model, st.selected);
    ctx.cf_params.max_changes = static_cast<std::size_t>(cfg.get_int("cf.max_changes"));
    ctx.cf_params.quantile_candidates =
        static_cast<std::size_t>(cfg.get_int("cf.quantile_candidates"));
    ctx.cf_params.max_results = static_cast<std::size_t>(cfg.get_int("cf.max_results"));
    return ctx;
}

void cmd_explain(const Shared& sh, long instance) {
    RunConfig cfg = resolve_config(sh);
    const fs::path dir = sh.run_dir;
    persist_config(dir, cfg);
    SurrogateStage st = load_surrogate_stage(dir, cfg.get("surrogate"));
    DecisionList list = load_list(dir);
    CAEClassifier model = load_model(dir);
    Tensor background;
    ExplainContext ctx = make_context(dir, cfg, st, list, background, &model);

    std::vector<std::size_t> ids;
    if (instance >= 0) {
        if (static_cast<std::size_t>(instance) >= st.test_reduced.n_rows) {
            throw UsageError("InvalidInstance", "instance index out of range");
        }
        ids.push_back(static_cast<std::size_t>(instance));
    } else {
        const std::size_t n =
            std::min<std::size_t>(static_cast<std::size_t>(cfg.get_int("explain.instances")),
                                  st.test_reduced.n_rows);
        for (std::size_t i = 0; i < n; ++i) ids.push_back(i);
    }
    json out = json::array();
    for (std::size_t id : ids) {
        LocalExplanation e = explain_instance(ctx, st.test_reduced.row(id), id);
        out.push_back(explanation_to_json(e));
        std::printf("instance %zu: class %s (p=%.4f), rule %d, %zu counterfactual(s)\n", id,
                    st.test_reduced.class_names[e.predicted_class].c_str(), e.predicted_prob,
                    e.matched_rule, e.counterfactuals.size());
    }
    save_json(dir / "explanations.json", {{"explanations", out}});
}

void cmd_whatif(const Shared& sh, long instance, long feature) {
    RunConfig cfg = resolve_config(sh);
    const fs::path dir = sh.run_dir;
    SurrogateStage st = load_surrogate_stage(dir, cfg.get("surrogate"));
    if (instance < 0 || static_cast<std::size_t>(instance) >= st.test_reduced.n_rows) {
        throw UsageError("InvalidInstance", "--instance required and in range");
    }
    Tensor background = sample_background(
        st.train_reduced, static_cast<std::size_t>(cfg.get_int("shap.background")),
        static_cast<std::uint64_t>(cfg.get_int("seed")));
    PredictDistFn fn = surrogate_predict_fn(st.model);
    std::span<const double> x = st.test_reduced.row(static_cast<std::size_t>(instance));
    std::vector<long> feats;
    if (feature >= 0) {
        feats.push_back(feature);
    } else {
        for (std::size_t f = 0; f < st.test_reduced.n_cols; ++f) {
            feats.push_back(static_cast<long>(f));
        }
    }
    std::printf("  %-12s %-10s %s\n", "feature", "new_class", "flipped");
    for (long f : feats) {
        WhatIfEntry e = whatif_remove_feature(fn, x, static_cast<std::size_t>(f), background);
        std::printf("  %-12s %-10s %s\n",
                    st.test_reduced.feature_names[e.feature].c_str(),
                    st.test_reduced.class_names[e.new_class].c_str(),
                    e.flipped ? "yes" : "no");
    }
}

void cmd_report(const Shared& sh) {
    RunConfig cfg = resolve_config(sh);
    const fs::path dir = sh.run_dir;
    persist_config(dir, cfg);
    Report rep;
    // the embedded config drops "threads": the report must be byte-identical
    // across worker counts, matching the unhashed key in RunConfig::hash()
    std::map<std::string, std::string> embedded = cfg.resolved();
    embedded.erase("threads");
    rep.body["run"] = {{"seed", cfg.get_int("seed")},
                       {"config_hash", hash_hex(cfg.hash())},
                       {"config", embedded},
                       {"started_at", now_iso8601()},
                       {"finished_at", now_iso8601()}};
    if (fs::exists(dir / "blackbox_metrics.json")) {
        rep.body["blackbox"] = load_json(dir / "blackbox_metrics.json");
    }
    if (fs::exists(dir / "ranking.json")) {
        rep.body["ranking"] = load_json(dir / "ranking.json");
    }
    if (fs::exists(dir / "sensitivity.json")) {
        rep.body["sensitivity"] = load_json(dir / "sensitivity.json");
    }
    rep.body["surrogates"] = json::object();
    for (const std::string& k : {"dt", "rf", "ert"}) {
        const fs::path p = dir / ("surrogate_" + k + ".json");
        if (!fs::exists(p)) continue;
        json j = load_json(p);
        j.erase("model");  // weights live in their own artifact
        j.erase("blackbox_train_pred");
        j.erase("blackbox_test_pred");
        rep.body["surrogates"][k] = j;
    }
    if (fs::exists(dir / "importance.json")) {
        rep.body["importance"] = load_json(dir / "importance.json");
    }
    if (fs::exists(dir / "rules.json")) {
        rep.body["rules"] = load_json(dir / "rules.json");
    }
    if (fs::exists(dir / "explanations.json")) {
        rep.body["explanations"] = load_json(dir / "explanations.json")["explanations"];
    }
    rep.validate();
    rep.save((dir / "report.json").string());
    if (rep.body.contains("blackbox")) {
        const json& m = rep.body["blackbox"]["test"];
        Metrics mm;
        mm.accuracy = m["accuracy"];
        mm.macro_precision = m["macro_precision"];
        mm.macro_recall = m["macro_recall"];
        mm.macro_f1 = m["macro_f1"];
        mm.mcc = m["mcc"];
        print_metrics_table("black-box test", mm);
    }
    std::printf("report written to %s\n", (dir / "report.json").string().c_str());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"black-box decomposition toolkit"};
    app.require_subcommand(1);
    Shared sh;
    std::string input, label = "label", delim = ",";
    long instance = -1, feature = -1;

    auto add_shared = [&](CLI::App* c) {
        c->add_option("--config", sh.config_path, "key=value config file");
        c->add_option("--run-dir", sh.run_dir, "run artifact directory");
        c->add_option("--seed", sh.seed, "global seed");
        c->add_option("--top-k", sh.top_k, "ranking cut");
        c->add_option("--threads", sh.threads, "worker threads");
        c->add_option("--placement", sh.placement, "probe placement: input|embedding");
        c->add_option("--surrogate", sh.surrogate, "surrogate kind: dt|rf|ert");
        return c;
    };

    CLI::App* ingest = add_shared(app.add_subcommand("ingest", "load and standardize a CSV"));
    ingest->add_option("--input", input, "CSV path")->required();
    ingest->add_option("--label", label, "label column name");
    ingest->add_option("--delimiter", delim, "field delimiter");
    CLI::App* synth = add_shared(app.add_subcommand("synth", "generate synthetic data"));
    CLI::App* trainbb =
        add_shared(app.add_subcommand("train-blackbox", "train the CAE classifier"));
    CLI::App* probe = add_shared(app.add_subcommand("probe", "attention probe + ranking"));
    CLI::App* sens = add_shared(app.add_subcommand("sensitivity", "perturbation validation"));
    CLI::App* surr = add_shared(app.add_subcommand("surrogate", "fit a surrogate model"));
    CLI::App* imp = add_shared(app.add_subcommand("importance", "global attributions"));
    CLI::App* rules = add_shared(app.add_subcommand("rules", "extract a decision list"));
    CLI::App* explain = add_shared(app.add_subcommand("explain", "local explanations"));
    explain->add_option("--instance", instance, "test-set row index");
    CLI::App* whatif = add_shared(app.add_subcommand("whatif", "feature-removal what-if"));
    whatif->add_option("--instance", instance, "test-set row index")->required();
    whatif->add_option("--feature", feature, "reduced-space feature index");
    CLI::App* report = add_shared(app.add_subcommand("report", "assemble report.json"));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (ingest->parsed()) cmd_ingest(sh, input, label, delim);
        if (synth->parsed()) cmd_synth(sh);
        if (trainbb->parsed()) cmd_train_blackbox(sh);
        if (probe->parsed()) cmd_probe(sh);
        if (sens->parsed()) cmd_sensitivity(sh);
        if (surr->parsed()) cmd_surrogate(sh);
        if (imp->parsed()) cmd_importance(sh);
        if (rules->parsed()) cmd_rules(sh);
        if (explain->parsed()) cmd_explain(sh, instance);
        if (whatif->parsed()) cmd_whatif(sh, instance, feature);
        if (report->parsed()) cmd_report(sh);
    } catch (const UsageError& e) {
        std::cerr << "error [" << e.code() << "] " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "error [" << e.code() << "] " << e.what() << "\n";
        return 3;
    } catch (const DataError& e) {
        std::cerr << "error [" << e.code() << "] " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error [" << e.code() << "] " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error [Internal] " << e.what() << "\n";
        return 3;
    }
    return 0;
}

// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Pipeline criteria shell out to the CLI binary; the rest exercise
// the library directly against independent oracles.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "glassbox/attribution.hpp"
#include "glassbox/cae.hpp"
#include "glassbox/config.hpp"
#include "glassbox/dataset.hpp"
#include "glassbox/errors.hpp"
#include "glassbox/probe.hpp"
#include "glassbox/report.hpp"
#include "glassbox/rules.hpp"
#include "glassbox/surrogate.hpp"
#include "glassbox/tape.hpp"
#include "gradcheck.hpp"
#include "json.hpp"

using namespace glassbox;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

#ifndef GLASSBOX_BIN
#error "GLASSBOX_BIN must point at the CLI executable"
#endif

const std::string kBin = GLASSBOX_BIN;
const std::string kRoot = "/tmp/glassbox_acceptance";

struct Checker {
    bool ok = true;
    std::string first_failure;
    void expect(bool cond, const std::string& what) {
        if (!cond && ok) {
            ok = false;
            first_failure = what;
        }
    }
};

int run_cli(const std::string& args) {
    const int status = std::system((kBin + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("ReadFailed", "cannot read " + path);
    return json::parse(in);
}

Dataset dataset_from_json(const json& j) {
    Dataset d;
    d.n_rows = j.at("n_rows").get<std::size_t>();
    d.n_cols = j.at("n_cols").get<std::size_t>();
    d.features = j.at("features").get<std::vector<double>>();
    d.labels = j.at("labels").get<std::vector<std::size_t>>();
    d.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    d.class_names = j.at("class_names").get<std::vector<std::string>>();
    return d;
}

Dataset reduce_columns(const Dataset& d, const std::vector<std::size_t>& cols) {
    Dataset out;
    out.n_rows = d.n_rows;
    out.n_cols = cols.size();
    out.labels = d.labels;
    out.class_names = d.class_names;
    for (std::size_t c : cols) out.feature_names.push_back(d.feature_names[c]);
    out.features.reserve(d.n_rows * cols.size());
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        for (std::size_t c : cols) out.features.push_back(d.at(r, c));
    }
    return out;
}

DecisionList list_from_json(const json& j) {
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
        list.rules.push_back(std::move(r));
    }
    list.default_class = j.at("default_class").get<std::size_t>();
    return list;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

// ---------------------------------------------------------------------------
// criterion 1: gradients of every primitive and of the full joint loss
// ---------------------------------------------------------------------------

struct OpCase {
    std::vector<std::vector<std::size_t>> shapes;
    std::function<Var(GradTape&, const std::vector<Var>&)> build;
};

double check_case(const OpCase& oc, std::uint64_t seed) {
    std::vector<std::size_t> sizes;
    std::size_t total = 0;
    for (const auto& s : oc.shapes) {
        sizes.push_back(shape_product(s));
        total += sizes.back();
    }
    const std::vector<double> x0 = gbtest::random_values(total, seed);
    auto eval = [&](const std::vector<double>& flat, std::vector<double>* grad_out) {
        GradTape tape;
        std::vector<Var> inputs;
        std::size_t off = 0;
        for (std::size_t i = 0; i < oc.shapes.size(); ++i) {
            Tensor t{oc.shapes[i],
                     std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(off),
                                         flat.begin() +
                                             static_cast<std::ptrdiff_t>(off + sizes[i]))};
            inputs.push_back(tape.leaf(std::move(t)));
            off += sizes[i];
        }
        Var out = oc.build(tape, inputs);
        if (grad_out) {
            tape.backward(out);
            grad_out->clear();
            for (Var v : inputs) {
                const Tensor& g = tape.grad(v);
                grad_out->insert(grad_out->end(), g.values.begin(), g.values.end());
            }
        }
        return tape.value(out).values[0];
    };
    std::vector<double> analytic;
    eval(x0, &analytic);
    return gbtest::max_rel_error([&](const std::vector<double>& v) { return eval(v, nullptr); },
                                 x0, analytic);
}

Var to_scalar(GradTape& tape, Var v, std::uint64_t seed) {
    const Tensor& t = tape.value(v);
    Tensor w{t.shape, gbtest::random_values(t.size(), seed ^ 0xabcdULL)};
    return tape.sum(tape.mul(v, tape.leaf(std::move(w))));
}

bool criterion1(std::string& detail) {
    Checker c;
    double worst = 0.0;
    auto note = [&](double err, const char* name) {
        worst = std::max(worst, err);
        c.expect(err <= 1e-4, std::string(name) + " gradient error " + std::to_string(err));
    };

    const std::vector<std::vector<std::size_t>> shapes = {{3}, {2, 5}, {4, 3, 2}};
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        for (const auto& sh : shapes) {
            auto unary = [&](const char* name, auto make) {
                OpCase oc{{sh}, [&](GradTape& t, const std::vector<Var>& in) {
                              return to_scalar(t, make(t, in[0]), seed);
                          }};
                note(check_case(oc, seed), name);
            };
            unary("elu", [](GradTape& t, Var v) { return t.elu(v); });
            unary("sigmoid", [](GradTape& t, Var v) { return t.sigmoid(v); });
            unary("softmax", [](GradTape& t, Var v) { return t.softmax(v); });
            unary("scale", [](GradTape& t, Var v) { return t.scale(v, -2.5); });
            note(check_case({{sh}, [](GradTape& t, const std::vector<Var>& in) {
                                 return t.sum(in[0]);
                             }},
                            seed),
                 "sum");
            note(check_case({{sh}, [](GradTape& t, const std::vector<Var>& in) {
                                 return t.sum_squares(in[0]);
                             }},
                            seed),
                 "sum_squares");
            note(check_case({{sh, sh},
                             [&](GradTape& t, const std::vector<Var>& in) {
                                 return to_scalar(t, t.mul(in[0], in[1]), seed);
                             }},
                            seed),
                 "mul");
            Tensor target{sh, gbtest::random_values(shape_product(sh), seed ^ 0x77ULL)};
            note(check_case({{sh},
                             [&](GradTape& t, const std::vector<Var>& in) {
                                 return t.mean_squared_error(in[0], target);
                             }},
                            seed),
                 "mse");
        }
        // nll after softmax, three widths
        for (std::size_t width : {2ull, 5ull, 9ull}) {
            const std::size_t cls = seed % width;
            note(check_case({{{width}},
                             [&](GradTape& t, const std::vector<Var>& in) {
                                 return t.negative_log_likelihood(t.softmax(in[0]), cls);
                             }},
                            seed),
                 "nll-softmax");
        }
        // dense
        note(check_case({{{4}, {3, 4}, {3}},
                         [&](GradTape& t, const std::vector<Var>& in) {
                             return to_scalar(t, t.dense(in[0], in[1], in[2]), seed);
                         }},
                        seed),
             "dense");
        // conv and transposed conv, three geometries
        struct Sh {
            std::size_t cin, cout, len, width, stride, pad;
        };
        for (Sh s : {Sh{1, 1, 6, 3, 1, 1}, Sh{2, 3, 9, 5, 1, 2}, Sh{3, 2, 8, 3, 2, 0}}) {
            note(check_case({{{s.cin, s.len}, {s.cout, s.cin, s.width}, {s.cout}},
                             [&](GradTape& t, const std::vector<Var>& in) {
                                 return to_scalar(
                                     t, t.conv1d(in[0], in[1], in[2], s.stride, s.pad), seed);
                             }},
                            seed),
                 "conv1d");
            const std::size_t out_len = (s.len + 2 * s.pad - s.width) / s.stride + 1;
            note(check_case({{{s.cout, out_len}, {s.cout, s.cin, s.width}, {s.cin}},
                             [&](GradTape& t, const std::vector<Var>& in) {
                                 return to_scalar(t,
                                                  t.transposed_conv1d(in[0], in[1], in[2],
                                                                      s.stride, s.pad, s.len),
                                                  seed);
                             }},
                            seed),
                 "transposed_conv1d");
        }
        // maxpool, three geometries
        struct Ps {
            std::size_t ch, len, window;
        };
        for (Ps s : {Ps{1, 8, 2}, Ps{3, 9, 2}, Ps{2, 10, 3}}) {
            note(check_case({{{s.ch, s.len}},
                             [&](GradTape& t, const std::vector<Var>& in) {
                                 auto [p, sw] = t.maxpool(in[0], s.window);
                                 return to_scalar(t, p, seed);
                             }},
                            seed),
                 "maxpool");
        }
    }

    // the full joint loss wrt every parameter
    SynthDataset sd = synth_highdim(4, 9, 2, 2, 0.4, 7);
    auto [d, scaler] = standardize(sd.data);
    CAEConfig cfg;
    cfg.encoder_layers = {{4, 3, 1}};
    cfg.embedding_dim = 4;
    cfg.seed = 5;
    CAEClassifier m = init_cae(cfg, 9, 2);
    m.target_min.assign(9, -2.0);
    m.target_max.assign(9, 2.0);

    auto params_of = [](CAEClassifier& mm) {
        std::vector<Tensor*> ptrs;
        for (auto& t : mm.enc_w) ptrs.push_back(&t);
        ptrs.push_back(&mm.embed_w);
        ptrs.push_back(&mm.head_w);
        ptrs.push_back(&mm.dec_embed_w);
        for (auto& t : mm.dec_w) ptrs.push_back(&t);
        for (auto& t : mm.enc_b) ptrs.push_back(&t);
        ptrs.push_back(&mm.embed_b);
        ptrs.push_back(&mm.head_b);
        ptrs.push_back(&mm.dec_embed_b);
        for (auto& t : mm.dec_b) ptrs.push_back(&t);
        return ptrs;
    };
    auto loss_at = [&](const std::vector<double>& v) {
        CAEClassifier model = m;
        std::size_t off = 0;
        for (Tensor* t : params_of(model)) {
            std::copy(v.begin() + static_cast<std::ptrdiff_t>(off),
                      v.begin() + static_cast<std::ptrdiff_t>(off + t->size()),
                      t->values.begin());
            off += t->size();
        }
        return joint_loss(model, d).total;
    };

    GradTape tape;
    detail::BoundCAE bound = detail::bind_params(tape, m);
    std::vector<Var> weight_vars;
    for (Var v : bound.enc_w) weight_vars.push_back(v);
    weight_vars.push_back(bound.embed_w);
    weight_vars.push_back(bound.head_w);
    weight_vars.push_back(bound.dec_embed_w);
    for (Var v : bound.dec_w) weight_vars.push_back(v);
    Var decay = tape.sum_squares(weight_vars[0]);
    for (std::size_t i = 1; i < weight_vars.size(); ++i) {
        decay = tape.add(decay, tape.sum_squares(weight_vars[i]));
    }
    Var mse_acc = 0, ce_acc = 0;
    for (std::size_t r = 0; r < d.n_rows; ++r) {
        Tensor in = Tensor::zeros({1, 9});
        std::copy(d.row(r).begin(), d.row(r).end(), in.values.begin());
        Var x = tape.leaf(std::move(in));
        std::vector<Switches> sw;
        Var z = detail::encode_row(tape, bound, m, x, &sw);
        Var probs = tape.softmax(tape.dense(z, bound.head_w, bound.head_b));
        Var ce = tape.negative_log_likelihood(probs, d.labels[r]);
        Var xp = detail::decode_embedding(tape, bound, m, z, sw);
        Tensor target{{1, 9}, m.minmax_target(d.row(r))};
        Var mse = tape.mean_squared_error(xp, target);
        mse_acc = r == 0 ? mse : tape.add(mse_acc, mse);
        ce_acc = r == 0 ? ce : tape.add(ce_acc, ce);
    }
    const double inv_n = 1.0 / static_cast<double>(d.n_rows);
    Var recon = tape.add(tape.scale(mse_acc, inv_n), tape.scale(decay, m.config.weight_decay));
    Var loss = tape.add(tape.scale(recon, m.config.alpha_recon),
                        tape.scale(tape.scale(ce_acc, inv_n), m.config.alpha_ce));
    c.expect(std::abs(tape.value(loss).values[0] - joint_loss(m, d).total) <= 1e-12,
             "hand-built graph disagrees with joint_loss");
    tape.backward(loss);

    std::vector<Var> bvars;
    for (Var v : bound.enc_w) bvars.push_back(v);
    bvars.push_back(bound.embed_w);
    bvars.push_back(bound.head_w);
    bvars.push_back(bound.dec_embed_w);
    for (Var v : bound.dec_w) bvars.push_back(v);
    for (Var v : bound.enc_b) bvars.push_back(v);
    bvars.push_back(bound.embed_b);
    bvars.push_back(bound.head_b);
    bvars.push_back(bound.dec_embed_b);
    for (Var v : bound.dec_b) bvars.push_back(v);
    std::vector<double> analytic;
    for (Var v : bvars) {
        const Tensor& g = tape.grad(v);
        analytic.insert(analytic.end(), g.values.begin(), g.values.end());
    }
    std::vector<double> x0;
    for (Tensor* t : params_of(m)) x0.insert(x0.end(), t->values.begin(), t->values.end());
    const double joint_err = gbtest::max_rel_error(loss_at, x0, analytic);
    note(joint_err, "joint-loss");

    std::ostringstream os;
    os << "max relative gradient error " << worst;
    detail = c.ok ? os.str() : c.first_failure;
    return c.ok;
}

// ---------------------------------------------------------------------------
// criterion 2: pool/unpool contract, 10^3 fuzz cases, exact
// ---------------------------------------------------------------------------

bool criterion2(std::string& detail) {
    Checker c;
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    for (int trial = 0; trial < 1000 && c.ok; ++trial) {
        const std::size_t ch = 1 + rng() % 4;
        const std::size_t len = 1 + rng() % 32;
        const std::size_t window = 1 + rng() % 5;
        Tensor x = Tensor::zeros({ch, len});
        for (double& v : x.values) v = dist(rng);

        GradTape tape;
        Var in = tape.leaf(x);
        auto [pooled, sw] = tape.maxpool(in, window);
        const Tensor& up = tape.value(tape.unpool(pooled, sw));

        const std::size_t n_windows = (len + window - 1) / window;
        for (std::size_t cc = 0; cc < ch; ++cc) {
            for (std::size_t w = 0; w < n_windows; ++w) {
                const std::size_t begin = w * window;
                const std::size_t end = std::min(len, begin + window);
                std::size_t arg = begin;
                for (std::size_t i = begin; i < end; ++i) {
                    if (x.values[cc * len + i] > x.values[cc * len + arg]) arg = i;
                }
                for (std::size_t i = begin; i < end; ++i) {
                    const double expected = i == arg ? x.values[cc * len + i] : 0.0;
                    c.expect(up.values[cc * len + i] == expected,
                             "unpool mismatch at trial " + std::to_string(trial));
                }
            }
        }
    }
    detail = c.ok ? "1000 fuzz cases exact" : c.first_failure;
    return c.ok;
}

// ---------------------------------------------------------------------------
// criterion 3: shapley efficiency, k!-oracle, null player, symmetry
// ---------------------------------------------------------------------------

double value_of(const PredictDistFn& fn, std::span<const double> x, const Tensor& bg,
                std::size_t cls, std::uint64_t mask) {
    const std::size_t k = x.size();
    std::vector<double> z(k);
    double acc = 0.0;
    for (std::size_t b = 0; b < bg.shape[0]; ++b) {
        for (std::size_t f = 0; f < k; ++f) {
            z[f] = (mask >> f) & 1ull ? x[f] : bg.values[b * k + f];
        }
        acc += fn(z)[cls];
    }
    return acc / static_cast<double>(bg.shape[0]);
}

bool criterion3(std::string& detail) {
    Checker c;
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1, 1);

    for (std::size_t k = 2; k <= 6; ++k) {
        std::vector<double> x(k);
        for (double& v : x) v = u(rng);
        Tensor bg = Tensor::zeros({2, k});
        for (double& v : bg.values) v = u(rng);
        PredictDistFn fn = [k](std::span<const double> z) {
            double g = z[0] * z[k - 1];
            for (std::size_t i = 0; i < k; ++i) g += (i % 2 ? -0.7 : 1.3) * z[i];
            return std::vector<double>{g};
        };
        ShapleyResult fast = shapley_exact(fn, x, bg, 0);

        // efficiency
        const double total = std::accumulate(fast.phi.begin(), fast.phi.end(), fast.base);
        c.expect(std::abs(total - fn(x)[0]) <= 1e-9, "efficiency violated at k=" +
                                                         std::to_string(k));

        // k!-permutation oracle
        std::vector<std::size_t> order(k);
        std::iota(order.begin(), order.end(), 0);
        std::vector<double> phi(k, 0.0);
        std::size_t n_perms = 0;
        do {
            std::uint64_t mask = 0;
            double prev = value_of(fn, x, bg, 0, 0);
            for (std::size_t f : order) {
                mask |= std::uint64_t{1} << f;
                const double cur = value_of(fn, x, bg, 0, mask);
                phi[f] += cur - prev;
                prev = cur;
            }
            ++n_perms;
        } while (std::next_permutation(order.begin(), order.end()));
        for (std::size_t f = 0; f < k; ++f) {
            c.expect(std::abs(fast.phi[f] - phi[f] / static_cast<double>(n_perms)) <= 1e-10,
                     "permutation oracle mismatch at k=" + std::to_string(k));
        }
    }

    // null player is exactly zero; symmetric players match exactly
    PredictDistFn fn = [](std::span<const double> z) {
        return std::vector<double>{z[0] + z[1] + 3.0 * z[0] * z[1]};
    };
    std::vector<double> x = {0.4, 0.4, 123.0};
    Tensor bg = Tensor::zeros({2, 3});
    bg.values = {0.1, 0.1, -50.0, -0.3, -0.3, 7.0};
    ShapleyResult r = shapley_exact(fn, x, bg, 0);
    c.expect(r.phi[2] == 0.0, "null player nonzero");
    c.expect(std::abs(r.phi[0] - r.phi[1]) <= 1e-12, "symmetric players differ");

    detail = c.ok ? "efficiency <= 1e-9, oracle match <= 1e-10, axioms exact"
                  : c.first_failure;
    return c.ok;
}

// ---------------------------------------------------------------------------
// criterion 4: R^2 oracle
// ---------------------------------------------------------------------------

bool criterion4(std::string& detail) {
    Checker c;
    std::vector<double> bb = {1, 2, 3, 4};
    c.expect(std::abs(r_squared(std::vector<double>{1, 2, 3, 5}, bb).r_squared - 0.8) <= 1e-12,
             "hand case != 0.8");
    c.expect(r_squared(bb, bb).r_squared == 1.0, "perfect surrogate != 1");
    c.expect(std::abs(r_squared(std::vector<double>{2.5, 2.5, 2.5, 2.5}, bb).r_squared) <=
                 1e-15,
             "mean predictor != 0");

    // direct Eq-style evaluation on random sequences
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> s(30), b(30);
        for (std::size_t i = 0; i < 30; ++i) {
            b[i] = u(rng);
            s[i] = b[i] + 0.3 * u(rng);
        }
        double mean = std::accumulate(b.begin(), b.end(), 0.0) / 30.0;
        double sse = 0.0, var = 0.0;
        for (std::size_t i = 0; i < 30; ++i) {
            sse += (s[i] - b[i]) * (s[i] - b[i]);
            var += (b[i] - mean) * (b[i] - mean);
        }
        c.expect(std::abs(r_squared(s, b).r_squared - (1.0 - sse / var)) <= 1e-12,
                 "direct evaluation mismatch");
    }
    detail = c.ok ? "hand case 0.8, perfect 1, mean 0, 50 random sequences to 1e-12"
                  : c.first_failure;
    return c.ok;
}

// ---------------------------------------------------------------------------
// criterion 5: rule semantics
// ---------------------------------------------------------------------------

bool criterion5(std::string& detail) {
    Checker c;
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> dist(-6, 6);
    for (std::uint64_t seed : {3ull, 9ull}) {
        SynthDataset s = synth_highdim(200, 5, 3, 3, 0.4, seed);
        TreeParams tp;
        tp.max_depth = 7;
        tp.min_leaf = 1;
        SurrogateModel m = fit_dt(s.data, tp, seed);
        std::vector<Rule> rules = extract_rules(*m.trees[0]);
        for (int i = 0; i < 10000; ++i) {
            std::vector<double> x(5);
            for (double& v : x) v = dist(rng);
            std::size_t matched = 0;
            for (const Rule& r : rules) matched += r.matches(x);
            c.expect(matched == 1, "fuzz point matched " + std::to_string(matched) +
                                       " rules");
        }
        // single-tree list fidelity vs its own tree = exactly 1
        Dataset labeled = s.data;
        labeled.labels = predict_all(m, s.data);
        DecisionList list = assemble_decision_list(rules, labeled, {0.0, 0.0, 1});
        c.expect(list_fidelity(list, m, s.data) == 1.0, "single-tree fidelity below 1");
    }
    detail = c.ok ? "2x10^4 fuzz points each match one rule; list fidelity exactly 1.0"
                  : c.first_failure;
    return c.ok;
}

// ---------------------------------------------------------------------------
// criterion 6: desk-scale pipeline reproduction
// ---------------------------------------------------------------------------

std::string c6_run_dir() { return kRoot + "/covertype"; }

std::string c6_config() {
    const std::string path = kRoot + "/covertype.conf";
    fs::create_directories(kRoot);
    // stand-in for the covertype subsample: synthetic data at the same scale
    // (10,000 rows, 54 features, 7 classes) since the sandbox has no network
    write_text(path,
               "synth.rows = 10000\n"
               "synth.cols = 54\n"
               "synth.informative = 12\n"
               "synth.classes = 7\n"
               "synth.noise_sigma = 0.5\n"
               "cae.embedding_dim = 16\n"
               "cae.epochs = 40\n"
               "top_k = 20\n"
               "surrogate = ert\n"
               "forest.n_trees = 100\n"
               "forest.max_depth = 14\n"
               "rules.min_confidence = 0.5\n"
               "threads = 4\n");
    return path;
}

bool criterion6(std::string& detail) {
    const std::string cfg = c6_config();
    const std::string dir = c6_run_dir();
    fs::remove_all(dir);
    const std::string shared = " --config " + cfg + " --run-dir " + dir;
    for (const std::string stage : {"synth", "train-blackbox", "probe", "surrogate", "rules"}) {
        if (run_cli(stage + shared) != 0) {
            detail = "stage '" + stage + "' failed";
            return false;
        }
    }
    json surr = load_json_file(dir + "/surrogate_ert.json");
    json rules = load_json_file(dir + "/rules.json");
    const double r2 = surr.at("fidelity").at("r_squared").get<double>();
    const double fid = rules.at("fidelity_test").get<double>();
    std::ostringstream os;
    os << "ERT R^2 " << r2 << " (floor 0.85), rule-list fidelity " << fid
       << " (floor 0.80), on a synthetic covertype stand-in";
    detail = os.str();
    return r2 >= 0.85 && fid >= 0.80;
}

// ---------------------------------------------------------------------------
// criterion 7: embedding-dimension trend
// ---------------------------------------------------------------------------

double heldout_accuracy(std::size_t k_embed, std::uint64_t seed) {
    SynthDataset s = synth_highdim(2000, 1000, 20, 4, 0.5, seed);
    auto [sd, scaler] = standardize(s.data);
    auto [train, test] = split(sd, 0.2, seed);
    CAEConfig cfg;
    cfg.embedding_dim = k_embed;
    cfg.epochs = 10;
    cfg.seed = seed;
    CAEClassifier m = train_cae(train, cfg, scaler);
    std::vector<std::size_t> preds = predict_class(m, test);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == test.labels[i];
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

bool criterion7(std::string& detail) {
    // K at 0.5%, 6%, and 50% of M = 1000
    std::vector<std::size_t> ks = {5, 60, 500};
    std::vector<double> medians;
    std::ostringstream os;
    for (std::size_t k : ks) {
        std::vector<double> accs;
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            accs.push_back(heldout_accuracy(k, seed));
        }
        std::sort(accs.begin(), accs.end());
        medians.push_back(accs[1]);
        os << "K=" << k << " median " << accs[1] << "; ";
    }
    detail = os.str();
    return medians[1] > medians[0] && medians[1] > medians[2];
}

// ---------------------------------------------------------------------------
// criterion 8: counterfactual validity and near-minimality
// ---------------------------------------------------------------------------

bool criterion8(std::string& detail) {
    Checker c;

    // toy optimality vs a dense grid
    {
        DecisionList list;
        Rule r;
        r.antecedent = {{0, -std::numeric_limits<double>::infinity(), 1.0}};
        r.consequent = {1.0, 0.0};
        list.rules = {r};
        Tensor bg = Tensor::zeros({3, 2});
        bg.values = {0.2, 0.3, 0.6, 0.1, 0.4, 0.8};
        PredictDistFn step = [](std::span<const double> z) {
            return z[0] >= 1.0 ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0};
        };
        std::vector<double> x = {0.0, 5.0};
        auto found = find_counterfactuals(step, x, list, bg, std::vector<double>{1, 1}, {});
        double oracle = std::numeric_limits<double>::infinity();
        for (std::size_t f = 0; f < 2; ++f) {
            for (int i = -10000; i <= 10000; ++i) {
                const double v = static_cast<double>(i) * 1e-3;
                std::vector<double> p = x;
                p[f] = v;
                if (argmax_class(step(p)) != 0) oracle = std::min(oracle, std::abs(v - x[f]));
            }
        }
        c.expect(!found.empty() && found[0].l1_cost <= oracle * 1.05,
                 "toy cost exceeds grid optimum by more than 5%");
    }

    // 100 random test instances from the criterion-6 run: every returned
    // counterfactual must flip the surrogate's class on re-verification
    const std::string dir = c6_run_dir();
    json data = load_json_file(dir + "/data.json");
    json surr = load_json_file(dir + "/surrogate_ert.json");
    SurrogateModel model = surrogate_from_json(surr.at("model").dump());
    const auto selected = surr.at("selected_features").get<std::vector<std::size_t>>();
    Dataset test = reduce_columns(dataset_from_json(data.at("test")), selected);
    Dataset train = reduce_columns(dataset_from_json(data.at("train")), selected);
    DecisionList list = list_from_json(load_json_file(dir + "/rules.json"));
    Tensor bg = sample_background(train, 32, 42);
    std::vector<double> scale(selected.size(), 1.0);
    for (std::size_t f = 0; f < selected.size(); ++f) {
        double mean = 0.0, var = 0.0;
        for (std::size_t r2 = 0; r2 < train.n_rows; ++r2) mean += train.at(r2, f);
        mean /= static_cast<double>(train.n_rows);
        for (std::size_t r2 = 0; r2 < train.n_rows; ++r2) {
            var += (train.at(r2, f) - mean) * (train.at(r2, f) - mean);
        }
        scale[f] = std::sqrt(var / static_cast<double>(train.n_rows));
    }
    const PredictDistFn fn = surrogate_predict_fn(model);

    std::mt19937_64 rng(77);
    std::size_t instances = 0, flips = 0, none = 0;
    while (instances < 100) {
        const std::size_t row = rng() % test.n_rows;
        ++instances;
        auto x = test.row(row);
        try {
            auto found = find_counterfactuals(fn, x, list, bg, scale, {});
            const std::size_t orig = argmax_class(fn(x));
            for (const auto& cf : found) {
                ++flips;
                c.expect(argmax_class(fn(cf.x_prime)) != orig,
                         "returned counterfactual does not flip");
            }
        } catch (const DataError&) {
            ++none;  // no counterfactual within budget for this instance
        }
    }
    c.expect(flips > 0, "no counterfactual found on any of 100 instances");
    std::ostringstream os;
    os << flips << " counterfactuals over 100 instances, all re-verified flips; " << none
       << " instances had none within budget; toy cost within 5% of grid optimum";
    detail = c.ok ? os.str() : c.first_failure;
    return c.ok;
}

// ---------------------------------------------------------------------------
// criterion 9: sensitivity null feature and informative > noise
// ---------------------------------------------------------------------------

bool criterion9(std::string& detail) {
    Checker c;

    // constructed zero-influence feature: a constant column under the permute
    // scheme (its perturbed dataset is identical), S must be exactly zero
    SynthDataset s0 = synth_highdim(60, 8, 2, 2, 0.3, 51);
    Dataset d0 = s0.data;
    for (std::size_t r = 0; r < d0.n_rows; ++r) d0.features[r * d0.n_cols + 3] = 0.0;
    auto [sd0, sc0] = standardize(d0);
    CAEConfig cfg0;
    cfg0.encoder_layers = {{4, 3, 1}};
    cfg0.embedding_dim = 4;
    cfg0.epochs = 3;
    cfg0.seed = 5;
    CAEClassifier m0 = train_cae(sd0, cfg0, sc0);
    SensitivityEntry e = sensitivity(m0, sd0, 3, 1.0, PerturbScheme::Permute, 9);
    c.expect(e.s_value == 0.0, "null-feature S not exactly zero");
    c.expect(e.top2_shift == 0.0, "null-feature top-2 shift not exactly zero");

    // informative mean S above noise mean S, 3 of 3 seeds
    std::ostringstream os;
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        SynthDataset s = synth_highdim(300, 16, 4, 2, 0.3, seed);
        auto [sd, sc] = standardize(s.data);
        CAEConfig cfg;
        cfg.encoder_layers = {{6, 3, 1}};
        cfg.embedding_dim = 6;
        cfg.epochs = 25;
        cfg.seed = seed;
        CAEClassifier m = train_cae(sd, cfg, sc);
        double inf_sum = 0.0, noise_sum = 0.0;
        std::size_t inf_n = 0, noise_n = 0;
        for (std::size_t f = 0; f < 16; ++f) {
            SensitivityEntry se =
                sensitivity(m, sd, f, 1.0, PerturbScheme::GaussianNoise, seed);
            const bool informative =
                std::find(s.informative.begin(), s.informative.end(), f) !=
                s.informative.end();
            if (informative) {
                inf_sum += se.s_value;
                ++inf_n;
            } else {
                noise_sum += se.s_value;
                ++noise_n;
            }
        }
        const double inf_mean = inf_sum / static_cast<double>(inf_n);
        const double noise_mean = noise_sum / static_cast<double>(noise_n);
        os << "seed " << seed << ": informative " << inf_mean << " vs noise " << noise_mean
           << "; ";
        c.expect(inf_mean > noise_mean,
                 "informative mean S not above noise at seed " + std::to_string(seed));
    }
    detail = c.ok ? ("null feature exactly 0; " + os.str()) : c.first_failure;
    return c.ok;
}

// ---------------------------------------------------------------------------
// criterion 10: determinism across reruns and thread counts
// ---------------------------------------------------------------------------

bool criterion10(std::string& detail) {
    const std::string cfg = kRoot + "/determinism.conf";
    fs::create_directories(kRoot);
    write_text(cfg,
               "synth.rows = 400\n"
               "synth.cols = 40\n"
               "synth.informative = 6\n"
               "synth.classes = 3\n"
               "cae.embedding_dim = 6\n"
               "cae.epochs = 8\n"
               "cae.channels = 4,8\n"
               "top_k = 10\n"
               "forest.n_trees = 30\n"
               "shap.background = 12\n"
               "explain.instances = 3\n");
    std::vector<std::string> dumps;
    for (const std::string threads : {"1", "4", "1"}) {
        const std::string dir = kRoot + "/det_" + std::to_string(dumps.size());
        fs::remove_all(dir);
        const std::string shared =
            " --config " + cfg + " --run-dir " + dir + " --threads " + threads;
        for (const std::string stage :
             {"synth", "train-blackbox", "probe", "sensitivity", "surrogate", "importance",
              "rules", "explain", "report"}) {
            if (run_cli(stage + shared) != 0) {
                detail = "stage '" + stage + "' failed with threads=" + threads;
                return false;
            }
        }
        dumps.push_back(Report::load(dir + "/report.json").without_timestamps().dump());
    }
    const bool same = dumps[0] == dumps[1] && dumps[0] == dumps[2];
    detail = same ? "three full runs (threads 1/4/1) byte-identical modulo timestamps"
                  : "reports differ across reruns or thread counts";
    return same;
}

}  // namespace

int main() {
    struct Entry {
        int id;
        const char* name;
        std::function<bool(std::string&)> fn;
    };
    const std::vector<Entry> criteria = {
        {1, "gradient correctness (primitives + joint loss)", criterion1},
        {2, "pool/unpool contract", criterion2},
        {3, "shapley suite", criterion3},
        {4, "r-squared oracle", criterion4},
        {5, "rule semantics", criterion5},
        {6, "desk-scale pipeline reproduction", criterion6},
        {7, "embedding-dimension trend", criterion7},
        {8, "counterfactual validity and near-minimality", criterion8},
        {9, "sensitivity null feature and signal separation", criterion9},
        {10, "determinism across reruns and thread counts", criterion10},
    };

    int failures = 0;
    for (const Entry& e : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = e.fn(detail);
        } catch (const std::exception& ex) {
            detail = std::string("exception: ") + ex.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %2d: %s [%.1fs] — %s\n", ok ? "PASS" : "FAIL", e.id,
                    e.name, secs, detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failures;
    }
    if (failures > 0) {
        std::printf("%d of %zu criteria failed\n", failures, criteria.size());
        return 1;
    }
    std::printf("all %zu criteria passed\n", criteria.size());
    return 0;
}

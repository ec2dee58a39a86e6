// Microbenchmarks for the training and interpretation hot paths.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "glassbox/attribution.hpp"
#include "glassbox/cae.hpp"
#include "glassbox/dataset.hpp"
#include "glassbox/errors.hpp"
#include "glassbox/rules.hpp"
#include "glassbox/surrogate.hpp"
#include "glassbox/tape.hpp"

using namespace glassbox;

namespace {

Dataset standardized_synth(std::size_t n, std::size_t m, std::size_t classes,
                           std::uint64_t seed) {
    SynthDataset s = synth_highdim(n, m, std::max<std::size_t>(2, m / 10), classes, 0.5, seed);
    return standardize(s.data).first;
}

void BM_Conv1dForwardBackward(benchmark::State& state) {
    const std::size_t len = static_cast<std::size_t>(state.range(0));
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    Tensor x = Tensor::zeros({4, len});
    Tensor w = Tensor::zeros({8, 4, 5});
    Tensor b = Tensor::zeros({8});
    for (double& v : x.values) v = u(rng);
    for (double& v : w.values) v = u(rng);
    for (auto _ : state) {
        GradTape tape;
        Var out = tape.sum(tape.conv1d(tape.leaf(x), tape.leaf(w), tape.leaf(b), 1, 2));
        tape.backward(out);
        benchmark::DoNotOptimize(tape.value(out).values[0]);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_Conv1dForwardBackward)->Arg(64)->Arg(256)->Arg(1024);

void BM_CaeEpoch(benchmark::State& state) {
    const std::size_t cols = static_cast<std::size_t>(state.range(0));
    Dataset d = standardized_synth(256, cols, 4, 2);
    CAEConfig cfg;
    cfg.encoder_layers = {{8, 5, 1}};
    cfg.embedding_dim = 8;
    cfg.batch_size = 64;
    cfg.seed = 3;
    for (auto _ : state) {
        cfg.epochs = 1;
        CAEClassifier m = train_cae(d, cfg);
        benchmark::DoNotOptimize(m.head_b.values[0]);
    }
}
BENCHMARK(BM_CaeEpoch)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_PredictProbaRows(benchmark::State& state) {
    Dataset d = standardized_synth(512, 128, 4, 4);
    CAEConfig cfg;
    cfg.encoder_layers = {{8, 5, 1}};
    cfg.embedding_dim = 8;
    cfg.epochs = 1;
    cfg.seed = 4;
    CAEClassifier m = train_cae(d, cfg);
    Tensor rows{{d.n_rows, d.n_cols}, d.features};
    for (auto _ : state) {
        benchmark::DoNotOptimize(predict_proba_rows(m, rows));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 512);
}
BENCHMARK(BM_PredictProbaRows)->Unit(benchmark::kMillisecond);

void BM_FitTree(benchmark::State& state) {
    Dataset d = standardized_synth(static_cast<std::size_t>(state.range(0)), 20, 4, 5);
    TreeParams tp;
    tp.max_depth = 10;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_tree(d, tp, 7));
    }
}
BENCHMARK(BM_FitTree)->Arg(500)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_FitForest(benchmark::State& state) {
    Dataset d = standardized_synth(2000, 20, 4, 6);
    TreeParams tp;
    tp.max_depth = 8;
    ForestParams fp;
    fp.n_trees = 50;
    fp.tree = tp;
    for (auto _ : state) {
        benchmark::DoNotOptimize(fit_forest(d, fp, SurrogateKind::RF, 11,
                                            static_cast<std::size_t>(state.range(0))));
    }
}
BENCHMARK(BM_FitForest)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)
    ->MeasureProcessCPUTime();

void BM_ShapleyExact(benchmark::State& state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    std::vector<double> x(k, 0.5);
    Tensor bg = Tensor::zeros({16, k});
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1, 1);
    for (double& v : bg.values) v = u(rng);
    PredictDistFn fn = [](std::span<const double> z) {
        double acc = 0.0;
        for (double v : z) acc += v * v;
        return std::vector<double>{acc};
    };
    for (auto _ : state) {
        benchmark::DoNotOptimize(shapley_exact(fn, x, bg, 0));
    }
}
BENCHMARK(BM_ShapleyExact)->Arg(6)->Arg(9)->Arg(12)->Unit(benchmark::kMillisecond);

void BM_ShapleySampled(benchmark::State& state) {
    const std::size_t k = 20;
    std::vector<double> x(k, 0.5);
    Tensor bg = Tensor::zeros({16, k});
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(-1, 1);
    for (double& v : bg.values) v = u(rng);
    PredictDistFn fn = [](std::span<const double> z) {
        double acc = 0.0;
        for (double v : z) acc += v * v;
        return std::vector<double>{acc};
    };
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            shapley_sampled(fn, x, bg, 0, static_cast<std::size_t>(state.range(0)), 3));
    }
}
BENCHMARK(BM_ShapleySampled)->Arg(50)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_ExtractRules(benchmark::State& state) {
    Dataset d = standardized_synth(4000, 20, 4, 19);
    TreeParams tp;
    tp.max_depth = 12;
    SurrogateModel m = fit_dt(d, tp, 23);
    for (auto _ : state) {
        benchmark::DoNotOptimize(extract_rules(*m.trees[0]));
    }
}
BENCHMARK(BM_ExtractRules);

void BM_Counterfactual(benchmark::State& state) {
    Dataset d = standardized_synth(1000, 12, 3, 29);
    TreeParams tp;
    tp.max_depth = 8;
    SurrogateModel m = fit_dt(d, tp, 31);
    DecisionList list = assemble_decision_list(extract_rules(*m.trees[0]), d, {});
    Tensor bg = sample_background(d, 32, 37);
    std::vector<double> scale(12, 1.0);
    PredictDistFn fn = surrogate_predict_fn(m);
    for (auto _ : state) {
        std::size_t hits = 0;
        for (std::size_t r = 0; r < 20; ++r) {
            try {
                hits += find_counterfactuals(fn, d.row(r), list, bg, scale, {}).size();
            } catch (const DataError&) {
            }
        }
        benchmark::DoNotOptimize(hits);
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) * 20);
}
BENCHMARK(BM_Counterfactual)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

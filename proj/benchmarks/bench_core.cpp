// Micro-benchmarks for the hot paths: the aggregated penalty against the
// literal pairwise sum it replaces, the batch gradient, AUROC ranking and a
// federation round. Run with --benchmark_filter=... to narrow.

#include <benchmark/benchmark.h>

#include <vector>

#include "fairfml/data_pipeline.hpp"
#include "fairfml/federation.hpp"
#include "fairfml/metrics.hpp"
#include "fairfml/objective.hpp"
#include "fairfml/rng.hpp"
#include "fairfml/trainer.hpp"

namespace {

using namespace fairfml;

Dataset cohort(std::size_t n, std::size_t d) { return generate_synthetic(n, d, 1.5, 3); }

ModelWeights some_weights(std::size_t d) {
    ModelWeights w = ModelWeights::zeros(d);
    rng::Stream gen(17);
    for (auto& v : w.w) v = gen.normal();
    w.b = 0.2;
    return w;
}

std::vector<int> everything(const Dataset& d) {
    std::vector<int> idx(d.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    return idx;
}

void BM_PenaltyAggregated(benchmark::State& state) {
    const Dataset data = cohort(static_cast<std::size_t>(state.range(0)), 8);
    const std::vector<int> rows = everything(data);
    for (auto _ : state) benchmark::DoNotOptimize(penalty_direction(data, rows));
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PenaltyAggregated)->Range(256, 16384)->Complexity(benchmark::oN);

// The quadratic sum the aggregated form avoids; kept here as the yardstick.
void BM_PenaltyPairwise(benchmark::State& state) {
    const Dataset data = cohort(static_cast<std::size_t>(state.range(0)), 8);
    const std::size_t d = data.dim();
    for (auto _ : state) {
        std::vector<double> u(d, 0.0);
        double n0 = 0.0, n1 = 0.0;
        for (const auto& row : data.rows) (row.group == 1 ? n1 : n0) += 1.0;
        for (const auto& ri : data.rows) {
            if (ri.group != 1) continue;
            for (const auto& rj : data.rows) {
                if (rj.group != 0 || ri.outcome != rj.outcome) continue;
                for (std::size_t f = 0; f < d; ++f) u[f] += ri.features[f] - rj.features[f];
            }
        }
        for (double& v : u) v /= n0 * n1;
        benchmark::DoNotOptimize(u);
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_PenaltyPairwise)->Range(256, 4096)->Complexity(benchmark::oNSquared);

void BM_ObjectiveGradient(benchmark::State& state) {
    const Dataset data = cohort(static_cast<std::size_t>(state.range(0)), 8);
    const ModelWeights w = some_weights(8);
    PenaltyConfig pen;
    pen.lambda = 1.0;
    pen.gamma = 0.01;
    for (auto _ : state) benchmark::DoNotOptimize(objective_and_gradient(w, data, pen));
}
BENCHMARK(BM_ObjectiveGradient)->Range(256, 16384);

void BM_TrainEpoch(benchmark::State& state) {
    const Dataset data = cohort(static_cast<std::size_t>(state.range(0)), 8);
    TrainConfig cfg;
    cfg.epochs = 1;
    cfg.batch_size = 128;
    cfg.penalty.lambda = 1.0;
    cfg.penalty.gamma = 0.01;
    const ModelWeights init = ModelWeights::zeros(8);
    for (auto _ : state) benchmark::DoNotOptimize(train_local(init, data, cfg));
}
BENCHMARK(BM_TrainEpoch)->Range(1024, 16384);

void BM_Auroc(benchmark::State& state) {
    const Dataset data = cohort(static_cast<std::size_t>(state.range(0)), 8);
    const PredictionSet preds = predict(some_weights(8), data);
    for (auto _ : state) benchmark::DoNotOptimize(auroc(preds));
}
BENCHMARK(BM_Auroc)->Range(1024, 65536);

void BM_Aggregate(benchmark::State& state) {
    const std::size_t k = static_cast<std::size_t>(state.range(0));
    std::vector<ClientUpdate> updates;
    rng::Stream gen(5);
    for (std::size_t i = 0; i < k; ++i) {
        ClientUpdate u;
        u.client = i;
        u.n = 500;
        u.weights = ModelWeights::zeros(16);
        for (auto& v : u.weights.w) v = gen.normal();
        updates.push_back(std::move(u));
    }
    for (auto _ : state) benchmark::DoNotOptimize(aggregate(updates, Aggregation::uniform));
}
BENCHMARK(BM_Aggregate)->Range(4, 256);

void BM_FederationRound(benchmark::State& state) {
    const Dataset full = cohort(4000, 5);
    PartitionSpec spec;
    spec.attribute = "region";
    spec.clients = static_cast<int>(state.range(0));
    spec.skew = 0.8;
    const std::vector<Dataset> clients = partition(full, spec);
    FederationConfig cfg;
    cfg.train.penalty.lambda = 1.0;
    cfg.train.penalty.gamma = 0.01;
    GlobalModel g;
    g.weights = ModelWeights::zeros(5);
    for (auto _ : state) benchmark::DoNotOptimize(run_round(g, clients, cfg));
}
BENCHMARK(BM_FederationRound)->Arg(2)->Arg(4)->Arg(8);

}  // namespace

BENCHMARK_MAIN();

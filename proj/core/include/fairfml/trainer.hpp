#pragma once

#include <cstdint>
#include <ostream>
#include <utility>
#include <vector>

#include "fairfml/dataset.hpp"
#include "fairfml/objective.hpp"

namespace fairfml {

struct TrainConfig {
    int epochs = 1;
    int batch_size = 128;
    double learning_rate = 0.1;
    PenaltyConfig penalty;
    std::uint64_t seed = 0;
};

/// The shuffle order for one epoch; depends only on (seed, epoch, n).
std::vector<int> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch);

/// Mini-batch SGD on the fair objective: per epoch, shuffle with the
/// epoch-specific stream of cfg.seed, cut into batches of cfg.batch_size
/// (last batch may be short) and step w <- w - lr * grad. Bit-deterministic
/// given (init, data, cfg). Throws on divergence (non-finite weights or
/// ||w|| > 1e6) with the epoch/batch index.
ModelWeights train_local(const ModelWeights& init, const Dataset& data, const TrainConfig& cfg);

enum class SweepMetric { accuracy, mse };

struct LambdaSweepConfig {
    double step = 0.5;
    double accuracy_factor = 0.995;  // stop once the metric degrades past factor * baseline
    double max_lambda = 10.0;
    SweepMetric metric = SweepMetric::accuracy;
};

struct LambdaSweepResult {
    double lambda_k = 0.0;  // largest tested lambda still meeting the threshold
    std::vector<std::pair<double, double>> trace;  // (lambda, metric), starts at lambda = 0
    bool hit_max = false;  // never degraded up to max_lambda
    SweepMetric metric = SweepMetric::accuracy;
};

/// Trains at lambda = 0 for the baseline metric, then retrains from the same
/// zero init and seed at lambda = step, 2*step, ... until the metric
/// degrades (accuracy < factor * baseline; for MSE, mse > baseline / factor)
/// or max_lambda is reached. Gamma stays fixed at base.penalty.gamma.
/// Throws when the test outcomes are single-class (degenerate baseline).
LambdaSweepResult lambda_sweep(const Dataset& train, const Dataset& test,
                               const TrainConfig& base, const LambdaSweepConfig& sweep);

/// Trace as CSV (lambda, metric) for plotting.
void write_sweep_trace_csv(const LambdaSweepResult& result, std::ostream& out);

}  // namespace fairfml

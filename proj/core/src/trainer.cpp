#include "fairfml/trainer.hpp"

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>

#include "fairfml/csv.hpp"
#include "fairfml/metrics.hpp"
#include "fairfml/rng.hpp"

namespace fairfml {

namespace {

constexpr double kDivergenceNorm = 1e6;

void validate(const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (!(cfg.learning_rate >= 0.0)) throw std::invalid_argument("train: learning rate must be >= 0");
    if (cfg.penalty.lambda < 0.0 || cfg.penalty.gamma < 0.0)
        throw std::invalid_argument("train: penalty weights must be non-negative");
}

double sweep_metric(const PredictionSet& preds, SweepMetric metric) {
    if (metric == SweepMetric::accuracy) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < preds.size(); ++i)
            correct += (preds.decision[i] == preds.outcome[i]);
        return static_cast<double>(correct) / static_cast<double>(preds.size());
    }
    double mse = 0.0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const double e = preds.score[i] - preds.outcome[i];
        mse += e * e;
    }
    return mse / static_cast<double>(preds.size());
}

bool metric_ok(double value, double baseline, double factor, SweepMetric metric) {
    if (metric == SweepMetric::accuracy) return value >= factor * baseline;
    return value <= baseline / factor;  // MSE: lower is better
}

}  // namespace

std::vector<int> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch) {
    rng::Stream stream(rng::mix(seed, 0xe90cu, static_cast<std::uint64_t>(epoch)));
    return rng::permutation(n, stream);
}

ModelWeights train_local(const ModelWeights& init, const Dataset& data, const TrainConfig& cfg) {
    if (data.rows.empty()) throw std::invalid_argument("train_local: empty dataset");
    if (init.w.size() != data.dim())
        throw std::invalid_argument("train_local: weight dimension mismatch");
    validate(cfg);

    ModelWeights weights = init;
    const std::size_t n = data.size();
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<int> perm = epoch_permutation(n, cfg.seed, epoch);
        for (std::size_t start = 0, b = 0; start < n; start += batch, ++b) {
            const std::size_t len = std::min(batch, n - start);
            const std::span<const int> rows(perm.data() + start, len);
            const ObjectiveValue g = objective_and_gradient(weights, data, rows, cfg.penalty);
            for (std::size_t j = 0; j < weights.w.size(); ++j)
                weights.w[j] -= cfg.learning_rate * g.grad_w[j];
            weights.b -= cfg.learning_rate * g.grad_b;

            if (!weights.finite() || weights.weight_norm_sq() > kDivergenceNorm * kDivergenceNorm)
                throw std::runtime_error("train_local: divergence at epoch " +
                                         std::to_string(epoch) + ", batch " + std::to_string(b));
        }
    }
    return weights;
}

LambdaSweepResult lambda_sweep(const Dataset& train, const Dataset& test,
                               const TrainConfig& base, const LambdaSweepConfig& sweep) {
    if (!(sweep.step > 0.0)) throw std::invalid_argument("lambda_sweep: step must be > 0");
    if (!(sweep.accuracy_factor > 0.0 && sweep.accuracy_factor <= 1.0))
        throw std::invalid_argument("lambda_sweep: factor must be in (0, 1]");
    if (test.rows.empty()) throw std::invalid_argument("lambda_sweep: empty test set");
    {
        std::size_t positives = 0;
        for (const auto& row : test.rows) positives += (row.outcome == 1);
        if (positives == 0 || positives == test.size())
            throw std::invalid_argument("lambda_sweep: all-one-class test set, baseline degenerate");
    }

    const ModelWeights init = ModelWeights::zeros(train.dim());
    auto train_at = [&](double lambda) {
        TrainConfig cfg = base;
        cfg.penalty.lambda = lambda;
        const ModelWeights w = train_local(init, train, cfg);
        return sweep_metric(predict(w, test), sweep.metric);
    };

    LambdaSweepResult result;
    result.metric = sweep.metric;
    const double baseline = train_at(0.0);
    result.trace.emplace_back(0.0, baseline);
    result.lambda_k = 0.0;

    for (double lambda = sweep.step; lambda <= sweep.max_lambda * (1.0 + 1e-12);
         lambda += sweep.step) {
        const double value = train_at(lambda);
        result.trace.emplace_back(lambda, value);
        if (!metric_ok(value, baseline, sweep.accuracy_factor, sweep.metric)) return result;
        result.lambda_k = lambda;
    }
    result.hit_max = true;
    return result;
}

void write_sweep_trace_csv(const LambdaSweepResult& result, std::ostream& out) {
    out << "lambda," << (result.metric == SweepMetric::accuracy ? "accuracy" : "mse") << '\n';
    for (const auto& [lambda, metric] : result.trace)
        out << format_double(lambda) << ',' << format_double(metric) << '\n';
}

}  // namespace fairfml

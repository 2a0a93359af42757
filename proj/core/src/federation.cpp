#include "fairfml/federation.hpp"

#include <future>
#include <span>
#include <stdexcept>
#include <string>

#include "fairfml/rng.hpp"
#include "json.hpp"

namespace fairfml {

namespace {

constexpr double kDivergenceNorm = 1e6;
constexpr const char* kModelTag = "fairfml.global_model.v1";
constexpr const char* kUpdateTag = "fairfml.client_update.v1";

void check_clients(const std::vector<Dataset>& clients) {
    if (clients.empty()) throw std::invalid_argument("federation: no clients");
    const std::size_t d = clients.front().dim();
    for (std::size_t k = 0; k < clients.size(); ++k) {
        if (clients[k].rows.empty())
            throw std::invalid_argument("federation: client " + std::to_string(k) + " is empty");
        if (clients[k].dim() != d)
            throw std::invalid_argument("federation: client " + std::to_string(k) +
                                        " has mismatched feature dimension");
    }
}

void sgd_step(ModelWeights& w, const ObjectiveValue& g, double step) {
    for (std::size_t j = 0; j < w.w.size(); ++j) w.w[j] -= step * g.grad_w[j];
    w.b -= step * g.grad_b;
}

// Same shuffle/batch schedule as train_local, plus the per-batch inner
// adaptation. Kept structurally parallel so the alpha == 0 case really is
// the same arithmetic as plain SGD.
ModelWeights perfedavg_pass(const ModelWeights& init, const Dataset& data,
                            const TrainConfig& cfg, int inner_steps, double alpha) {
    ModelWeights weights = init;
    const std::size_t n = data.size();
    const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const std::vector<int> perm = epoch_permutation(n, cfg.seed, epoch);
        for (std::size_t start = 0, b = 0; start < n; start += batch, ++b) {
            const std::size_t len = std::min(batch, n - start);
            const std::span<const int> rows(perm.data() + start, len);

            ModelWeights adapted = weights;
            if (alpha != 0.0) {
                for (int s = 0; s < inner_steps; ++s) {
                    const ObjectiveValue gi = objective_and_gradient(adapted, data, rows, cfg.penalty);
                    sgd_step(adapted, gi, alpha);
                }
            }
            const ObjectiveValue g = objective_and_gradient(adapted, data, rows, cfg.penalty);
            sgd_step(weights, g, cfg.learning_rate);

            if (!weights.finite() || weights.weight_norm_sq() > kDivergenceNorm * kDivergenceNorm)
                throw std::runtime_error("perfedavg: divergence at epoch " +
                                         std::to_string(epoch) + ", batch " + std::to_string(b));
        }
    }
    return weights;
}

std::vector<double> flat_coefficients(const ModelWeights& w) {
    std::vector<double> coef = w.w;
    coef.push_back(w.b);
    return coef;
}

ModelWeights weights_from_flat(std::vector<double> coef) {
    if (coef.empty()) throw std::invalid_argument("model json: empty coefficient array");
    ModelWeights out;
    out.b = coef.back();
    coef.pop_back();
    out.w = std::move(coef);
    return out;
}

nlohmann::json parse_tagged(const std::string& text, const char* tag) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("model json: ") + e.what());
    }
    if (j.value("format", "") != tag)
        throw std::invalid_argument(std::string("model json: expected format tag ") + tag);
    if (!j.contains("coefficients") || !j["coefficients"].is_array())
        throw std::invalid_argument("model json: missing coefficient array");
    return j;
}

}  // namespace

std::uint64_t client_round_seed(std::uint64_t seed, std::size_t client, int round) {
    return rng::mix(seed, static_cast<std::uint64_t>(client) + 1,
                    static_cast<std::uint64_t>(round) + 1);
}

GlobalModel aggregate(const std::vector<ClientUpdate>& updates, Aggregation how) {
    if (updates.empty()) throw std::invalid_argument("aggregate: no updates");
    const std::size_t d = updates.front().weights.w.size();
    const int round = updates.front().round;
    double total = 0.0;
    for (const auto& u : updates) {
        if (u.weights.w.size() != d)
            throw std::invalid_argument("aggregate: mixed dimensions");
        if (u.round != round)
            throw std::invalid_argument("aggregate: mixed rounds");
        if (u.n == 0)
            throw std::invalid_argument("aggregate: client " + std::to_string(u.client) +
                                        " reports zero samples");
        total += static_cast<double>(u.n);
    }

    GlobalModel out;
    out.round = round;
    out.weights = ModelWeights::zeros(d);
    for (const auto& u : updates) {
        const double wk = how == Aggregation::uniform
                              ? 1.0 / static_cast<double>(updates.size())
                              : static_cast<double>(u.n) / total;
        for (std::size_t j = 0; j < d; ++j) out.weights.w[j] += wk * u.weights.w[j];
        out.weights.b += wk * u.weights.b;
    }
    return out;
}

ModelWeights local_update(const ModelWeights& global, const Dataset& data,
                          const TrainConfig& cfg, const FederationConfig& fed) {
    if (fed.framework == Framework::fedavg)
        return train_local(global, data, cfg);
    if (fed.inner_steps < 1)
        throw std::invalid_argument("federation: inner_steps must be >= 1");
    return perfedavg_pass(global, data, cfg, fed.inner_steps, fed.inner_learning_rate);
}

GlobalModel run_round(const GlobalModel& global, const std::vector<Dataset>& clients,
                      const FederationConfig& cfg) {
    check_clients(clients);
    const std::size_t k_count = clients.size();
    std::vector<ClientUpdate> updates(k_count);

    auto run_client = [&](std::size_t k) {
        TrainConfig local = cfg.train;
        local.seed = client_round_seed(cfg.train.seed, k, global.round);
        try {
            return local_update(global.weights, clients[k], local, cfg);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("client " + std::to_string(k) + ": " + e.what());
        }
    };

    if (cfg.parallel_clients && k_count > 1) {
        std::vector<std::future<ModelWeights>> jobs;
        jobs.reserve(k_count);
        for (std::size_t k = 0; k < k_count; ++k)
            jobs.push_back(std::async(std::launch::async, run_client, k));
        // Collect in client order so aggregation sums in a fixed order.
        for (std::size_t k = 0; k < k_count; ++k)
            updates[k] = ClientUpdate{k, global.round, jobs[k].get(), clients[k].size()};
    } else {
        for (std::size_t k = 0; k < k_count; ++k)
            updates[k] = ClientUpdate{k, global.round, run_client(k), clients[k].size()};
    }

    GlobalModel next = aggregate(updates, cfg.aggregation);
    next.round = global.round + 1;
    return next;
}

FederationResult run_federation(const std::vector<Dataset>& clients, const FederationConfig& cfg) {
    check_clients(clients);
    if (cfg.rounds < 1) throw std::invalid_argument("federation: rounds must be >= 1");

    FederationResult result;
    result.model.round = 0;
    result.model.weights = ModelWeights::zeros(clients.front().dim());
    result.history.reserve(static_cast<std::size_t>(cfg.rounds) + 1);
    result.history.push_back(result.model);
    for (int t = 0; t < cfg.rounds; ++t) {
        result.model = run_round(result.model, clients, cfg);
        result.history.push_back(result.model);
    }
    return result;
}

ModelWeights personalize(const ModelWeights& global, const Dataset& data, int steps,
                         double alpha, const PenaltyConfig& penalty) {
    if (steps < 0) throw std::invalid_argument("personalize: steps must be >= 0");
    if (data.rows.empty()) throw std::invalid_argument("personalize: empty dataset");

    std::vector<int> all(data.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);

    ModelWeights weights = global;
    for (int s = 0; s < steps; ++s) {
        const ObjectiveValue g = objective_and_gradient(weights, data, all, penalty);
        sgd_step(weights, g, alpha);
        if (!weights.finite())
            throw std::runtime_error("personalize: divergence at step " + std::to_string(s));
    }
    return weights;
}

std::string to_json(const GlobalModel& model) {
    nlohmann::json j;
    j["format"] = kModelTag;
    j["round"] = model.round;
    j["dim"] = model.weights.w.size();
    j["coefficients"] = flat_coefficients(model.weights);
    return j.dump();
}

std::string to_json(const ClientUpdate& update) {
    nlohmann::json j;
    j["format"] = kUpdateTag;
    j["client"] = update.client;
    j["round"] = update.round;
    j["n"] = update.n;
    j["dim"] = update.weights.w.size();
    j["coefficients"] = flat_coefficients(update.weights);
    return j.dump();
}

GlobalModel global_model_from_json(const std::string& text) {
    const nlohmann::json j = parse_tagged(text, kModelTag);
    GlobalModel out;
    out.round = j.value("round", 0);
    out.weights = weights_from_flat(j["coefficients"].get<std::vector<double>>());
    if (j.contains("dim") && j["dim"].get<std::size_t>() != out.weights.w.size())
        throw std::invalid_argument("model json: coefficient count does not match dim");
    return out;
}

ClientUpdate client_update_from_json(const std::string& text) {
    const nlohmann::json j = parse_tagged(text, kUpdateTag);
    ClientUpdate out;
    out.client = j.value("client", std::size_t{0});
    out.round = j.value("round", 0);
    out.n = j.value("n", std::size_t{0});
    out.weights = weights_from_flat(j["coefficients"].get<std::vector<double>>());
    if (j.contains("dim") && j["dim"].get<std::size_t>() != out.weights.w.size())
        throw std::invalid_argument("model json: coefficient count does not match dim");
    return out;
}

}  // namespace fairfml

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fairfml/dataset.hpp"
#include "fairfml/objective.hpp"
#include "fairfml/trainer.hpp"

namespace fairfml {

enum class Framework { fedavg, perfedavg };

enum class Aggregation {
    uniform,          // plain average of client models, every client counts once
    sample_weighted,  // weight each client by its sample count n_k / n
};

struct FederationConfig {
    Framework framework = Framework::fedavg;
    int rounds = 10;   // T
    TrainConfig train; // local pass per round: epochs here is E_k
    Aggregation aggregation = Aggregation::uniform;

    // perfedavg only: inner adaptation steps and step size (alpha). With
    // alpha == 0 the meta-update collapses to the plain SGD step, so a
    // perfedavg run is then bit-identical to fedavg.
    int inner_steps = 1;
    double inner_learning_rate = 0.1;

    // Run client updates on worker threads. Output is required to be
    // bit-identical to the sequential path; this only changes wall time.
    bool parallel_clients = false;
};

// What a client sends back to the server after its local pass: model
// coefficients plus just enough metadata to aggregate safely. No raw rows
// ever cross this boundary.
struct ClientUpdate {
    std::size_t client = 0;
    int round = 0;
    ModelWeights weights;
    std::size_t n = 0;
};

struct GlobalModel {
    int round = 0;  // 0 = the zero-initialized model, t = after round t
    ModelWeights weights;
};

struct FederationResult {
    GlobalModel model;                 // after the final round
    std::vector<GlobalModel> history;  // rounds + 1 entries, history[0] is the init
};

// Per-(client, round) seed so local shuffles never collide across clients
// or rounds but stay reproducible from the one experiment seed.
std::uint64_t client_round_seed(std::uint64_t seed, std::size_t client, int round);

// Average client models into the next global model. `uniform` ignores
// sample counts (each site is one vote); `sample_weighted` uses n_k /
// sum(n_k). Throws on empty input, mixed rounds, or mixed dimensions.
GlobalModel aggregate(const std::vector<ClientUpdate>& updates, Aggregation how);

// One client's local pass for one round, starting from the current global
// weights. FedAvg runs plain minibatch SGD; Per-FedAvg (first-order
// variant) adapts on each batch first: w_tmp = w - alpha * grad(w),
// repeated inner_steps times, then w -= eta * grad(w_tmp), inner and outer
// gradients on the same batch. cfg.train.seed must already be the
// per-client seed.
ModelWeights local_update(const ModelWeights& global, const Dataset& data,
                          const TrainConfig& cfg, const FederationConfig& fed);

// Train every client from global.weights (round index global.round),
// aggregate, and return the round+1 model. Client failures are rethrown
// with the client id attached.
GlobalModel run_round(const GlobalModel& global, const std::vector<Dataset>& clients,
                      const FederationConfig& cfg);

// Full loop from the zero model. Every client participates every round.
FederationResult run_federation(const std::vector<Dataset>& clients, const FederationConfig& cfg);

// Client-side adaptation of a trained global model: `steps` full-batch
// gradient steps of size alpha on local data. This is how a perfedavg
// global model is turned into the model a client actually deploys.
ModelWeights personalize(const ModelWeights& global, const Dataset& data, int steps,
                         double alpha, const PenaltyConfig& penalty);

// Wire format for shipping models between processes: a small JSON object
// holding the metadata plus the coefficient vector laid out as
// [w_0 .. w_{d-1}, b]. Doubles round-trip exactly.
std::string to_json(const GlobalModel& model);
std::string to_json(const ClientUpdate& update);
GlobalModel global_model_from_json(const std::string& text);
ClientUpdate client_update_from_json(const std::string& text);

}  // namespace fairfml

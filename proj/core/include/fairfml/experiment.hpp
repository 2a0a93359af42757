#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairfml/csv.hpp"
#include "fairfml/data_pipeline.hpp"
#include "fairfml/dataset.hpp"
#include "fairfml/federation.hpp"
#include "fairfml/metrics.hpp"
#include "fairfml/trainer.hpp"
#include "fairfml/tuning.hpp"

namespace fairfml {

// The six-model comparison roster. "local" trains one model per client on
// that client's data alone; the fairfml variants are the penalized
// federated runs with the resolved (lambda, gamma).
enum class ModelKind { central, local, fedavg, perfedavg, fairfml_fedavg, fairfml_perfedavg };

// Stable tokens used in config files, reports and the CLI:
// central, local, fedavg, perfedavg, fairfml-fedavg, fairfml-perfedavg.
std::string model_token(ModelKind kind);
ModelKind model_kind_from_token(const std::string& token);
std::vector<ModelKind> full_roster();

struct SyntheticSpec {
    std::size_t n = 8000;
    std::size_t d = 5;
    double bias = 2.0;  // group term in the outcome model; 0 = fair data
    std::uint64_t seed = 1;
};

struct CsvSource {
    std::string path;
    CsvSchema schema;
};

enum class DataSource { synthetic, csv };

struct ExperimentConfig {
    DataSource source = DataSource::synthetic;
    SyntheticSpec synthetic;
    CsvSource csv;  // read when source == csv

    PartitionSpec partition;
    double train_fraction = 0.7;
    std::uint64_t split_seed = 2024;
    // Default scales with full-cohort statistics (train and test pooled);
    // set this to compute the scale from training rows only.
    bool standardize_train_only = false;
    // Empty = every feature the schema marks continuous.
    std::vector<std::string> standardize_features;

    // federation.train carries the shared SGD hyperparameters; its penalty
    // lambda/gamma are ignored here (plain models zero them, fairfml models
    // use the resolved pair below), only the form matters.
    FederationConfig federation;
    LambdaSweepConfig sweep;
    TuningConfig tuning;
    std::optional<double> pinned_lambda;  // pin both to skip sweep + tuning
    std::optional<double> pinned_gamma;

    std::vector<ModelKind> roster = full_roster();
    double threshold = 0.5;
    std::string output_dir = "out";
    bool emit_csv = true;
    bool emit_markdown = true;
    bool emit_metadata = true;
};

// The in-one-command demo: synthetic-bias cohort (n=8000, d=5, bias=2),
// four region-skewed clients, reference hyperparameters (lr 0.1, batch 128,
// 10 rounds, 10+10 gamma grid over [0.0001, 0.1]).
ExperimentConfig default_demo_config();

// Config round-trips through a documented JSON layout covering every field;
// missing keys fall back to the defaults above.
std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// The five report cells; unset = undefined on that slice (kept NA, never 0).
struct MetricSummary {
    std::optional<double> auroc, dpd, dpr, eod, eor;
};

MetricSummary summarize(const MetricsReport& report);
// Mean of the defined cells, metric by metric.
MetricSummary average_summary(const std::vector<MetricSummary>& rows);
// Same semantics as the MetricsReport overload: AUROC absolute, fairness
// metrics as percent change vs the baseline cell.
BaselineDelta baseline_delta(const MetricSummary& row, const MetricSummary& baseline);

struct ModelBlock {
    ModelKind kind = ModelKind::central;
    std::vector<MetricSummary> per_client;  // parallel to ExperimentResult::clients
    MetricSummary average;
};

struct ExperimentResult {
    ExperimentConfig config;  // as run
    std::vector<std::string> clients;
    double lambda = 0.0;  // resolved fairness hyperparameters
    double gamma = 0.0;
    bool tuned = false;  // false when pinned or when no fairfml model ran
    std::vector<double> lambda_per_client;        // per-client sweep results
    std::vector<LambdaSweepResult> sweep_traces;  // parallel to clients
    std::optional<TwoStepGammaResult> gamma_audit;
    std::vector<ModelBlock> models;  // roster order
};

// Runs the full comparison: ingest/generate, partition, standardize, split,
// resolve (lambda, gamma) for the fairfml models (per-client sweep, then the
// two-step gamma search, unless pinned), train every roster model and
// evaluate it on every client's test split. Deterministic given the seeds
// in the config. Failures carry the model/client context.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Canonical CSV: header, one row per (client, model) in client-major order,
// then an "average" block, columns auc, dpd, dpr, eod, eor followed by the
// delta-vs-central annotations. Undefined cells are NA; numbers are
// shortest-round-trip so a re-parse recovers them exactly.
std::string report_csv(const ExperimentResult& result);

// The same table for humans: resolved hyperparameters up top, metrics
// rounded to 4 decimals, plus the site-average change vs central.
std::string report_markdown(const ExperimentResult& result);

// Carries everything needed to re-emit a report without re-running.
std::string result_to_json(const ExperimentResult& result);
ExperimentResult result_from_json(const std::string& text);

// Writes report.csv / report.md / metadata.json / result.json into out_dir
// (created if needed), plus sweep traces and gamma audit tables when the
// run tuned. Returns the paths written.
std::vector<std::string> emit_report(const ExperimentResult& result, const std::string& out_dir);

}  // namespace fairfml

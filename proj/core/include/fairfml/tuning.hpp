#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "fairfml/dataset.hpp"
#include "fairfml/federation.hpp"

namespace fairfml {

enum class LambdaPolicy { min_across_clients, max_across_clients };

// How step 2 narrows the search around the step-1 winner. The one_interval
// mode refines the single coarse interval on the side of the rule's
// runner-up; two_interval takes both neighboring intervals.
enum class RefineMode { one_interval, two_interval };

struct TuningConfig {
    int coarse_count = 10;  // m
    int refine_count = 10;  // m'
    double gamma_lo = 0.0001;
    double gamma_hi = 0.1;
    double auroc_slack = 0.02;  // delta: how much mean AUROC may trail the best
    RefineMode refine = RefineMode::one_interval;
    int lambda_count = 1;
    LambdaPolicy lambda_policy = LambdaPolicy::min_across_clients;
};

// count equally spaced points from lo to hi inclusive. lo < hi, count >= 2;
// strictly increasing, endpoints exact.
std::vector<double> gamma_grid(double lo, double hi, int count);

struct LambdaCandidates {
    std::vector<double> values;  // ascending, inside (0, lambda_star]
    double lambda_star = 0.0;
    bool degenerate = false;  // the sweep gave lambda* = 0; values is just {0}
};

// Combine per-client sweep results into lambda* (min or max across clients)
// and spread `count` candidates over (0, lambda*]: lambda* * i / count.
LambdaCandidates lambda_candidates(std::span<const double> lambda_k, LambdaPolicy policy,
                                   int count);

struct GammaRow {
    double gamma = 0.0;
    // Means over clients, skipping cells a client could not define.
    std::optional<double> auroc, dpd, dpr, eod, eor;
    bool eligible = false;
    bool selected = false;
};

struct GammaTable {
    std::vector<GammaRow> rows;  // grid order
    std::size_t selected_index = 0;
    double selected_gamma = 0.0;
};

// The automated stand-in for picking a row off the table by hand: one is
// eligible when its mean AUROC is within `auroc_slack` of the table's best
// and its DPD/EOD means are defined; among those, minimize (DPD + EOD) / 2,
// ties going to the smaller gamma. Pure function of the table cells (so
// re-applying it to an emitted table reproduces the choice); sets the
// eligible/selected flags. A single-row table is selected unconditionally.
std::size_t apply_selection_rule(std::vector<GammaRow>& rows, double auroc_slack);

// Full federated training per grid value at the given lambda, evaluated on
// each client's test split (perfedavg models are personalized on the
// client's train split first), averaged across clients, then run through
// apply_selection_rule. train_clients and test_clients pair up by index.
GammaTable optimize_gamma(std::span<const double> grid, double lambda,
                          const std::vector<Dataset>& train_clients,
                          const std::vector<Dataset>& test_clients,
                          const FederationConfig& fed, double auroc_slack,
                          double threshold = 0.5);

struct TwoStepGammaResult {
    GammaTable coarse;
    GammaTable refined;
    double gamma = 0.0;
    RefineMode refine = RefineMode::one_interval;
    double refine_lo = 0.0, refine_hi = 0.0;  // the step-2 range actually used
};

// Step 1: optimize_gamma over gamma_grid(lo, hi, m). Step 2: refine around
// the winner per cfg.refine (clamped to the coarse grid at the boundary
// positions) with m' points and pick again.
TwoStepGammaResult two_step_gamma(double lambda, const std::vector<Dataset>& train_clients,
                                  const std::vector<Dataset>& test_clients,
                                  const FederationConfig& fed, const TuningConfig& cfg,
                                  double threshold = 0.5);

// Audit CSV: gamma, mean AUC, DPD, DPR, EOD, EOR, eligible, selected.
// Undefined cells come out as NA.
void write_gamma_table_csv(const GammaTable& table, std::ostream& out);

}  // namespace fairfml

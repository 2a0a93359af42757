#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fairfml/dataset.hpp"
#include "fairfml/objective.hpp"

namespace fairfml {

/// Aligned per-row predictions. Outcomes use {0,1} selection semantics here
/// (-1 maps to 0); decision = 1 iff score >= threshold.
struct PredictionSet {
    std::vector<double> score;
    std::vector<int> decision;
    std::vector<int> group;
    std::vector<int> outcome;

    std::size_t size() const { return score.size(); }
};

PredictionSet predict(const ModelWeights& weights, const Dataset& data,
                      double threshold = 0.5);

/// Probability a random positive outscores a random negative, ties counted
/// one half (midrank method). Throws on single-class input.
double auroc(const PredictionSet& preds);

struct RateCell {
    std::size_t n = 0;
    double rate = 0.0;  // mean decision within the cell; meaningless when n == 0
};

/// AUROC plus the four group-fairness metrics. Lower DPD/EOD and higher
/// DPR/EOR indicate greater fairness. Undefined values (zero-denominator
/// ratios, fully skipped outcome slices, single-class AUROC) stay unset
/// rather than collapsing to 0 or 1.
struct MetricsReport {
    std::optional<double> auroc;
    std::optional<double> dpd, dpr, eod, eor;
    std::array<RateCell, 2> by_group;                     // selection rate per group
    std::array<std::array<RateCell, 2>, 2> by_group_outcome;  // [group][outcome]
    std::vector<int> skipped_slices;  // outcome values whose EO slice had an empty group
    bool ratio_undefined = false;     // a needed ratio had max rate 0
};

/// Selection rates per group and per (group, outcome) cell; DPD = max-min,
/// DPR = min/max, EOD = worst per-outcome gap, EOR = worst per-outcome
/// ratio. Throws when a group is entirely absent. Also fills AUROC when both
/// outcome classes are present.
MetricsReport fairness_metrics(const PredictionSet& preds);

struct SubgroupRow {
    std::string label;
    std::size_t n = 0;
    double outcome_prevalence = 0.0;
    bool flagged = false;  // single-group subgroup: fairness metrics undefined
    std::optional<MetricsReport> metrics;
};

/// Slices rows by an aux attribute and reports fairness within each slice,
/// ordered by descending n (ties by label).
std::vector<SubgroupRow> subgroup_report(const ModelWeights& weights, const Dataset& data,
                                         const std::string& subgroup_attr,
                                         double threshold = 0.5);

/// Percent change per fairness metric, 100 * (report - baseline) / baseline;
/// AUROC as an absolute difference. Zero or undefined baselines give an
/// unset delta, never infinity.
struct BaselineDelta {
    std::optional<double> auroc_abs;
    std::optional<double> dpd_pct, dpr_pct, eod_pct, eor_pct;
};

BaselineDelta baseline_delta(const MetricsReport& report, const MetricsReport& baseline);

}  // namespace fairfml

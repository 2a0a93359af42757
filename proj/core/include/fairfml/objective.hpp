#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fairfml/dataset.hpp"

namespace fairfml {

struct ModelWeights {
    std::vector<double> w;
    double b = 0.0;

    static ModelWeights zeros(std::size_t d) { return ModelWeights{std::vector<double>(d, 0.0), 0.0}; }
    bool finite() const;
    double weight_norm_sq() const;  // ||w||^2, intercept excluded
};

enum class PenaltyForm {
    squared_average,  // (u . w)^2 -- bounded below, penalizes disparity in either direction
    signed_average,   // u . w     -- the literal cross-group average
};

struct PenaltyConfig {
    double lambda = 0.0;  // fairness weight, >= 0
    double gamma = 0.0;   // l2 weight, >= 0
    PenaltyForm form = PenaltyForm::squared_average;
};

// Overflow-safe sigmoid and ln(1 + e^x).
double sigmoid(double x);
double log1p_exp(double x);

/// Mean over the batch of ln(1 + exp(-y * (w.x + b))), y in {-1,+1}.
double logistic_loss(const ModelWeights& weights, const Dataset& batch);
double logistic_loss(const ModelWeights& weights, const Dataset& data,
                     std::span<const int> rows);

/// u = (1 / (n1*n2)) * sum over cross-group pairs with matching labels of
/// (x_i - x_j), where group 1 rows are on the i side. Zero vector when either
/// group is absent from the batch. Computed in O(n*d) from per-(group,label)
/// feature sums; equals the pairwise definition.
std::vector<double> penalty_direction(const Dataset& data, std::span<const int> rows);

/// signed_average: u.w; squared_average: (u.w)^2. Degenerate batches (one
/// group missing) contribute zero.
double fairness_penalty(const ModelWeights& weights, const Dataset& batch, PenaltyForm form);
double fairness_penalty(const ModelWeights& weights, const Dataset& data,
                        std::span<const int> rows, PenaltyForm form);

struct ObjectiveValue {
    double value = 0.0;
    std::vector<double> grad_w;
    double grad_b = 0.0;
};

/// value = logistic_loss + lambda * fairness_penalty + gamma * ||w||^2 with
/// the exact analytic gradient. The intercept is excluded from the l2 term
/// and the penalty; grad_b carries only the logistic part.
ObjectiveValue objective_and_gradient(const ModelWeights& weights, const Dataset& batch,
                                      const PenaltyConfig& cfg);
ObjectiveValue objective_and_gradient(const ModelWeights& weights, const Dataset& data,
                                      std::span<const int> rows, const PenaltyConfig& cfg);

}  // namespace fairfml

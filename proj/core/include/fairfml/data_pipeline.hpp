#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fairfml/dataset.hpp"

namespace fairfml {

enum class PartitionStrategy { categorical_skew, quantile_bands };

struct PartitionSpec {
    std::string attribute;  // aux attribute every row must carry
    PartitionStrategy strategy = PartitionStrategy::categorical_skew;
    int clients = 4;   // K >= 2
    double skew = 1.0; // in (0, 1]; 1 = fully skewed
    std::uint64_t seed = 0;
};

/// Pools per-client (count, sum, sum-of-squares) aggregates for the named
/// features -- no row-level exchange -- then rescales each named feature to
/// (x - mean) / sd in every client. Sample sd, denominator n-1. Throws when
/// a pooled sd is zero or the pooled count is below 2.
std::pair<StandardizationParams, std::vector<Dataset>> federated_standardize(
    const std::vector<Dataset>& clients, const std::vector<std::string>& continuous_features);

/// Applies already-computed standardization params to another dataset (for
/// the train-only-statistics mode, where test rows are scaled with the
/// training params).
Dataset apply_standardization(const StandardizationParams& params, const Dataset& data);

/// Splits a dataset into K simulated clients.
///
/// categorical-skew: the attribute's categories (sorted) are assigned
/// preferred clients round-robin; each row lands on its category's preferred
/// client with probability `skew` and on a uniformly random client otherwise.
///
/// quantile-bands: rows are sorted by the attribute's numeric value (ties
/// keep input order), cut into K near-equal contiguous bands, then a
/// (1-skew) fraction of rows, chosen uniformly, has its band assignments
/// permuted among themselves, which creates overlap while preserving
/// per-client counts.
///
/// The outputs' disjoint union equals the input; deterministic given seed.
std::vector<Dataset> partition(const Dataset& data, const PartitionSpec& spec);

/// Shuffle-then-cut split; |train| = round(fraction * n). Throws when either
/// side would be empty.
std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction,
                                  std::uint64_t seed);

/// Synthetic tabular cohort with a controllable group disparity.
///
/// Generative law (all draws from the seeded stream, fixed draw order):
///   features     x_0..x_{d-1} ~ iid N(0,1); the last feature is a group
///                proxy and carries no direct outcome signal.
///   group        P(g=1 | x) = sigmoid(1.5 * x_{d-1}).
///   outcome      P(y=+1 | x, g) = sigmoid(-1.2 + sum_{j<d-1} c * x_j
///                + bias * g), c = 1.2 / sqrt(max(1, d-1)).
///   aux "region" r0..r3 from x_1 cut at {-1, 0, 1} (index clamped for tiny
///                d), so region-partitioned clients are heterogeneous.
///   aux "age"    64 + 16 * x_2, clamped to [18, 100], 1 decimal.
///
/// With bias = 0 the outcome is independent of the group: the group depends
/// only on the proxy feature, which has zero outcome coefficient. With large
/// bias the trained model can infer the group through the proxy feature,
/// which is what the fairness penalty is meant to correct.
Dataset generate_synthetic(std::size_t n, std::size_t d, double bias, std::uint64_t seed);

}  // namespace fairfml

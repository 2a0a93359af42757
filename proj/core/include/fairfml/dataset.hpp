#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace fairfml {

enum class FeatureKind { continuous, binary };

/// Column roles of a tabular dataset. Feature order is significant: it fixes
/// the coordinate order of weight vectors trained on the data.
struct Schema {
    std::vector<std::string> feature_names;
    std::vector<FeatureKind> feature_kinds;  // aligned with feature_names
    std::string outcome_name = "outcome";
    std::string group_name = "group";
    std::vector<std::string> aux_names;
    // Raw sensitive-column labels mapped to {0, 1}, in that order.
    // Empty when the column was already numeric 0/1.
    std::vector<std::string> group_categories;
};

struct Example {
    std::vector<double> features;
    int outcome = 1;  // -1 or +1
    int group = 0;    // 0 or 1
    // Raw attributes carried through for partitioning and subgroup reports.
    std::map<std::string, std::string> aux;
};

struct Dataset {
    Schema schema;
    std::vector<Example> rows;

    std::size_t dim() const { return schema.feature_names.size(); }
    std::size_t size() const { return rows.size(); }
    std::size_t group_count(int g) const;

    /// Throws std::invalid_argument on any broken invariant: non-finite or
    /// wrong-arity feature vectors, outcome outside {-1,+1}, group outside
    /// {0,1}, or dimension zero.
    void validate() const;
};

/// Full-cohort per-feature location/scale, sample standard deviation
/// (denominator n-1).
struct StandardizationParams {
    std::vector<std::string> feature_names;
    std::vector<double> mean;
    std::vector<double> stddev;
};

}  // namespace fairfml

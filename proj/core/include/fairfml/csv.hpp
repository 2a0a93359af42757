#pragma once

#include <string>
#include <vector>

#include "fairfml/dataset.hpp"

namespace fairfml {

/// Declared column roles for CSV ingestion.
struct CsvSchema {
    std::string outcome_column = "outcome";
    std::string group_column = "group";
    // Empty means: every column that is not outcome/group/aux is a feature,
    // in header order.
    std::vector<std::string> feature_columns;
    std::vector<std::string> aux_columns;
    // Declared ordering of the two sensitive categories: first -> 0,
    // second -> 1. Empty: numeric 0/1 is taken as-is, otherwise the two
    // observed labels are ordered lexicographically.
    std::vector<std::string> group_order;
};

/// Reads a header CSV into a Dataset. Outcomes {0,1} are mapped to {-1,+1}
/// (0 -> -1); {-1,+1} passes through. Row order is preserved. Errors carry
/// the offending file line and column name.
Dataset load_csv(const std::string& path, const CsvSchema& schema);

/// Writes features / outcome (-1 or 1) / group (0 or 1; raw label when the
/// schema recorded categories) / aux columns. Doubles are written in
/// shortest-round-trip form.
void write_csv(const Dataset& data, const std::string& path);

/// One CSV per client (client_0.csv, ...) plus manifest.csv with
/// client id, n, group counts and outcome prevalence.
void write_partition_csvs(const std::vector<Dataset>& clients, const std::string& out_dir);

// Low-level helpers shared with report emission.
std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);
std::string format_double(double v);  // shortest round-trip

}  // namespace fairfml

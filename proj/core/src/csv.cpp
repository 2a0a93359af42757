#include "fairfml/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fairfml {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.data();
    const char* end = begin + s.size();
    while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end > begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
    if (begin == end) return false;
    auto [ptr, ec] = std::from_chars(begin, end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
    while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
    return s.substr(a, b - a);
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

Dataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream in(path);
    if (!in) fail("cannot open CSV file: " + path);

    std::string header_line;
    if (!std::getline(in, header_line)) fail(path + ": empty file");
    const std::vector<std::string> header = split_csv_line(header_line);

    auto column_index = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (trim(header[i]) == name) return static_cast<int>(i);
        return -1;
    };
    auto require_column = [&](const std::string& name) {
        const int idx = column_index(name);
        if (idx < 0) fail(path + ": missing column '" + name + "'");
        return idx;
    };

    const int outcome_idx = require_column(schema.outcome_column);
    const int group_idx = require_column(schema.group_column);

    std::vector<std::string> feature_names = schema.feature_columns;
    if (feature_names.empty()) {
        for (const auto& raw : header) {
            const std::string name = trim(raw);
            if (name == schema.outcome_column || name == schema.group_column) continue;
            if (std::find(schema.aux_columns.begin(), schema.aux_columns.end(), name) !=
                schema.aux_columns.end())
                continue;
            feature_names.push_back(name);
        }
        if (feature_names.empty()) fail(path + ": no feature columns");
    }

    std::vector<int> feature_idx;
    for (const auto& name : feature_names) feature_idx.push_back(require_column(name));
    std::vector<int> aux_idx;
    for (const auto& name : schema.aux_columns) aux_idx.push_back(require_column(name));

    // First pass: raw cells, so the group mapping can be decided from the
    // full set of observed categories.
    struct RawRow {
        std::vector<double> features;
        double outcome;
        std::string group;
        std::vector<std::string> aux;
    };
    std::vector<RawRow> raw;
    std::set<std::string> group_values;
    bool outcome_saw_zero = false, outcome_saw_minus = false;

    std::string line;
    int line_no = 1;  // header was line 1
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::vector<std::string> cells = split_csv_line(line);
        if (cells.size() != header.size())
            fail(path + ": line " + std::to_string(line_no) + ": expected " +
                 std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));

        RawRow row;
        row.features.reserve(feature_idx.size());
        for (std::size_t j = 0; j < feature_idx.size(); ++j) {
            double v;
            if (!parse_double(cells[feature_idx[j]], v))
                fail(path + ": line " + std::to_string(line_no) + ", column '" +
                     feature_names[j] + "': non-numeric value '" +
                     trim(cells[feature_idx[j]]) + "'");
            row.features.push_back(v);
        }
        if (!parse_double(cells[outcome_idx], row.outcome) ||
            (row.outcome != 0.0 && row.outcome != 1.0 && row.outcome != -1.0))
            fail(path + ": line " + std::to_string(line_no) + ", column '" +
                 schema.outcome_column + "': outcome must be 0/1 or -1/+1, got '" +
                 trim(cells[outcome_idx]) + "'");
        if (row.outcome == 0.0) outcome_saw_zero = true;
        if (row.outcome == -1.0) outcome_saw_minus = true;

        row.group = trim(cells[group_idx]);
        if (row.group.empty())
            fail(path + ": line " + std::to_string(line_no) + ", column '" +
                 schema.group_column + "': empty sensitive value");
        group_values.insert(row.group);
        for (int idx : aux_idx) row.aux.push_back(trim(cells[idx]));
        raw.push_back(std::move(row));
    }
    if (raw.empty()) fail(path + ": empty file (no data rows)");
    if (outcome_saw_zero && outcome_saw_minus)
        fail(path + ": column '" + schema.outcome_column + "' mixes 0/1 and -1/+1 encodings");
    if (group_values.size() > 2)
        fail(path + ": non-binary sensitive column '" + schema.group_column + "' (" +
             std::to_string(group_values.size()) + " distinct values)");

    // Decide the {0,1} mapping of the sensitive column.
    std::vector<std::string> categories;
    if (!schema.group_order.empty()) {
        if (schema.group_order.size() != 2)
            fail(path + ": group_order must list exactly two categories");
        for (const auto& v : group_values)
            if (v != schema.group_order[0] && v != schema.group_order[1])
                fail(path + ": sensitive value '" + v + "' not in declared group order");
        categories = schema.group_order;
    } else if (group_values.size() == 2 || group_values.size() == 1) {
        categories.assign(group_values.begin(), group_values.end());  // lexicographic
    }
    const bool numeric_01 = categories.size() <= 2 &&
                            std::all_of(categories.begin(), categories.end(),
                                        [](const std::string& s) { return s == "0" || s == "1"; });

    Dataset data;
    data.schema.feature_names = feature_names;
    data.schema.outcome_name = schema.outcome_column;
    data.schema.group_name = schema.group_column;
    data.schema.aux_names = schema.aux_columns;
    if (!numeric_01) data.schema.group_categories = categories;

    data.rows.reserve(raw.size());
    for (auto& r : raw) {
        Example ex;
        ex.features = std::move(r.features);
        ex.outcome = (r.outcome == 1.0) ? 1 : -1;
        if (numeric_01) {
            ex.group = (r.group == "1") ? 1 : 0;
        } else {
            ex.group = (r.group == categories[0]) ? 0 : 1;
        }
        for (std::size_t a = 0; a < schema.aux_columns.size(); ++a)
            ex.aux[schema.aux_columns[a]] = r.aux[a];
        data.rows.push_back(std::move(ex));
    }

    // Mark binary feature columns (every value in {0,1}).
    data.schema.feature_kinds.assign(feature_names.size(), FeatureKind::binary);
    for (std::size_t j = 0; j < feature_names.size(); ++j) {
        for (const auto& row : data.rows) {
            if (row.features[j] != 0.0 && row.features[j] != 1.0) {
                data.schema.feature_kinds[j] = FeatureKind::continuous;
                break;
            }
        }
    }

    data.validate();
    return data;
}

void write_csv(const Dataset& data, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("cannot open for writing: " + path);

    const Schema& s = data.schema;
    for (const auto& name : s.feature_names) out << csv_escape(name) << ',';
    out << csv_escape(s.outcome_name) << ',' << csv_escape(s.group_name);
    for (const auto& name : s.aux_names) out << ',' << csv_escape(name);
    out << '\n';

    for (const auto& row : data.rows) {
        for (double v : row.features) out << format_double(v) << ',';
        out << row.outcome << ',';
        if (s.group_categories.size() == 2)
            out << csv_escape(s.group_categories[row.group]);
        else
            out << row.group;
        for (const auto& name : s.aux_names) {
            auto it = row.aux.find(name);
            out << ',' << (it == row.aux.end() ? "" : csv_escape(it->second));
        }
        out << '\n';
    }
    if (!out) fail("write failed: " + path);
}

void write_partition_csvs(const std::vector<Dataset>& clients, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::ofstream manifest(out_dir + "/manifest.csv");
    if (!manifest) fail("cannot open for writing: " + out_dir + "/manifest.csv");
    manifest << "client,file,n,n_group0,n_group1,outcome_prevalence\n";
    for (std::size_t k = 0; k < clients.size(); ++k) {
        const std::string file = "client_" + std::to_string(k) + ".csv";
        write_csv(clients[k], out_dir + "/" + file);
        std::size_t positives = 0;
        for (const auto& row : clients[k].rows)
            if (row.outcome == 1) ++positives;
        const double prevalence =
            clients[k].rows.empty() ? 0.0
                                    : static_cast<double>(positives) / clients[k].rows.size();
        manifest << k << ',' << file << ',' << clients[k].size() << ','
                 << clients[k].group_count(0) << ',' << clients[k].group_count(1) << ','
                 << format_double(prevalence) << '\n';
    }
}

}  // namespace fairfml

#pragma once

// Shared builders for the unit tests. Everything here is deliberately dumb:
// tests should read like worked examples, not like a second framework.

#include <cmath>
#include <string>
#include <vector>

#include "fairfml/dataset.hpp"
#include "fairfml/rng.hpp"

namespace testutil {

struct Row {
    std::vector<double> x;
    int y = 1;   // -1 or +1
    int g = 0;   // 0 or 1
};

inline fairfml::Dataset make_dataset(const std::vector<Row>& rows) {
    fairfml::Dataset d;
    const std::size_t dim = rows.empty() ? 0 : rows.front().x.size();
    for (std::size_t j = 0; j < dim; ++j) {
        d.schema.feature_names.push_back("x" + std::to_string(j));
        d.schema.feature_kinds.push_back(fairfml::FeatureKind::continuous);
    }
    for (const Row& r : rows) {
        fairfml::Example ex;
        ex.features = r.x;
        ex.outcome = r.y;
        ex.group = r.g;
        d.rows.push_back(std::move(ex));
    }
    return d;
}

// Random instance with both groups and both labels present (retry until so);
// features in [-2, 2).
inline fairfml::Dataset random_dataset(fairfml::rng::Stream& rng, std::size_t n, std::size_t d) {
    for (;;) {
        std::vector<Row> rows(n);
        for (auto& r : rows) {
            r.x.resize(d);
            for (auto& v : r.x) v = 4.0 * rng.uniform01() - 2.0;
            r.y = rng.bernoulli(0.5) ? 1 : -1;
            r.g = rng.bernoulli(0.5) ? 1 : 0;
        }
        bool g0 = false, g1 = false, pos = false, neg = false;
        for (const auto& r : rows) {
            (r.g ? g1 : g0) = true;
            (r.y == 1 ? pos : neg) = true;
        }
        if ((g0 && g1 && pos && neg) || n < 4) return make_dataset(rows);
    }
}

inline bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol; }

}  // namespace testutil

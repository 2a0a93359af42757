#include "fairfml/dataset.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fairfml {

std::size_t Dataset::group_count(int g) const {
    std::size_t n = 0;
    for (const auto& row : rows)
        if (row.group == g) ++n;
    return n;
}

void Dataset::validate() const {
    if (dim() == 0) throw std::invalid_argument("dataset has zero feature dimension");
    if (!schema.feature_kinds.empty() && schema.feature_kinds.size() != dim())
        throw std::invalid_argument("schema feature_kinds not aligned with feature_names");
    const std::size_t d = dim();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Example& row = rows[i];
        if (row.features.size() != d)
            throw std::invalid_argument("row " + std::to_string(i) + ": expected " +
                                        std::to_string(d) + " features, got " +
                                        std::to_string(row.features.size()));
        for (std::size_t j = 0; j < d; ++j)
            if (!std::isfinite(row.features[j]))
                throw std::invalid_argument("row " + std::to_string(i) + ", feature '" +
                                            schema.feature_names[j] + "': non-finite value");
        if (row.outcome != -1 && row.outcome != 1)
            throw std::invalid_argument("row " + std::to_string(i) + ": outcome must be -1 or +1");
        if (row.group != 0 && row.group != 1)
            throw std::invalid_argument("row " + std::to_string(i) + ": group must be 0 or 1");
    }
}

}  // namespace fairfml

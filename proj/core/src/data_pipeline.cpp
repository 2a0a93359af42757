#include "fairfml/data_pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

#include "fairfml/rng.hpp"

namespace fairfml {

namespace {

int feature_index(const Dataset& data, const std::string& name) {
    for (std::size_t j = 0; j < data.schema.feature_names.size(); ++j)
        if (data.schema.feature_names[j] == name) return static_cast<int>(j);
    return -1;
}

const std::string& aux_value(const Example& row, const std::string& attr) {
    auto it = row.aux.find(attr);
    if (it == row.aux.end())
        throw std::invalid_argument("row missing partition attribute '" + attr + "'");
    return it->second;
}

double sigmoid_local(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace

std::pair<StandardizationParams, std::vector<Dataset>> federated_standardize(
    const std::vector<Dataset>& clients, const std::vector<std::string>& continuous_features) {
    if (clients.empty()) throw std::invalid_argument("federated_standardize: no clients");

    const std::size_t f = continuous_features.size();
    std::vector<double> count(f, 0.0), sum(f, 0.0), sumsq(f, 0.0);

    // Per-client aggregates, pooled at the coordinator. Only (count, sum,
    // sum-of-squares) cross the client boundary.
    for (const auto& client : clients) {
        for (std::size_t j = 0; j < f; ++j) {
            const int idx = feature_index(client, continuous_features[j]);
            if (idx < 0)
                throw std::invalid_argument("feature '" + continuous_features[j] +
                                            "' not present in every client");
            for (const auto& row : client.rows) {
                const double v = row.features[idx];
                count[j] += 1.0;
                sum[j] += v;
                sumsq[j] += v * v;
            }
        }
    }

    StandardizationParams params;
    params.feature_names = continuous_features;
    params.mean.resize(f);
    params.stddev.resize(f);
    for (std::size_t j = 0; j < f; ++j) {
        if (count[j] < 2.0)
            throw std::invalid_argument("feature '" + continuous_features[j] +
                                        "': need at least 2 values to standardize");
        const double mean = sum[j] / count[j];
        const double var = (sumsq[j] - count[j] * mean * mean) / (count[j] - 1.0);
        const double sd = std::sqrt(std::max(var, 0.0));
        if (!(sd > 0.0))
            throw std::invalid_argument("feature '" + continuous_features[j] +
                                        "': constant column (sd = 0), cannot standardize");
        params.mean[j] = mean;
        params.stddev[j] = sd;
    }

    std::vector<Dataset> out = clients;
    for (auto& client : out) {
        for (std::size_t j = 0; j < f; ++j) {
            const int idx = feature_index(client, continuous_features[j]);
            for (auto& row : client.rows)
                row.features[idx] = (row.features[idx] - params.mean[j]) / params.stddev[j];
        }
    }
    return {std::move(params), std::move(out)};
}

Dataset apply_standardization(const StandardizationParams& params, const Dataset& data) {
    Dataset out = data;
    for (std::size_t j = 0; j < params.feature_names.size(); ++j) {
        const int idx = feature_index(out, params.feature_names[j]);
        if (idx < 0)
            throw std::invalid_argument("feature '" + params.feature_names[j] +
                                        "' not present in dataset");
        for (auto& row : out.rows)
            row.features[idx] = (row.features[idx] - params.mean[j]) / params.stddev[j];
    }
    return out;
}

std::vector<Dataset> partition(const Dataset& data, const PartitionSpec& spec) {
    if (spec.clients < 2) throw std::invalid_argument("partition: need K >= 2 clients");
    if (!(spec.skew > 0.0 && spec.skew <= 1.0))
        throw std::invalid_argument("partition: skew must be in (0, 1]");
    if (static_cast<std::size_t>(spec.clients) > data.size())
        throw std::invalid_argument("partition: more clients than rows");

    const std::size_t n = data.size();
    const int k = spec.clients;
    std::vector<int> assignment(n, 0);
    rng::Stream stream(rng::mix(spec.seed, 0x9a27u));

    if (spec.strategy == PartitionStrategy::categorical_skew) {
        std::set<std::string> cats;
        for (const auto& row : data.rows) cats.insert(aux_value(row, spec.attribute));
        std::map<std::string, int> preferred;  // category -> client, round-robin over sorted cats
        int next = 0;
        for (const auto& c : cats) preferred[c] = next++ % k;

        for (std::size_t i = 0; i < n; ++i) {
            const int pref = preferred[aux_value(data.rows[i], spec.attribute)];
            assignment[i] = stream.bernoulli(spec.skew)
                                ? pref
                                : static_cast<int>(stream.below(static_cast<std::uint64_t>(k)));
        }
    } else {
        // Sort by numeric attribute, stable on input order, and cut bands.
        std::vector<std::pair<double, std::size_t>> keyed(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::string& raw = aux_value(data.rows[i], spec.attribute);
            double v;
            auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
            if (ec != std::errc() || ptr != raw.data() + raw.size())
                throw std::invalid_argument("attribute '" + spec.attribute +
                                            "' is not numeric ('" + raw +
                                            "'), required for quantile bands");
            keyed[i] = {v, i};
        }
        std::stable_sort(keyed.begin(), keyed.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });

        const std::size_t base = n / k, extra = n % k;
        std::size_t pos = 0;
        for (int c = 0; c < k; ++c) {
            const std::size_t band = base + (static_cast<std::size_t>(c) < extra ? 1 : 0);
            for (std::size_t t = 0; t < band; ++t) assignment[keyed[pos++].second] = c;
        }

        // Exchange step: permute the assignments of a (1-skew) fraction of
        // rows among themselves. Per-client counts are preserved.
        const std::size_t n_exchange =
            static_cast<std::size_t>(std::floor((1.0 - spec.skew) * static_cast<double>(n)));
        if (n_exchange >= 2) {
            std::vector<int> all = rng::permutation(n, stream);
            all.resize(n_exchange);  // the selected rows
            std::vector<int> labels(n_exchange);
            for (std::size_t t = 0; t < n_exchange; ++t) labels[t] = assignment[all[t]];
            const std::vector<int> perm = rng::permutation(n_exchange, stream);
            for (std::size_t t = 0; t < n_exchange; ++t)
                assignment[all[t]] = labels[perm[t]];
        }
    }

    std::vector<Dataset> out(k);
    for (auto& client : out) client.schema = data.schema;
    for (std::size_t i = 0; i < n; ++i) out[assignment[i]].rows.push_back(data.rows[i]);
    return out;
}

std::pair<Dataset, Dataset> split(const Dataset& data, double train_fraction,
                                  std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw std::invalid_argument("split: fraction must be in (0, 1)");
    const std::size_t n = data.size();
    if (n < 2) throw std::invalid_argument("split: need at least 2 rows");

    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(n)));
    if (n_train == 0 || n_train == n)
        throw std::invalid_argument("split: fraction leaves one side empty");

    rng::Stream stream(rng::mix(seed, 0x51f7u));
    const std::vector<int> perm = rng::permutation(n, stream);

    Dataset train, test;
    train.schema = data.schema;
    test.schema = data.schema;
    train.rows.reserve(n_train);
    test.rows.reserve(n - n_train);
    for (std::size_t i = 0; i < n; ++i)
        (i < n_train ? train : test).rows.push_back(data.rows[perm[i]]);
    return {std::move(train), std::move(test)};
}

Dataset generate_synthetic(std::size_t n, std::size_t d, double bias, std::uint64_t seed) {
    if (n < 10) throw std::invalid_argument("generate_synthetic: need n >= 10");
    if (d < 1) throw std::invalid_argument("generate_synthetic: need d >= 1");

    Dataset data;
    for (std::size_t j = 0; j < d; ++j) {
        data.schema.feature_names.push_back("f" + std::to_string(j));
        data.schema.feature_kinds.push_back(FeatureKind::continuous);
    }
    data.schema.aux_names = {"region", "age"};

    const std::size_t proxy = d - 1;
    const double coef = 1.2 / std::sqrt(static_cast<double>(std::max<std::size_t>(1, d - 1)));
    const std::size_t region_src = std::min<std::size_t>(1, d - 1);
    const std::size_t age_src = std::min<std::size_t>(2, d - 1);

    rng::Stream stream(rng::mix(seed, 0x5e6du));
    data.rows.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Example row;
        row.features.resize(d);
        for (std::size_t j = 0; j < d; ++j) row.features[j] = stream.normal();

        row.group = stream.bernoulli(sigmoid_local(1.5 * row.features[proxy])) ? 1 : 0;

        double logit = -1.2 + bias * row.group;
        for (std::size_t j = 0; j + 1 < d; ++j) logit += coef * row.features[j];
        row.outcome = stream.bernoulli(sigmoid_local(logit)) ? 1 : -1;

        const double rv = row.features[region_src];
        const int region = rv < -1.0 ? 0 : rv < 0.0 ? 1 : rv < 1.0 ? 2 : 3;
        row.aux["region"] = "r" + std::to_string(region);

        const double age = std::clamp(64.0 + 16.0 * row.features[age_src], 18.0, 100.0);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", age);
        row.aux["age"] = buf;

        data.rows.push_back(std::move(row));
    }
    return data;
}

}  // namespace fairfml

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "fairfml/csv.hpp"
#include "fairfml/data_pipeline.hpp"
#include "fairfml/rng.hpp"
#include "helpers.hpp"

using namespace fairfml;

namespace {

namespace fs = std::filesystem;

// Unique temp file per call; content written verbatim.
fs::path temp_csv(const std::string& content) {
    static int counter = 0;
    fs::path p = fs::temp_directory_path() /
                 ("fairfml_test_" + std::to_string(++counter) + "_" +
                  std::to_string(::getpid()) + ".csv");
    std::ofstream(p) << content;
    return p;
}

// Canonical serialization of a row for multiset comparisons.
std::string row_key(const Example& ex) {
    std::ostringstream os;
    for (double v : ex.features) os << format_double(v) << '|';
    os << ex.outcome << '|' << ex.group;
    for (const auto& [k, v] : ex.aux) os << '|' << k << '=' << v;
    return os.str();
}

std::vector<std::string> sorted_keys(const Dataset& d) {
    std::vector<std::string> keys;
    for (const auto& ex : d.rows) keys.push_back(row_key(ex));
    std::sort(keys.begin(), keys.end());
    return keys;
}

std::vector<std::string> sorted_keys(const std::vector<Dataset>& parts) {
    std::vector<std::string> keys;
    for (const auto& p : parts)
        for (const auto& ex : p.rows) keys.push_back(row_key(ex));
    std::sort(keys.begin(), keys.end());
    return keys;
}

}  // namespace

TEST_CASE("load_csv maps 0/1 outcomes to -1/+1 and keeps row order") {
    const auto p = temp_csv(
        "x0,x1,outcome,group\n"
        "1.5,2.0,1,0\n"
        "0.5,-1.0,0,1\n"
        "2.5,0.25,1,1\n"
        "-3.0,4.0,0,0\n");
    const Dataset d = load_csv(p.string(), CsvSchema{});
    REQUIRE(d.size() == 4);
    CHECK(d.dim() == 2);
    CHECK(d.rows[0].outcome == 1);
    CHECK(d.rows[1].outcome == -1);
    CHECK(d.rows[2].outcome == 1);
    CHECK(d.rows[3].outcome == -1);
    CHECK(d.rows[1].group == 1);
    CHECK(d.rows[0].features[0] == 1.5);
    CHECK(d.rows[3].features[1] == 4.0);
    d.validate();
    fs::remove(p);
}

TEST_CASE("load_csv accepts -1/+1 outcomes as-is") {
    const auto p = temp_csv("x0,outcome,group\n1,-1,0\n2,1,1\n");
    const Dataset d = load_csv(p.string(), CsvSchema{});
    CHECK(d.rows[0].outcome == -1);
    CHECK(d.rows[1].outcome == 1);
    fs::remove(p);
}

TEST_CASE("load_csv rejects a three-category sensitive column") {
    const auto p = temp_csv("x0,outcome,group\n1,0,a\n2,1,b\n3,0,c\n");
    CHECK_THROWS_WITH_AS(load_csv(p.string(), CsvSchema{}),
                         doctest::Contains("non-binary sensitive column"), std::runtime_error);
    fs::remove(p);
}

TEST_CASE("load_csv names the offending cell for a non-numeric feature") {
    const auto p = temp_csv("x0,x1,outcome,group\n1,2,0,0\n3,NA,1,1\n");
    try {
        load_csv(p.string(), CsvSchema{});
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);  // 1-based, header is line 1
        CHECK(msg.find("'x1'") != std::string::npos);
    }
    fs::remove(p);
}

TEST_CASE("load_csv rejects an empty file and a missing column") {
    const auto empty = temp_csv("");
    CHECK_THROWS_AS(load_csv(empty.string(), CsvSchema{}), std::runtime_error);
    fs::remove(empty);

    const auto no_group = temp_csv("x0,outcome\n1,0\n");
    CHECK_THROWS_WITH_AS(load_csv(no_group.string(), CsvSchema{}),
                         doctest::Contains("missing column"), std::runtime_error);
    fs::remove(no_group);
}

TEST_CASE("write_csv then load_csv round-trips rows exactly") {
    rng::Stream rng(404);
    Dataset d = testutil::random_dataset(rng, 37, 3);
    // exercise aux columns too
    d.schema.aux_names = {"site"};
    for (std::size_t i = 0; i < d.rows.size(); ++i)
        d.rows[i].aux["site"] = (i % 2) ? "north" : "south";

    const fs::path p = fs::temp_directory_path() / "fairfml_rt.csv";
    write_csv(d, p.string());

    CsvSchema schema;
    schema.aux_columns = {"site"};
    const Dataset back = load_csv(p.string(), schema);
    REQUIRE(back.size() == d.size());
    CHECK(sorted_keys(back) == sorted_keys(d));
    // order preserved, not just multiset
    for (std::size_t i = 0; i < d.size(); ++i)
        CHECK(back.rows[i].features == d.rows[i].features);
    fs::remove(p);
}

TEST_CASE("format_double survives a parse round-trip") {
    rng::Stream rng(88);
    for (int i = 0; i < 500; ++i) {
        double v = (rng.uniform01() - 0.5) * std::pow(10.0, (double)(int)(rng.below(13)) - 6.0);
        if (i % 17 == 0) v = (double)(int)v;  // sprinkle integers in
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.0) == "0");
}

TEST_CASE("federated_standardize: single client [1,2,3]") {
    const Dataset d = testutil::make_dataset({{{1.0}, 1, 0}, {{2.0}, -1, 1}, {{3.0}, 1, 0}});
    const auto [params, out] = federated_standardize({d}, {"x0"});
    REQUIRE(params.mean.size() == 1);
    CHECK(params.mean[0] == doctest::Approx(2.0));
    CHECK(params.stddev[0] == doctest::Approx(1.0));  // sample sd, denominator n-1
    CHECK(out[0].rows[0].features[0] == doctest::Approx(-1.0));
    CHECK(out[0].rows[1].features[0] == doctest::Approx(0.0));
    CHECK(out[0].rows[2].features[0] == doctest::Approx(1.0));
}

TEST_CASE("federated_standardize pools aggregates exactly like one big client") {
    const Dataset joint =
        testutil::make_dataset({{{1.0}, 1, 0}, {{2.0}, -1, 1}, {{3.0}, 1, 0}});
    Dataset left = joint, right = joint;
    left.rows = {joint.rows[0], joint.rows[1]};
    right.rows = {joint.rows[2]};

    const auto [p1, o1] = federated_standardize({joint}, {"x0"});
    const auto [p2, o2] = federated_standardize({left, right}, {"x0"});
    CHECK(p1.mean[0] == p2.mean[0]);
    CHECK(p1.stddev[0] == p2.stddev[0]);
    CHECK(o2[0].rows[0].features[0] == o1[0].rows[0].features[0]);
    CHECK(o2[0].rows[1].features[0] == o1[0].rows[1].features[0]);
    CHECK(o2[1].rows[0].features[0] == o1[0].rows[2].features[0]);
}

TEST_CASE("federated_standardize rejects a constant column") {
    const Dataset d = testutil::make_dataset({{{5.0}, 1, 0}, {{5.0}, -1, 1}, {{5.0}, 1, 0}});
    CHECK_THROWS_AS((void)federated_standardize({d}, {"x0"}), std::invalid_argument);
}

TEST_CASE("apply_standardization matches the federated path") {
    rng::Stream rng(11);
    const Dataset d = testutil::random_dataset(rng, 20, 2);
    const auto [params, out] = federated_standardize({d}, {"x0", "x1"});
    const Dataset applied = apply_standardization(params, d);
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK(applied.rows[i].features[j] == out[0].rows[i].features[j]);
}

TEST_CASE("partition: quantile bands, skew 1 cuts exact age-sorted quartiles") {
    std::vector<testutil::Row> rows(100);
    rng::Stream rng(5);
    for (auto& r : rows) r = {{rng.uniform01()}, 1, 0};
    Dataset d = testutil::make_dataset(rows);
    d.schema.aux_names = {"age"};
    for (std::size_t i = 0; i < 100; ++i)
        d.rows[i].aux["age"] = std::to_string(18 + (int)((i * 7919) % 80));  // scrambled ages

    PartitionSpec spec;
    spec.attribute = "age";
    spec.strategy = PartitionStrategy::quantile_bands;
    spec.clients = 4;
    spec.skew = 1.0;
    const auto parts = partition(d, spec);
    REQUIRE(parts.size() == 4);
    for (const auto& p : parts) CHECK(p.size() == 25);

    // bands must be ordered: max age of client k <= min age of client k+1
    auto age_of = [](const Example& ex) { return std::stod(ex.aux.at("age")); };
    for (int k = 0; k + 1 < 4; ++k) {
        double hi = -1e9, lo = 1e9;
        for (const auto& ex : parts[k].rows) hi = std::max(hi, age_of(ex));
        for (const auto& ex : parts[k + 1].rows) lo = std::min(lo, age_of(ex));
        CHECK(hi <= lo);
    }
}

TEST_CASE("partition: categorical skew 1 with K equal categories is a clean split") {
    std::vector<testutil::Row> rows(80);
    for (auto& r : rows) r = {{0.0}, 1, 0};
    Dataset d = testutil::make_dataset(rows);
    d.schema.aux_names = {"region"};
    for (std::size_t i = 0; i < 80; ++i) d.rows[i].aux["region"] = "r" + std::to_string(i % 4);

    PartitionSpec spec;
    spec.attribute = "region";
    spec.strategy = PartitionStrategy::categorical_skew;
    spec.clients = 4;
    spec.skew = 1.0;
    const auto parts = partition(d, spec);
    REQUIRE(parts.size() == 4);
    for (const auto& p : parts) {
        CHECK(p.size() == 20);
        // exactly one region per client
        std::string only = p.rows.front().aux.at("region");
        for (const auto& ex : p.rows) CHECK(ex.aux.at("region") == only);
    }
}

TEST_CASE("partition preserves the row multiset for random specs") {
    rng::Stream rng(7);
    for (int it = 0; it < 20; ++it) {
        const std::size_t n = 20 + rng.below(200);
        Dataset d = testutil::random_dataset(rng, n, 2);
        d.schema.aux_names = {"band"};
        for (auto& ex : d.rows) ex.aux["band"] = std::to_string(rng.below(6));

        PartitionSpec spec;
        spec.attribute = "band";
        spec.strategy = (it % 2) ? PartitionStrategy::quantile_bands
                                 : PartitionStrategy::categorical_skew;
        spec.clients = 2 + (int)rng.below(4);
        spec.skew = 0.3 + 0.7 * rng.uniform01();
        spec.seed = rng.next();
        const auto parts = partition(d, spec);
        CHECK((int)parts.size() == spec.clients);
        CHECK(sorted_keys(parts) == sorted_keys(d));

        // deterministic given the seed
        const auto again = partition(d, spec);
        for (std::size_t k = 0; k < parts.size(); ++k)
            CHECK(sorted_keys(again[k]) == sorted_keys(parts[k]));
    }
}

TEST_CASE("partition rejects bad specs") {
    Dataset d = testutil::make_dataset({{{1.0}, 1, 0}, {{2.0}, -1, 1}});
    d.schema.aux_names = {"a"};
    for (auto& ex : d.rows) ex.aux["a"] = "1";
    PartitionSpec spec;
    spec.attribute = "a";
    spec.clients = 5;  // more clients than rows
    CHECK_THROWS_AS((void)partition(d, spec), std::invalid_argument);

    spec.clients = 2;
    spec.attribute = "missing";
    CHECK_THROWS_AS((void)partition(d, spec), std::invalid_argument);
}

TEST_CASE("split: 70/30 on n=100, deterministic, multiset-preserving") {
    rng::Stream rng(9);
    const Dataset d = testutil::random_dataset(rng, 100, 2);
    const auto [train, test] = split(d, 0.7, 42);
    CHECK(train.size() == 70);
    CHECK(test.size() == 30);

    const auto [train2, test2] = split(d, 0.7, 42);
    CHECK(sorted_keys(train2) == sorted_keys(train));
    for (std::size_t i = 0; i < train.size(); ++i)
        CHECK(train2.rows[i].features == train.rows[i].features);

    std::vector<Dataset> both = {train, test};
    CHECK(sorted_keys(both) == sorted_keys(d));

    // different seed should (overwhelmingly) shuffle differently
    const auto [train3, _] = split(d, 0.7, 43);
    bool same = true;
    for (std::size_t i = 0; i < train.size() && same; ++i)
        same = train3.rows[i].features == train.rows[i].features;
    CHECK_FALSE(same);
}

TEST_CASE("split rejects degenerate fractions") {
    rng::Stream rng(10);
    const Dataset d = testutil::random_dataset(rng, 10, 1);
    CHECK_THROWS_AS((void)split(d, 0.0, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)split(d, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS((void)split(d, 0.01, 1), std::invalid_argument);  // empty train
}

TEST_CASE("generate_synthetic: outcome rates by group track the bias knob") {
    // Monte-Carlo checks of the documented generative law at n=20000.
    auto rate_gap = [](const Dataset& d) {
        double sum[2] = {0, 0}, cnt[2] = {0, 0};
        for (const auto& ex : d.rows) {
            cnt[ex.group] += 1;
            sum[ex.group] += (ex.outcome == 1);
        }
        REQUIRE(cnt[0] > 0);
        REQUIRE(cnt[1] > 0);
        return std::fabs(sum[0] / cnt[0] - sum[1] / cnt[1]);
    };
    CHECK(rate_gap(generate_synthetic(20000, 5, 0.0, 3)) < 0.02);
    CHECK(rate_gap(generate_synthetic(20000, 5, 2.0, 3)) > 0.10);
}

TEST_CASE("generate_synthetic is deterministic and well-formed") {
    const Dataset a = generate_synthetic(500, 4, 1.0, 77);
    const Dataset b = generate_synthetic(500, 4, 1.0, 77);
    REQUIRE(a.size() == 500);
    CHECK(a.dim() == 4);
    a.validate();
    CHECK(sorted_keys(a) == sorted_keys(b));
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.rows[i].features == b.rows[i].features);
        CHECK(a.rows[i].aux.at("region") == b.rows[i].aux.at("region"));
        CHECK(a.rows[i].aux.count("age") == 1);
    }
    // a different seed gives different data
    const Dataset c = generate_synthetic(500, 4, 1.0, 78);
    CHECK(a.rows[0].features != c.rows[0].features);
}

TEST_CASE("standardizing then partitioning equals partitioning then standardizing") {
    Dataset d = generate_synthetic(600, 3, 1.0, 21);
    const std::vector<std::string> feats = {"f0", "f1", "f2"};

    PartitionSpec spec;
    spec.attribute = "region";
    spec.clients = 3;
    spec.skew = 0.8;
    spec.seed = 5;

    // standardize first (single pooled client), then partition
    const auto [params_a, pooled] = federated_standardize({d}, feats);
    const auto parts_a = partition(pooled[0], spec);

    // partition first, then federated-standardize across the parts
    const auto parts_raw = partition(d, spec);
    const auto [params_b, parts_b] = federated_standardize(parts_raw, feats);

    REQUIRE(params_a.mean.size() == params_b.mean.size());
    for (std::size_t j = 0; j < feats.size(); ++j) {
        CHECK(testutil::close(params_a.mean[j], params_b.mean[j], 1e-12));
        CHECK(testutil::close(params_a.stddev[j], params_b.stddev[j], 1e-12));
    }
    REQUIRE(parts_a.size() == parts_b.size());
    for (std::size_t k = 0; k < parts_a.size(); ++k) {
        REQUIRE(parts_a[k].size() == parts_b[k].size());
        for (std::size_t i = 0; i < parts_a[k].size(); ++i)
            for (std::size_t j = 0; j < feats.size(); ++j)
                CHECK(testutil::close(parts_a[k].rows[i].features[j],
                                      parts_b[k].rows[i].features[j], 1e-12));
    }
}

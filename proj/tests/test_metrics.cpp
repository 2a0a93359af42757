#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fairfml/metrics.hpp"
#include "fairfml/rng.hpp"
#include "helpers.hpp"

using namespace fairfml;
using testutil::make_dataset;

namespace {

PredictionSet preds_of(std::vector<double> score, std::vector<int> decision,
                       std::vector<int> group, std::vector<int> outcome) {
    PredictionSet p;
    p.score = std::move(score);
    p.decision = std::move(decision);
    p.group = std::move(group);
    p.outcome = std::move(outcome);
    return p;
}

// Literal enumeration of the metric definitions: selection rates as plain
// means, EO slices skipped when a group has no rows of that outcome, ratios
// undefined when the larger rate is zero. Matches the documented contract,
// written independently of the library internals.
struct OracleReport {
    double dpd = 0.0;
    std::optional<double> dpr, eod, eor;
    std::vector<int> skipped;
};

OracleReport oracle_metrics(const PredictionSet& p) {
    OracleReport rep;
    double sum[2] = {0, 0}, cnt[2] = {0, 0};
    double cell_sum[2][2] = {{0, 0}, {0, 0}}, cell_cnt[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t i = 0; i < p.size(); ++i) {
        cnt[p.group[i]] += 1;
        sum[p.group[i]] += p.decision[i];
        cell_cnt[p.group[i]][p.outcome[i]] += 1;
        cell_sum[p.group[i]][p.outcome[i]] += p.decision[i];
    }
    const double r0 = sum[0] / cnt[0], r1 = sum[1] / cnt[1];
    rep.dpd = std::max(r0, r1) - std::min(r0, r1);
    if (std::max(r0, r1) > 0.0) rep.dpr = std::min(r0, r1) / std::max(r0, r1);

    bool ratio_broken = false;
    for (int y = 0; y < 2; ++y) {
        if (cell_cnt[0][y] == 0 || cell_cnt[1][y] == 0) {
            rep.skipped.push_back(y);
            continue;
        }
        const double a = cell_sum[0][y] / cell_cnt[0][y];
        const double b = cell_sum[1][y] / cell_cnt[1][y];
        const double gap = std::max(a, b) - std::min(a, b);
        if (!rep.eod || gap > *rep.eod) rep.eod = gap;
        if (std::max(a, b) > 0.0) {
            const double ratio = std::min(a, b) / std::max(a, b);
            if (!rep.eor || ratio < *rep.eor) rep.eor = ratio;
        } else {
            ratio_broken = true;
        }
    }
    if (ratio_broken) rep.eor.reset();
    return rep;
}

// Concordant / tied pair counting; both counts are exact integers, so the
// final division matches the midrank formula bit for bit.
double oracle_auroc(const PredictionSet& p) {
    double concordant = 0, ties = 0, n_pos = 0, n_neg = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.outcome[i] == 1) {
            n_pos += 1;
            continue;
        }
        n_neg += 1;
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p.outcome[i] != 1) continue;
        for (std::size_t j = 0; j < p.size(); ++j) {
            if (p.outcome[j] == 1) continue;
            if (p.score[i] > p.score[j]) concordant += 1;
            if (p.score[i] == p.score[j]) ties += 1;
        }
    }
    return (concordant + 0.5 * ties) / (n_pos * n_neg);
}

PredictionSet random_table(rng::Stream& rng, std::size_t n, bool quantize) {
    PredictionSet p;
    for (std::size_t i = 0; i < n; ++i) {
        double s = rng.uniform01();
        if (quantize) s = std::round(s * 8.0) / 8.0;  // force score ties
        p.score.push_back(s);
        p.decision.push_back(rng.bernoulli(0.4) ? 1 : 0);
        p.group.push_back(rng.bernoulli(0.5) ? 1 : 0);
        p.outcome.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    return p;
}

bool both_groups(const PredictionSet& p) {
    bool g0 = false, g1 = false;
    for (int g : p.group) (g ? g1 : g0) = true;
    return g0 && g1;
}

}  // namespace

TEST_CASE("predict: zero weights score 0.5 everywhere and the tie goes to 1") {
    rng::Stream rng(1);
    const Dataset d = testutil::random_dataset(rng, 10, 2);
    const PredictionSet p = predict(ModelWeights::zeros(2), d);
    for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(p.score[i] == 0.5);
        CHECK(p.decision[i] == 1);  // score >= threshold
    }
}

TEST_CASE("predict: saturation and threshold boundaries") {
    const Dataset d = make_dataset({{{1.0}, 1, 0}});
    const PredictionSet hot = predict(ModelWeights{{10.0}, 0.0}, d);
    CHECK(hot.score[0] > 0.9999);
    CHECK(hot.decision[0] == 1);

    const PredictionSet none = predict(ModelWeights{{10.0}, 0.0}, d, 1.1);
    CHECK(none.decision[0] == 0);  // nothing can reach a threshold above 1

    // outcomes arrive as -1/+1 and leave as 0/1
    CHECK(hot.outcome[0] == 1);
    const Dataset neg = make_dataset({{{1.0}, -1, 1}});
    CHECK(predict(ModelWeights::zeros(1), neg).outcome[0] == 0);
}

TEST_CASE("auroc: separation, ties, and the worked 0.75 example") {
    CHECK(auroc(preds_of({0.9, 0.8, 0.3, 0.2}, {1, 1, 0, 0}, {0, 1, 0, 1}, {1, 1, 0, 0})) ==
          1.0);
    CHECK(auroc(preds_of({0.4, 0.4, 0.4, 0.4}, {1, 1, 1, 1}, {0, 1, 0, 1}, {1, 1, 0, 0})) ==
          0.5);
    // positives {0.9, 0.3}, negatives {0.4, 0.2}: 3 concordant of 4 pairs
    CHECK(auroc(preds_of({0.9, 0.3, 0.4, 0.2}, {1, 0, 0, 0}, {0, 1, 0, 1}, {1, 1, 0, 0})) ==
          0.75);
}

TEST_CASE("auroc rejects single-class inputs") {
    CHECK_THROWS_AS((void)auroc(preds_of({0.1, 0.9}, {0, 1}, {0, 1}, {1, 1})),
                    std::invalid_argument);
}

TEST_CASE("auroc is invariant under strictly increasing score transforms") {
    rng::Stream rng(2);
    for (int it = 0; it < 25; ++it) {
        PredictionSet p = random_table(rng, 5 + rng.below(60), it % 2 == 0);
        bool pos = false, neg = false;
        for (int y : p.outcome) (y ? pos : neg) = true;
        if (!pos || !neg) continue;
        const double base = auroc(p);

        PredictionSet warped = p;
        for (double& s : warped.score) s = std::exp(3.0 * s) + 1.0;  // strictly increasing
        CHECK(auroc(warped) == base);  // rank-identical scores, same midranks
    }
}

TEST_CASE("auroc equals pairwise counting exactly") {
    rng::Stream rng(3);
    int tested = 0;
    while (tested < 60) {
        const PredictionSet p = random_table(rng, 2 + rng.below(150), tested % 2 == 0);
        bool pos = false, neg = false;
        for (int y : p.outcome) (y ? pos : neg) = true;
        if (!pos || !neg) continue;
        ++tested;
        CHECK(auroc(p) == oracle_auroc(p));
    }
}

TEST_CASE("fairness_metrics worked example: rates 0.5 vs 0.25") {
    // group 0 decisions {1,1,0,0}, group 1 decisions {1,0,0,0}
    const auto p = preds_of({.9, .9, .1, .1, .9, .1, .1, .1}, {1, 1, 0, 0, 1, 0, 0, 0},
                            {0, 0, 0, 0, 1, 1, 1, 1}, {1, 0, 1, 0, 1, 0, 1, 0});
    const MetricsReport rep = fairness_metrics(p);
    CHECK(rep.by_group[0].rate == 0.5);
    CHECK(rep.by_group[1].rate == 0.25);
    CHECK(*rep.dpd == 0.25);
    CHECK(*rep.dpr == 0.5);
}

TEST_CASE("fairness_metrics worked example: equalized odds slices") {
    // y=1 slice: group0 rate 1.0 (2/2), group1 rate 0.5 (1/2)
    // y=0 slice: group0 rate 0.2 (1/5), group1 rate 0.1 (1/10)
    std::vector<int> group, outcome, decision;
    std::vector<double> score;
    auto add = [&](int g, int y, int dec, int times) {
        for (int i = 0; i < times; ++i) {
            group.push_back(g);
            outcome.push_back(y);
            decision.push_back(dec);
            score.push_back(dec ? 0.9 : 0.1);
        }
    };
    add(0, 1, 1, 2);
    add(1, 1, 1, 1);
    add(1, 1, 0, 1);
    add(0, 0, 1, 1);
    add(0, 0, 0, 4);
    add(1, 0, 1, 1);
    add(1, 0, 0, 9);
    const MetricsReport rep = fairness_metrics(preds_of(score, decision, group, outcome));
    CHECK(*rep.eod == 0.5);   // max(|1.0-0.5|, |0.2-0.1|)
    CHECK(*rep.eor == 0.5);   // min(0.5/1.0, 0.1/0.2)
    CHECK(rep.skipped_slices.empty());
}

TEST_CASE("identical group behaviour gives perfect parity") {
    // mirror-image groups; every (group, outcome) cell keeps a nonzero rate
    // so the ratios stay defined
    const auto p = preds_of({.9, .6, .1, .9, .6, .1}, {1, 1, 0, 1, 1, 0},
                            {0, 0, 0, 1, 1, 1}, {1, 0, 0, 1, 0, 0});
    const MetricsReport rep = fairness_metrics(p);
    CHECK(*rep.dpd == 0.0);
    CHECK(*rep.dpr == 1.0);
    CHECK(*rep.eod == 0.0);
    CHECK(*rep.eor == 1.0);
}

TEST_CASE("zero selection rates surface as undefined ratios, not 0 or 1") {
    const auto p = preds_of({.1, .2, .1, .2}, {0, 0, 0, 0}, {0, 0, 1, 1}, {1, 0, 1, 0});
    const MetricsReport rep = fairness_metrics(p);
    CHECK(*rep.dpd == 0.0);
    CHECK_FALSE(rep.dpr.has_value());
    CHECK(rep.ratio_undefined);
    CHECK_FALSE(rep.eor.has_value());
}

TEST_CASE("an outcome slice missing one group is skipped and flagged") {
    // group 1 has no y=1 rows: the y=1 slice cannot be compared
    const auto p = preds_of({.9, .1, .2, .3}, {1, 0, 0, 1}, {0, 0, 1, 1}, {1, 0, 0, 0});
    const MetricsReport rep = fairness_metrics(p);
    REQUIRE(rep.skipped_slices.size() == 1);
    CHECK(rep.skipped_slices[0] == 1);
    // EOD/EOR computed from the surviving y=0 slice only
    CHECK(rep.eod.has_value());
}

TEST_CASE("fairness_metrics requires both groups") {
    const auto p = preds_of({.9, .1}, {1, 0}, {0, 0}, {1, 0});
    CHECK_THROWS_AS((void)fairness_metrics(p), std::invalid_argument);
}

TEST_CASE("metrics are invariant under swapping the group labels") {
    rng::Stream rng(4);
    int tested = 0;
    while (tested < 40) {
        PredictionSet p = random_table(rng, 4 + rng.below(80), false);
        if (!both_groups(p)) continue;
        ++tested;
        const MetricsReport a = fairness_metrics(p);
        for (int& g : p.group) g = 1 - g;
        const MetricsReport b = fairness_metrics(p);
        CHECK(a.dpd == b.dpd);
        CHECK(a.dpr == b.dpr);
        CHECK(a.eod == b.eod);
        CHECK(a.eor == b.eor);
    }
}

TEST_CASE("DPD = 0 exactly when DPR = 1, given positive rates") {
    rng::Stream rng(5);
    int tested = 0;
    while (tested < 60) {
        const PredictionSet p = random_table(rng, 4 + rng.below(40), false);
        if (!both_groups(p)) continue;
        ++tested;
        const MetricsReport rep = fairness_metrics(p);
        if (rep.by_group[0].rate > 0.0 && rep.by_group[1].rate > 0.0) {
            CHECK((*rep.dpd == 0.0) == (*rep.dpr == 1.0));
        }
        CHECK(*rep.dpd >= 0.0);
        CHECK(*rep.dpd <= 1.0);
        if (rep.dpr) {
            CHECK(*rep.dpr >= 0.0);
            CHECK(*rep.dpr <= 1.0);
        }
        if (rep.eod) {
            CHECK(*rep.eod >= 0.0);
            CHECK(*rep.eod <= 1.0);
        }
        if (rep.eor) {
            CHECK(*rep.eor >= 0.0);
            CHECK(*rep.eor <= 1.0);
        }
    }
}

TEST_CASE("fairness_metrics equals the literal enumeration oracle") {
    rng::Stream rng(6);
    int tested = 0;
    while (tested < 80) {
        const PredictionSet p = random_table(rng, 2 + rng.below(198), tested % 3 == 0);
        if (!both_groups(p)) continue;
        ++tested;
        const MetricsReport got = fairness_metrics(p);
        const OracleReport expect = oracle_metrics(p);
        CHECK(*got.dpd == expect.dpd);
        CHECK(got.dpr == expect.dpr);
        CHECK(got.eod == expect.eod);
        CHECK(got.eor == expect.eor);
        CHECK(got.skipped_slices == expect.skipped);
    }
}

TEST_CASE("subgroup_report: one attribute value reproduces the overall report") {
    rng::Stream rng(7);
    Dataset d = testutil::random_dataset(rng, 30, 2);
    for (auto& ex : d.rows) ex.aux["site"] = "only";
    const ModelWeights w{{0.7, -0.4}, 0.1};

    const auto rows = subgroup_report(w, d, "site");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].label == "only");
    CHECK(rows[0].n == 30);
    REQUIRE(rows[0].metrics.has_value());

    const MetricsReport whole = fairness_metrics(predict(w, d));
    CHECK(rows[0].metrics->dpd == whole.dpd);
    CHECK(rows[0].metrics->auroc == whole.auroc);

    double prevalence = 0;
    for (const auto& ex : d.rows) prevalence += (ex.outcome == 1);
    CHECK(rows[0].outcome_prevalence == prevalence / 30.0);
}

TEST_CASE("subgroup_report separates fair and unfair slices") {
    // slice "a": identical decisions across groups; slice "b": group 1 never
    // selected. Weights below push scores to the saturation ends so the
    // decisions are what we constructed.
    Dataset d = make_dataset({
        {{5.0}, 1, 0},   // site a: both groups half selected
        {{-5.0}, -1, 0},
        {{5.0}, 1, 1},
        {{-5.0}, -1, 1},
        {{5.0}, 1, 0},   // site b: group 0 always selected, group 1 never
        {{5.0}, -1, 0},
        {{-5.0}, 1, 1},
        {{-5.0}, -1, 1},
    });
    const char* sites[] = {"a", "a", "a", "a", "b", "b", "b", "b"};
    for (std::size_t i = 0; i < d.rows.size(); ++i) d.rows[i].aux["site"] = sites[i];

    const auto rep = subgroup_report(ModelWeights{{2.0}, 0.0}, d, "site");
    REQUIRE(rep.size() == 2);
    CHECK(rep[0].label == "a");  // ties on n sort by label
    CHECK(*rep[0].metrics->dpd == 0.0);
    CHECK(*rep[1].metrics->dpd == 1.0);
}

TEST_CASE("subgroup_report flags single-group slices instead of guessing") {
    Dataset d = make_dataset({{{1.0}, 1, 0}, {{2.0}, -1, 0}, {{1.5}, 1, 1}, {{0.5}, -1, 0}});
    const char* sites[] = {"solo", "solo", "mixed", "mixed"};
    for (std::size_t i = 0; i < d.rows.size(); ++i) d.rows[i].aux["site"] = sites[i];
    const auto rep = subgroup_report(ModelWeights::zeros(1), d, "site");
    REQUIRE(rep.size() == 2);
    for (const auto& r : rep) {
        if (r.label == "solo") {
            CHECK(r.flagged);
            CHECK_FALSE(r.metrics.has_value());
        } else {
            CHECK_FALSE(r.flagged);
            CHECK(r.metrics.has_value());
        }
    }
}

TEST_CASE("baseline_delta: zeros for identical reports, percent changes otherwise") {
    // every metric nonzero and defined, otherwise the self-delta is unset
    // rather than zero (zero baselines never divide)
    const auto p = preds_of({.9, .8, .2, .85, .4, .7, .3, .1}, {1, 1, 0, 1, 0, 1, 0, 0},
                            {0, 0, 0, 1, 1, 1, 1, 1}, {1, 0, 0, 1, 1, 0, 0, 0});
    const MetricsReport rep = fairness_metrics(p);
    REQUIRE(rep.dpd.has_value());
    REQUIRE(*rep.dpd > 0.0);
    REQUIRE(rep.eor.has_value());
    const BaselineDelta self = baseline_delta(rep, rep);
    CHECK(*self.auroc_abs == 0.0);
    CHECK(*self.dpd_pct == 0.0);
    CHECK(*self.dpr_pct == 0.0);
    CHECK(*self.eod_pct == 0.0);
    CHECK(*self.eor_pct == 0.0);

    MetricsReport half = rep;
    half.dpd = 0.05;
    MetricsReport base = rep;
    base.dpd = 0.10;
    CHECK(*baseline_delta(half, base).dpd_pct == doctest::Approx(-50.0));
}

TEST_CASE("baseline_delta: zero baselines stay undefined, never infinite") {
    const auto p = preds_of({.9, .1, .8, .2}, {1, 0, 1, 0}, {0, 0, 1, 1}, {1, 0, 1, 0});
    MetricsReport rep = fairness_metrics(p);
    MetricsReport base = rep;
    base.dpd = 0.0;
    const BaselineDelta d = baseline_delta(rep, base);
    CHECK_FALSE(d.dpd_pct.has_value());

    base.dpd.reset();
    CHECK_FALSE(baseline_delta(rep, base).dpd_pct.has_value());
}

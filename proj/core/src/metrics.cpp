#include "fairfml/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace fairfml {

PredictionSet predict(const ModelWeights& weights, const Dataset& data, double threshold) {
    if (data.rows.empty()) throw std::invalid_argument("predict: empty dataset");
    PredictionSet out;
    const std::size_t n = data.size();
    out.score.reserve(n);
    out.decision.reserve(n);
    out.group.reserve(n);
    out.outcome.reserve(n);
    for (const auto& row : data.rows) {
        double m = weights.b;
        for (std::size_t j = 0; j < weights.w.size(); ++j) m += weights.w[j] * row.features[j];
        const double s = sigmoid(m);
        out.score.push_back(s);
        out.decision.push_back(s >= threshold ? 1 : 0);
        out.group.push_back(row.group);
        out.outcome.push_back(row.outcome == 1 ? 1 : 0);
    }
    return out;
}

double auroc(const PredictionSet& preds) {
    const std::size_t n = preds.size();
    std::size_t n_pos = 0;
    for (int y : preds.outcome) n_pos += (y == 1);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("auroc: needs both outcome classes");

    // Midranks over the scores; tied scores share the average rank.
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return preds.score[a] < preds.score[b]; });

    double pos_rank_sum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && preds.score[order[j + 1]] == preds.score[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;  // ranks are 1-based
        for (std::size_t t = i; t <= j; ++t)
            if (preds.outcome[order[t]] == 1) pos_rank_sum += midrank;
        i = j + 1;
    }
    const double n_pos_d = static_cast<double>(n_pos);
    return (pos_rank_sum - n_pos_d * (n_pos_d + 1.0) / 2.0) /
           (n_pos_d * static_cast<double>(n_neg));
}

MetricsReport fairness_metrics(const PredictionSet& preds) {
    const std::size_t n = preds.size();
    if (n == 0) throw std::invalid_argument("fairness_metrics: empty prediction set");

    MetricsReport rep;
    double dec_sum[2] = {0.0, 0.0};
    double cell_sum[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
    for (std::size_t i = 0; i < n; ++i) {
        const int g = preds.group[i], y = preds.outcome[i];
        rep.by_group[g].n += 1;
        dec_sum[g] += preds.decision[i];
        rep.by_group_outcome[g][y].n += 1;
        cell_sum[g][y] += preds.decision[i];
    }
    if (rep.by_group[0].n == 0 || rep.by_group[1].n == 0)
        throw std::invalid_argument("fairness_metrics: a sensitive group is entirely absent");

    for (int g = 0; g < 2; ++g) {
        rep.by_group[g].rate = dec_sum[g] / static_cast<double>(rep.by_group[g].n);
        for (int y = 0; y < 2; ++y)
            if (rep.by_group_outcome[g][y].n > 0)
                rep.by_group_outcome[g][y].rate =
                    cell_sum[g][y] / static_cast<double>(rep.by_group_outcome[g][y].n);
    }

    // Demographic parity.
    const double lo = std::min(rep.by_group[0].rate, rep.by_group[1].rate);
    const double hi = std::max(rep.by_group[0].rate, rep.by_group[1].rate);
    rep.dpd = hi - lo;
    if (hi > 0.0)
        rep.dpr = lo / hi;
    else
        rep.ratio_undefined = true;

    // Equalized odds over the two outcome slices. A slice where one group
    // has no rows is skipped and flagged.
    std::optional<double> eod, eor;
    bool eor_broken = false;
    for (int y = 0; y < 2; ++y) {
        if (rep.by_group_outcome[0][y].n == 0 || rep.by_group_outcome[1][y].n == 0) {
            rep.skipped_slices.push_back(y);
            continue;
        }
        const double a = rep.by_group_outcome[0][y].rate;
        const double b = rep.by_group_outcome[1][y].rate;
        const double slice_lo = std::min(a, b), slice_hi = std::max(a, b);
        const double diff = slice_hi - slice_lo;
        if (!eod || diff > *eod) eod = diff;
        if (slice_hi > 0.0) {
            const double ratio = slice_lo / slice_hi;
            if (!eor || ratio < *eor) eor = ratio;
        } else {
            eor_broken = true;
            rep.ratio_undefined = true;
        }
    }
    rep.eod = eod;
    rep.eor = eor_broken ? std::nullopt : eor;

    // AUROC when scoreable.
    std::size_t n_pos = 0;
    for (int y : preds.outcome) n_pos += (y == 1);
    if (n_pos > 0 && n_pos < n) rep.auroc = auroc(preds);

    return rep;
}

std::vector<SubgroupRow> subgroup_report(const ModelWeights& weights, const Dataset& data,
                                         const std::string& subgroup_attr, double threshold) {
    std::map<std::string, Dataset> slices;
    for (const auto& row : data.rows) {
        auto it = row.aux.find(subgroup_attr);
        if (it == row.aux.end())
            throw std::invalid_argument("subgroup attribute '" + subgroup_attr +
                                        "' missing from a row");
        Dataset& slice = slices[it->second];
        if (slice.rows.empty()) slice.schema = data.schema;
        slice.rows.push_back(row);
    }

    std::vector<SubgroupRow> rows;
    for (auto& [label, slice] : slices) {
        SubgroupRow r;
        r.label = label;
        r.n = slice.size();
        std::size_t positives = 0;
        for (const auto& ex : slice.rows) positives += (ex.outcome == 1);
        r.outcome_prevalence = static_cast<double>(positives) / static_cast<double>(r.n);
        if (slice.group_count(0) == 0 || slice.group_count(1) == 0) {
            r.flagged = true;  // one sensitive group only; metrics undefined
        } else {
            r.metrics = fairness_metrics(predict(weights, slice, threshold));
        }
        rows.push_back(std::move(r));
    }
    std::sort(rows.begin(), rows.end(), [](const SubgroupRow& a, const SubgroupRow& b) {
        if (a.n != b.n) return a.n > b.n;
        return a.label < b.label;
    });
    return rows;
}

BaselineDelta baseline_delta(const MetricsReport& report, const MetricsReport& baseline) {
    BaselineDelta d;
    if (report.auroc && baseline.auroc) d.auroc_abs = *report.auroc - *baseline.auroc;

    auto pct = [](const std::optional<double>& r,
                  const std::optional<double>& b) -> std::optional<double> {
        if (!r || !b || *b == 0.0) return std::nullopt;
        return 100.0 * (*r - *b) / *b;
    };
    d.dpd_pct = pct(report.dpd, baseline.dpd);
    d.dpr_pct = pct(report.dpr, baseline.dpr);
    d.eod_pct = pct(report.eod, baseline.eod);
    d.eor_pct = pct(report.eor, baseline.eor);
    return d;
}

}  // namespace fairfml

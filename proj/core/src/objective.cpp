#include "fairfml/objective.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace fairfml {

namespace {

std::vector<int> all_rows(const Dataset& data) {
    std::vector<int> idx(data.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

double margin(const ModelWeights& weights, const Example& row) {
    double m = weights.b;
    for (std::size_t j = 0; j < weights.w.size(); ++j) m += weights.w[j] * row.features[j];
    return m;
}

}  // namespace

bool ModelWeights::finite() const {
    if (!std::isfinite(b)) return false;
    for (double v : w)
        if (!std::isfinite(v)) return false;
    return true;
}

double ModelWeights::weight_norm_sq() const {
    double s = 0.0;
    for (double v : w) s += v * v;
    return s;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log1p_exp(double x) {
    // ln(1 + e^x) without overflow for large |x|.
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

double logistic_loss(const ModelWeights& weights, const Dataset& batch) {
    return logistic_loss(weights, batch, all_rows(batch));
}

double logistic_loss(const ModelWeights& weights, const Dataset& data,
                     std::span<const int> rows) {
    if (rows.empty()) throw std::invalid_argument("logistic_loss: empty batch");
    double total = 0.0;
    for (int i : rows) {
        const Example& row = data.rows[i];
        total += log1p_exp(-row.outcome * margin(weights, row));
    }
    return total / static_cast<double>(rows.size());
}

std::vector<double> penalty_direction(const Dataset& data, std::span<const int> rows) {
    const std::size_t d = data.dim();
    std::vector<double> u(d, 0.0);

    // Per-(group, label) feature sums and counts; label index 0 <-> y=-1.
    double cnt[2][2] = {{0, 0}, {0, 0}};
    std::vector<double> sum[2][2];
    for (auto& per_group : sum)
        for (auto& s : per_group) s.assign(d, 0.0);

    for (int i : rows) {
        const Example& row = data.rows[i];
        const int y = row.outcome == 1 ? 1 : 0;
        cnt[row.group][y] += 1.0;
        auto& s = sum[row.group][y];
        for (std::size_t j = 0; j < d; ++j) s[j] += row.features[j];
    }

    const double n0 = cnt[0][0] + cnt[0][1];
    const double n1 = cnt[1][0] + cnt[1][1];
    if (n0 == 0.0 || n1 == 0.0) return u;  // degenerate batch: penalty is zero

    // sum over matching-label cross-group pairs of (x_i - x_j), i in group 1,
    // j in group 0, collapsed to per-label aggregates.
    for (int y = 0; y < 2; ++y) {
        for (std::size_t j = 0; j < d; ++j)
            u[j] += cnt[0][y] * sum[1][y][j] - cnt[1][y] * sum[0][y][j];
    }
    const double scale = 1.0 / (n0 * n1);
    for (double& v : u) v *= scale;
    return u;
}

double fairness_penalty(const ModelWeights& weights, const Dataset& batch, PenaltyForm form) {
    return fairness_penalty(weights, batch, all_rows(batch), form);
}

double fairness_penalty(const ModelWeights& weights, const Dataset& data,
                        std::span<const int> rows, PenaltyForm form) {
    if (rows.empty()) throw std::invalid_argument("fairness_penalty: empty batch");
    const std::vector<double> u = penalty_direction(data, rows);
    double dot = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) dot += u[j] * weights.w[j];
    return form == PenaltyForm::squared_average ? dot * dot : dot;
}

ObjectiveValue objective_and_gradient(const ModelWeights& weights, const Dataset& batch,
                                      const PenaltyConfig& cfg) {
    return objective_and_gradient(weights, batch, all_rows(batch), cfg);
}

ObjectiveValue objective_and_gradient(const ModelWeights& weights, const Dataset& data,
                                      std::span<const int> rows, const PenaltyConfig& cfg) {
    if (rows.empty()) throw std::invalid_argument("objective_and_gradient: empty batch");
    const std::size_t d = weights.w.size();
    const double n = static_cast<double>(rows.size());

    ObjectiveValue out;
    out.grad_w.assign(d, 0.0);

    // Logistic part: mean of ln(1 + e^{-y m}); gradient mean of -y sigma(-y m) x.
    double loss = 0.0, gb = 0.0;
    for (int i : rows) {
        const Example& row = data.rows[i];
        const double ym = row.outcome * margin(weights, row);
        loss += log1p_exp(-ym);
        const double coef = -row.outcome * sigmoid(-ym);
        for (std::size_t j = 0; j < d; ++j) out.grad_w[j] += coef * row.features[j];
        gb += coef;
    }
    out.value = loss / n;
    out.grad_b = gb / n;
    for (std::size_t j = 0; j < d; ++j) out.grad_w[j] /= n;

    // Fairness penalty. Skipped entirely at lambda = 0 so the unpenalized
    // path is bit-identical to plain logistic regression.
    if (cfg.lambda != 0.0) {
        const std::vector<double> u = penalty_direction(data, rows);
        double dot = 0.0;
        for (std::size_t j = 0; j < d; ++j) dot += u[j] * weights.w[j];
        if (cfg.form == PenaltyForm::squared_average) {
            out.value += cfg.lambda * dot * dot;
            const double c = 2.0 * cfg.lambda * dot;
            for (std::size_t j = 0; j < d; ++j) out.grad_w[j] += c * u[j];
        } else {
            out.value += cfg.lambda * dot;
            for (std::size_t j = 0; j < d; ++j) out.grad_w[j] += cfg.lambda * u[j];
        }
    }

    // l2 term, intercept excluded.
    if (cfg.gamma != 0.0) {
        out.value += cfg.gamma * weights.weight_norm_sq();
        for (std::size_t j = 0; j < d; ++j) out.grad_w[j] += 2.0 * cfg.gamma * weights.w[j];
    }
    return out;
}

}  // namespace fairfml

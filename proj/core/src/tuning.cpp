#include "fairfml/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "fairfml/csv.hpp"
#include "fairfml/metrics.hpp"

namespace fairfml {

namespace {

constexpr std::size_t kNone = static_cast<std::size_t>(-1);

// (DPD + EOD) / 2, or +inf when either half is missing.
double disparity_score(const GammaRow& row) {
    if (!row.dpd || !row.eod) return std::numeric_limits<double>::infinity();
    return (*row.dpd + *row.eod) / 2.0;
}

std::optional<double> mean_of(const std::vector<std::optional<double>>& cells) {
    double sum = 0.0;
    std::size_t defined = 0;
    for (const auto& c : cells)
        if (c) {
            sum += *c;
            ++defined;
        }
    if (defined == 0) return std::nullopt;
    return sum / static_cast<double>(defined);
}

void na_or(std::ostream& out, const std::optional<double>& v) {
    if (v)
        out << format_double(*v);
    else
        out << "NA";
}

}  // namespace

std::vector<double> gamma_grid(double lo, double hi, int count) {
    if (!(lo < hi)) throw std::invalid_argument("gamma_grid: need lo < hi");
    if (count < 2) throw std::invalid_argument("gamma_grid: need at least 2 points");
    if (lo < 0.0) throw std::invalid_argument("gamma_grid: gamma must be non-negative");

    std::vector<double> grid(static_cast<std::size_t>(count));
    const double step = (hi - lo) / static_cast<double>(count - 1);
    for (int i = 0; i < count; ++i) grid[static_cast<std::size_t>(i)] = lo + step * i;
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

LambdaCandidates lambda_candidates(std::span<const double> lambda_k, LambdaPolicy policy,
                                   int count) {
    if (lambda_k.empty()) throw std::invalid_argument("lambda_candidates: no client sweeps");
    if (count < 1) throw std::invalid_argument("lambda_candidates: count must be >= 1");
    for (double l : lambda_k)
        if (!(l >= 0.0)) throw std::invalid_argument("lambda_candidates: negative lambda");

    LambdaCandidates out;
    out.lambda_star = policy == LambdaPolicy::min_across_clients
                          ? *std::min_element(lambda_k.begin(), lambda_k.end())
                          : *std::max_element(lambda_k.begin(), lambda_k.end());
    if (out.lambda_star == 0.0) {
        out.degenerate = true;
        out.values = {0.0};
        return out;
    }
    out.values.reserve(static_cast<std::size_t>(count));
    for (int i = 1; i <= count; ++i)
        out.values.push_back(out.lambda_star * static_cast<double>(i) /
                             static_cast<double>(count));
    out.values.back() = out.lambda_star;
    return out;
}

std::size_t apply_selection_rule(std::vector<GammaRow>& rows, double auroc_slack) {
    if (rows.empty()) throw std::invalid_argument("gamma selection: empty table");
    if (auroc_slack < 0.0) throw std::invalid_argument("gamma selection: negative slack");
    for (auto& r : rows) {
        r.eligible = false;
        r.selected = false;
    }
    if (rows.size() == 1) {  // singleton grid: nothing to trade off
        rows[0].eligible = true;
        rows[0].selected = true;
        return 0;
    }

    double best_auroc = -std::numeric_limits<double>::infinity();
    for (const auto& r : rows)
        if (r.auroc) best_auroc = std::max(best_auroc, *r.auroc);
    if (!std::isfinite(best_auroc))
        throw std::runtime_error("gamma selection: no candidate produced a defined AUROC");

    std::size_t winner = kNone;
    double winner_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        GammaRow& r = rows[i];
        r.eligible = r.auroc && *r.auroc >= best_auroc - auroc_slack && r.dpd && r.eod;
        if (!r.eligible) continue;
        const double s = disparity_score(r);
        if (winner == kNone || s < winner_score) {  // ties keep the earlier (smaller) gamma
            winner = i;
            winner_score = s;
        }
    }
    if (winner == kNone)
        throw std::runtime_error("gamma selection: no eligible candidate");
    rows[winner].selected = true;
    return winner;
}

GammaTable optimize_gamma(std::span<const double> grid, double lambda,
                          const std::vector<Dataset>& train_clients,
                          const std::vector<Dataset>& test_clients,
                          const FederationConfig& fed, double auroc_slack,
                          double threshold) {
    if (grid.empty()) throw std::invalid_argument("optimize_gamma: empty grid");
    if (train_clients.size() != test_clients.size() || train_clients.empty())
        throw std::invalid_argument("optimize_gamma: train/test client lists must pair up");

    GammaTable table;
    table.rows.reserve(grid.size());
    for (double gamma : grid) {
        FederationConfig run_cfg = fed;
        run_cfg.train.penalty.lambda = lambda;
        run_cfg.train.penalty.gamma = gamma;

        GammaRow row;
        row.gamma = gamma;
        std::vector<std::optional<double>> auc, dpd, dpr, eod, eor;
        try {
            const FederationResult trained = run_federation(train_clients, run_cfg);
            for (std::size_t k = 0; k < train_clients.size(); ++k) {
                ModelWeights model = trained.model.weights;
                if (fed.framework == Framework::perfedavg)
                    model = personalize(model, train_clients[k], fed.inner_steps,
                                        fed.inner_learning_rate, run_cfg.train.penalty);
                const MetricsReport m =
                    fairness_metrics(predict(model, test_clients[k], threshold));
                auc.push_back(m.auroc);
                dpd.push_back(m.dpd);
                dpr.push_back(m.dpr);
                eod.push_back(m.eod);
                eor.push_back(m.eor);
            }
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("gamma " + format_double(gamma) + ": " + e.what());
        }
        row.auroc = mean_of(auc);
        row.dpd = mean_of(dpd);
        row.dpr = mean_of(dpr);
        row.eod = mean_of(eod);
        row.eor = mean_of(eor);
        table.rows.push_back(std::move(row));
    }

    table.selected_index = apply_selection_rule(table.rows, auroc_slack);
    table.selected_gamma = table.rows[table.selected_index].gamma;
    return table;
}

TwoStepGammaResult two_step_gamma(double lambda, const std::vector<Dataset>& train_clients,
                                  const std::vector<Dataset>& test_clients,
                                  const FederationConfig& fed, const TuningConfig& cfg,
                                  double threshold) {
    if (cfg.coarse_count < 2 || cfg.refine_count < 2)
        throw std::invalid_argument("two_step_gamma: grid sizes must be >= 2");
    if (cfg.auroc_slack < 0.0)
        throw std::invalid_argument("two_step_gamma: negative slack");

    TwoStepGammaResult out;
    out.refine = cfg.refine;

    const std::vector<double> coarse = gamma_grid(cfg.gamma_lo, cfg.gamma_hi, cfg.coarse_count);
    out.coarse = optimize_gamma(coarse, lambda, train_clients, test_clients, fed,
                                cfg.auroc_slack, threshold);
    const std::size_t s = out.coarse.selected_index;
    const std::size_t last = coarse.size() - 1;

    if (cfg.refine == RefineMode::two_interval) {
        out.refine_lo = coarse[s == 0 ? 0 : s - 1];
        out.refine_hi = coarse[s == last ? last : s + 1];
    } else {
        // One interval, on the side of the rule's runner-up: the best
        // eligible candidate other than the winner. If every other row is
        // ineligible, fall back to the neighbor with the lower disparity
        // score (ties toward smaller gamma). Boundary winners only have
        // one side.
        bool go_right;
        if (s == 0) {
            go_right = true;
        } else if (s == last) {
            go_right = false;
        } else {
            std::size_t runner = kNone;
            double runner_score = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < out.coarse.rows.size(); ++i) {
                if (i == s || !out.coarse.rows[i].eligible) continue;
                const double sc = disparity_score(out.coarse.rows[i]);
                if (runner == kNone || sc < runner_score) {
                    runner = i;
                    runner_score = sc;
                }
            }
            if (runner != kNone)
                go_right = runner > s;
            else
                go_right = disparity_score(out.coarse.rows[s + 1]) <
                           disparity_score(out.coarse.rows[s - 1]);
        }
        out.refine_lo = go_right ? coarse[s] : coarse[s - 1];
        out.refine_hi = go_right ? coarse[s + 1] : coarse[s];
    }

    const std::vector<double> fine = gamma_grid(out.refine_lo, out.refine_hi, cfg.refine_count);
    out.refined = optimize_gamma(fine, lambda, train_clients, test_clients, fed,
                                 cfg.auroc_slack, threshold);
    out.gamma = out.refined.selected_gamma;
    return out;
}

void write_gamma_table_csv(const GammaTable& table, std::ostream& out) {
    out << "gamma,auc,dpd,dpr,eod,eor,eligible,selected\n";
    for (const auto& r : table.rows) {
        out << format_double(r.gamma) << ',';
        na_or(out, r.auroc);
        out << ',';
        na_or(out, r.dpd);
        out << ',';
        na_or(out, r.dpr);
        out << ',';
        na_or(out, r.eod);
        out << ',';
        na_or(out, r.eor);
        out << ',' << (r.eligible ? 1 : 0) << ',' << (r.selected ? 1 : 0) << '\n';
    }
}

}  // namespace fairfml

// Command-line front end: synth / partition / train / tune-lambda /
// tune-gamma / run / report. Exits 0 only when the requested work fully
// succeeded.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fairfml/csv.hpp"
#include "fairfml/data_pipeline.hpp"
#include "fairfml/experiment.hpp"
#include "fairfml/federation.hpp"
#include "fairfml/metrics.hpp"
#include "fairfml/rng.hpp"
#include "fairfml/trainer.hpp"
#include "fairfml/tuning.hpp"

namespace {

struct SchemaFlags {
    std::string outcome = "outcome";
    std::string group = "group";
    std::vector<std::string> features, aux, group_order;
};

void add_schema_flags(CLI::App* cmd, SchemaFlags& s) {
    cmd->add_option("--outcome-col", s.outcome, "outcome column")->capture_default_str();
    cmd->add_option("--group-col", s.group, "sensitive (group) column")->capture_default_str();
    cmd->add_option("--feature-cols", s.features,
                    "feature columns, comma separated (default: every remaining column)")
        ->delimiter(',');
    cmd->add_option("--aux-cols", s.aux, "extra columns kept for partitioning / subgroup reports")
        ->delimiter(',');
    cmd->add_option("--group-order", s.group_order,
                    "two category labels; first maps to group 0, second to group 1")
        ->delimiter(',');
}

fairfml::CsvSchema to_schema(const SchemaFlags& s) {
    fairfml::CsvSchema schema;
    schema.outcome_column = s.outcome;
    schema.group_column = s.group;
    schema.feature_columns = s.features;
    schema.aux_columns = s.aux;
    schema.group_order = s.group_order;
    return schema;
}

std::string na_or(const std::optional<double>& v) {
    return v ? fairfml::format_double(*v) : std::string("NA");
}

void print_metrics(const fairfml::MetricsReport& m) {
    std::cout << "  auc " << na_or(m.auroc) << "  dpd " << na_or(m.dpd) << "  dpr "
              << na_or(m.dpr) << "  eod " << na_or(m.eod) << "  eor " << na_or(m.eor) << '\n';
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

// Load client CSVs and split each one, the same derivation `run` uses.
void load_and_split(const std::vector<std::string>& paths, const fairfml::CsvSchema& schema,
                    double fraction, std::uint64_t seed, std::vector<fairfml::Dataset>& train,
                    std::vector<fairfml::Dataset>& test) {
    for (std::size_t k = 0; k < paths.size(); ++k) {
        const fairfml::Dataset data = fairfml::load_csv(paths[k], schema);
        auto [tr, te] = fairfml::split(data, fraction, fairfml::rng::mix(seed, 0x3b17u, k));
        train.push_back(std::move(tr));
        test.push_back(std::move(te));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairfml: fairness-penalized federated logistic regression on tabular data"};
    app.require_subcommand(1);

    const std::map<std::string, fairfml::PenaltyForm> form_map{
        {"squared", fairfml::PenaltyForm::squared_average},
        {"signed", fairfml::PenaltyForm::signed_average}};
    const std::map<std::string, fairfml::SweepMetric> metric_map{
        {"accuracy", fairfml::SweepMetric::accuracy}, {"mse", fairfml::SweepMetric::mse}};
    const std::map<std::string, fairfml::PartitionStrategy> strategy_map{
        {"categorical_skew", fairfml::PartitionStrategy::categorical_skew},
        {"quantile_bands", fairfml::PartitionStrategy::quantile_bands}};
    const std::map<std::string, fairfml::Framework> framework_map{
        {"fedavg", fairfml::Framework::fedavg}, {"perfedavg", fairfml::Framework::perfedavg}};
    const std::map<std::string, fairfml::Aggregation> aggregation_map{
        {"uniform", fairfml::Aggregation::uniform},
        {"sample_weighted", fairfml::Aggregation::sample_weighted}};
    const std::map<std::string, fairfml::RefineMode> refine_map{
        {"one_interval", fairfml::RefineMode::one_interval},
        {"two_interval", fairfml::RefineMode::two_interval}};
    const std::map<std::string, fairfml::LambdaPolicy> policy_map{
        {"min", fairfml::LambdaPolicy::min_across_clients},
        {"max", fairfml::LambdaPolicy::max_across_clients}};

    // ---- synth ----
    auto* synth = app.add_subcommand("synth", "generate a synthetic biased cohort CSV");
    struct {
        std::size_t n = 8000, d = 5;
        double bias = 2.0;
        std::uint64_t seed = 1;
        std::string out = "synthetic.csv";
    } sy;
    synth->add_option("--n", sy.n, "rows")->capture_default_str();
    synth->add_option("--d", sy.d, "feature count")->capture_default_str();
    synth->add_option("--bias", sy.bias, "group bias strength (0 = fair data)")
        ->capture_default_str();
    synth->add_option("--seed", sy.seed, "generator seed")->capture_default_str();
    synth->add_option("-o,--out", sy.out, "output CSV path")->capture_default_str();
    synth->callback([&] {
        const fairfml::Dataset data = fairfml::generate_synthetic(sy.n, sy.d, sy.bias, sy.seed);
        fairfml::write_csv(data, sy.out);
        std::cout << "wrote " << sy.out << " (" << data.size() << " rows, " << data.dim()
                  << " features)\n";
    });

    // ---- partition ----
    auto* part = app.add_subcommand("partition", "split a CSV into per-client CSVs");
    struct {
        std::string input, out_dir = "clients";
        SchemaFlags schema;
        fairfml::PartitionSpec spec;
    } pa;
    part->add_option("-i,--input", pa.input, "input CSV")->required();
    add_schema_flags(part, pa.schema);
    part->add_option("--attribute", pa.spec.attribute, "aux attribute to partition on")
        ->required();
    part->add_option("--strategy", pa.spec.strategy, "partition strategy")
        ->transform(CLI::CheckedTransformer(strategy_map, CLI::ignore_case))
        ->capture_default_str();
    part->add_option("--clients", pa.spec.clients, "client count K")->capture_default_str();
    part->add_option("--skew", pa.spec.skew, "skew in (0,1]; 1 = fully skewed")
        ->capture_default_str();
    part->add_option("--seed", pa.spec.seed, "partition seed")->capture_default_str();
    part->add_option("-o,--out-dir", pa.out_dir, "output directory")->capture_default_str();
    part->callback([&] {
        const fairfml::Dataset data = fairfml::load_csv(pa.input, to_schema(pa.schema));
        const std::vector<fairfml::Dataset> clients = fairfml::partition(data, pa.spec);
        fairfml::write_partition_csvs(clients, pa.out_dir);
        std::cout << "wrote " << clients.size() << " client CSVs + manifest.csv under "
                  << pa.out_dir << '\n';
    });

    // ---- train ----
    auto* train = app.add_subcommand("train", "train one local model on a CSV");
    struct {
        std::string input, test, model_out;
        SchemaFlags schema;
        fairfml::TrainConfig cfg;
        double threshold = 0.5;
    } tr;
    train->add_option("-i,--input", tr.input, "training CSV")->required();
    add_schema_flags(train, tr.schema);
    train->add_option("--test", tr.test, "held-out CSV to evaluate on");
    train->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
    train->add_option("--batch", tr.cfg.batch_size)->capture_default_str();
    train->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
    train->add_option("--lambda", tr.cfg.penalty.lambda, "fairness penalty weight")
        ->capture_default_str();
    train->add_option("--gamma", tr.cfg.penalty.gamma, "l2 weight")->capture_default_str();
    train->add_option("--form", tr.cfg.penalty.form, "penalty form")
        ->transform(CLI::CheckedTransformer(form_map, CLI::ignore_case));
    train->add_option("--seed", tr.cfg.seed)->capture_default_str();
    train->add_option("--threshold", tr.threshold)->capture_default_str();
    train->add_option("--model-out", tr.model_out, "write the model as JSON");
    train->callback([&] {
        const fairfml::Dataset data = fairfml::load_csv(tr.input, to_schema(tr.schema));
        const fairfml::ModelWeights w =
            fairfml::train_local(fairfml::ModelWeights::zeros(data.dim()), data, tr.cfg);
        std::cout << "trained on " << data.size() << " rows";
        const fairfml::ObjectiveValue obj = fairfml::objective_and_gradient(w, data, tr.cfg.penalty);
        std::cout << ", objective " << fairfml::format_double(obj.value) << '\n';
        if (!tr.test.empty()) {
            const fairfml::Dataset test = fairfml::load_csv(tr.test, to_schema(tr.schema));
            print_metrics(fairfml::fairness_metrics(fairfml::predict(w, test, tr.threshold)));
        }
        if (!tr.model_out.empty()) {
            write_file(tr.model_out, fairfml::to_json(fairfml::GlobalModel{0, w}) + "\n");
            std::cout << "wrote " << tr.model_out << '\n';
        }
    });

    // ---- tune-lambda ----
    auto* tl = app.add_subcommand("tune-lambda",
                                  "per-client lambda sweep over pre-partitioned client CSVs");
    struct {
        std::vector<std::string> inputs;
        SchemaFlags schema;
        double fraction = 0.7;
        std::uint64_t split_seed = 2024;
        fairfml::TrainConfig cfg;
        fairfml::LambdaSweepConfig sweep;
        fairfml::LambdaPolicy policy = fairfml::LambdaPolicy::min_across_clients;
        int count = 1;
        std::string trace_dir;
    } la;
    tl->add_option("-i,--input", la.inputs, "client CSV (repeat per client)")->required();
    add_schema_flags(tl, la.schema);
    tl->add_option("--train-fraction", la.fraction)->capture_default_str();
    tl->add_option("--split-seed", la.split_seed)->capture_default_str();
    tl->add_option("--epochs", la.cfg.epochs)->capture_default_str();
    tl->add_option("--batch", la.cfg.batch_size)->capture_default_str();
    tl->add_option("--lr", la.cfg.learning_rate)->capture_default_str();
    tl->add_option("--seed", la.cfg.seed)->capture_default_str();
    tl->add_option("--step", la.sweep.step, "lambda increment")->capture_default_str();
    tl->add_option("--factor", la.sweep.accuracy_factor, "degradation threshold factor")
        ->capture_default_str();
    tl->add_option("--max-lambda", la.sweep.max_lambda)->capture_default_str();
    tl->add_option("--metric", la.sweep.metric, "sweep metric")
        ->transform(CLI::CheckedTransformer(metric_map, CLI::ignore_case));
    tl->add_option("--policy", la.policy, "combine per-client lambdas by min or max")
        ->transform(CLI::CheckedTransformer(policy_map, CLI::ignore_case));
    tl->add_option("--count", la.count, "candidate count over (0, lambda*]")
        ->capture_default_str();
    tl->add_option("--trace-dir", la.trace_dir, "write per-client sweep traces here");
    tl->callback([&] {
        std::vector<fairfml::Dataset> train_sets, test_sets;
        load_and_split(la.inputs, to_schema(la.schema), la.fraction, la.split_seed, train_sets,
                       test_sets);
        std::vector<double> per_client;
        for (std::size_t k = 0; k < train_sets.size(); ++k) {
            const fairfml::LambdaSweepResult r =
                fairfml::lambda_sweep(train_sets[k], test_sets[k], la.cfg, la.sweep);
            per_client.push_back(r.lambda_k);
            std::cout << la.inputs[k] << ": lambda_k = " << fairfml::format_double(r.lambda_k)
                      << (r.hit_max ? " (never degraded, hit max)" : "") << '\n';
            if (!la.trace_dir.empty()) {
                std::filesystem::create_directories(la.trace_dir);
                const std::string path = (std::filesystem::path(la.trace_dir) /
                                          ("lambda_sweep_client_" + std::to_string(k) + ".csv"))
                                             .string();
                std::ostringstream buf;
                fairfml::write_sweep_trace_csv(r, buf);
                write_file(path, buf.str());
            }
        }
        const fairfml::LambdaCandidates c =
            fairfml::lambda_candidates(per_client, la.policy, la.count);
        std::cout << "lambda* = " << fairfml::format_double(c.lambda_star);
        if (c.degenerate) std::cout << "  (warning: every client swept to 0)";
        std::cout << "\ncandidates:";
        for (double v : c.values) std::cout << ' ' << fairfml::format_double(v);
        std::cout << '\n';
    });

    // ---- tune-gamma ----
    auto* tg = app.add_subcommand("tune-gamma",
                                  "two-step gamma search over pre-partitioned client CSVs");
    struct {
        std::vector<std::string> inputs;
        SchemaFlags schema;
        double fraction = 0.7;
        std::uint64_t split_seed = 2024;
        double lambda = 0.0;
        fairfml::FederationConfig fed;
        fairfml::TuningConfig tune;
        double threshold = 0.5;
        std::string out_dir = "gamma_audit";
    } ga;
    tg->add_option("-i,--input", ga.inputs, "client CSV (repeat per client)")->required();
    add_schema_flags(tg, ga.schema);
    tg->add_option("--train-fraction", ga.fraction)->capture_default_str();
    tg->add_option("--split-seed", ga.split_seed)->capture_default_str();
    tg->add_option("--lambda", ga.lambda, "fairness weight to tune gamma for")->required();
    tg->add_option("--framework", ga.fed.framework)
        ->transform(CLI::CheckedTransformer(framework_map, CLI::ignore_case));
    tg->add_option("--rounds", ga.fed.rounds)->capture_default_str();
    tg->add_option("--aggregation", ga.fed.aggregation)
        ->transform(CLI::CheckedTransformer(aggregation_map, CLI::ignore_case));
    tg->add_option("--inner-steps", ga.fed.inner_steps)->capture_default_str();
    tg->add_option("--alpha", ga.fed.inner_learning_rate, "perfedavg inner rate")
        ->capture_default_str();
    tg->add_option("--epochs", ga.fed.train.epochs)->capture_default_str();
    tg->add_option("--batch", ga.fed.train.batch_size)->capture_default_str();
    tg->add_option("--lr", ga.fed.train.learning_rate)->capture_default_str();
    tg->add_option("--seed", ga.fed.train.seed)->capture_default_str();
    tg->add_option("--form", ga.fed.train.penalty.form)
        ->transform(CLI::CheckedTransformer(form_map, CLI::ignore_case));
    tg->add_option("--gamma-lo", ga.tune.gamma_lo)->capture_default_str();
    tg->add_option("--gamma-hi", ga.tune.gamma_hi)->capture_default_str();
    tg->add_option("--coarse", ga.tune.coarse_count, "step-1 grid size m")->capture_default_str();
    tg->add_option("--fine", ga.tune.refine_count, "step-2 grid size m'")->capture_default_str();
    tg->add_option("--slack", ga.tune.auroc_slack, "allowed mean-AUROC drop")
        ->capture_default_str();
    tg->add_option("--refine", ga.tune.refine, "refine convention")
        ->transform(CLI::CheckedTransformer(refine_map, CLI::ignore_case));
    tg->add_option("--threshold", ga.threshold)->capture_default_str();
    tg->add_option("-o,--out-dir", ga.out_dir, "where to write the audit tables")
        ->capture_default_str();
    tg->callback([&] {
        std::vector<fairfml::Dataset> train_sets, test_sets;
        load_and_split(ga.inputs, to_schema(ga.schema), ga.fraction, ga.split_seed, train_sets,
                       test_sets);
        const fairfml::TwoStepGammaResult r = fairfml::two_step_gamma(
            ga.lambda, train_sets, test_sets, ga.fed, ga.tune, ga.threshold);
        std::filesystem::create_directories(ga.out_dir);
        std::ostringstream coarse, refined;
        fairfml::write_gamma_table_csv(r.coarse, coarse);
        fairfml::write_gamma_table_csv(r.refined, refined);
        write_file((std::filesystem::path(ga.out_dir) / "gamma_coarse.csv").string(),
                   coarse.str());
        write_file((std::filesystem::path(ga.out_dir) / "gamma_refined.csv").string(),
                   refined.str());
        std::cout << "step 1 pick " << fairfml::format_double(r.coarse.selected_gamma)
                  << ", refined over [" << fairfml::format_double(r.refine_lo) << ", "
                  << fairfml::format_double(r.refine_hi) << "]\n";
        std::cout << "gamma = " << fairfml::format_double(r.gamma) << " (audit tables in "
                  << ga.out_dir << ")\n";
    });

    // ---- run ----
    auto* run = app.add_subcommand(
        "run", "full six-model comparison (default: the built-in synthetic demo case)");
    struct {
        std::string config, save_config, output_dir;
        std::uint64_t seed = 0;
        std::vector<std::string> roster;
        fairfml::PenaltyForm form = fairfml::PenaltyForm::squared_average;
        fairfml::LambdaPolicy policy = fairfml::LambdaPolicy::min_across_clients;
        double pin_lambda = 0.0, pin_gamma = 0.0;
        std::vector<std::string> formats;
        bool parallel = false;
    } ru;
    run->add_option("-c,--config", ru.config, "experiment config JSON (omit for the demo case)");
    run->add_option("--save-config", ru.save_config, "write the effective config and exit");
    run->add_option("-o,--output-dir", ru.output_dir, "override the config's output directory");
    auto* seed_opt = run->add_option("--seed", ru.seed, "override the training seed");
    run->add_option("--roster", ru.roster,
                    "models to run: central,local,fedavg,perfedavg,fairfml-fedavg,fairfml-perfedavg")
        ->delimiter(',');
    auto* form_opt = run->add_option("--form", ru.form, "penalty form")
                         ->transform(CLI::CheckedTransformer(form_map, CLI::ignore_case));
    auto* policy_opt = run->add_option("--lambda-policy", ru.policy)
                           ->transform(CLI::CheckedTransformer(policy_map, CLI::ignore_case));
    auto* pin_l_opt = run->add_option("--pin-lambda", ru.pin_lambda,
                                      "skip the sweep, use this lambda");
    auto* pin_g_opt = run->add_option("--pin-gamma", ru.pin_gamma,
                                      "skip the gamma search, use this gamma");
    run->add_option("--formats", ru.formats, "subset of csv,markdown,metadata")->delimiter(',');
    run->add_flag("--parallel", ru.parallel, "run clients on worker threads");
    run->callback([&] {
        fairfml::ExperimentConfig cfg = ru.config.empty() ? fairfml::default_demo_config()
                                                          : fairfml::load_config(ru.config);
        if (!ru.output_dir.empty()) cfg.output_dir = ru.output_dir;
        if (seed_opt->count() > 0) cfg.federation.train.seed = ru.seed;
        if (!ru.roster.empty()) {
            cfg.roster.clear();
            for (const auto& t : ru.roster) cfg.roster.push_back(fairfml::model_kind_from_token(t));
        }
        if (form_opt->count() > 0) cfg.federation.train.penalty.form = ru.form;
        if (policy_opt->count() > 0) cfg.tuning.lambda_policy = ru.policy;
        if (pin_l_opt->count() > 0) cfg.pinned_lambda = ru.pin_lambda;
        if (pin_g_opt->count() > 0) cfg.pinned_gamma = ru.pin_gamma;
        if (!ru.formats.empty()) {
            cfg.emit_csv = cfg.emit_markdown = cfg.emit_metadata = false;
            for (const auto& f : ru.formats) {
                if (f == "csv")
                    cfg.emit_csv = true;
                else if (f == "markdown" || f == "md")
                    cfg.emit_markdown = true;
                else if (f == "metadata")
                    cfg.emit_metadata = true;
                else
                    throw std::runtime_error("unknown format '" + f + "'");
            }
        }
        if (ru.parallel) cfg.federation.parallel_clients = true;
        if (!ru.save_config.empty()) {
            fairfml::save_config(cfg, ru.save_config);
            std::cout << "wrote " << ru.save_config << '\n';
            return;
        }

        const fairfml::ExperimentResult result = fairfml::run_experiment(cfg);
        std::cout << "lambda = " << fairfml::format_double(result.lambda)
                  << ", gamma = " << fairfml::format_double(result.gamma)
                  << (result.tuned ? " (tuned)" : " (pinned)") << '\n';
        for (const auto& m : result.models)
            std::cout << "  " << fairfml::model_token(m.kind) << ": avg auc "
                      << na_or(m.average.auroc) << ", dpd " << na_or(m.average.dpd) << ", eod "
                      << na_or(m.average.eod) << '\n';
        for (const auto& f : fairfml::emit_report(result, cfg.output_dir))
            std::cout << "wrote " << f << '\n';
    });

    // ---- report ----
    auto* rep = app.add_subcommand("report", "re-emit report files from a saved result.json");
    struct {
        std::string result, out_dir = "out";
        std::vector<std::string> formats;
    } re;
    rep->add_option("-i,--result", re.result, "result.json from a previous run")->required();
    rep->add_option("-o,--out-dir", re.out_dir, "output directory")->capture_default_str();
    rep->add_option("--formats", re.formats, "subset of csv,markdown,metadata")->delimiter(',');
    rep->callback([&] {
        fairfml::ExperimentResult result = fairfml::result_from_json(read_file(re.result));
        if (!re.formats.empty()) {
            result.config.emit_csv = result.config.emit_markdown = result.config.emit_metadata =
                false;
            for (const auto& f : re.formats) {
                if (f == "csv")
                    result.config.emit_csv = true;
                else if (f == "markdown" || f == "md")
                    result.config.emit_markdown = true;
                else if (f == "metadata")
                    result.config.emit_metadata = true;
                else
                    throw std::runtime_error("unknown format '" + f + "'");
            }
        }
        for (const auto& f : fairfml::emit_report(result, re.out_dir))
            std::cout << "wrote " << f << '\n';
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

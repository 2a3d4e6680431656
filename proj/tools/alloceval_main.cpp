#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <iostream>
#include <optional>
#include <string>

#include "alloceval/estimators.hpp"
#include "alloceval/experiments.hpp"
#include "alloceval/inference.hpp"
#include "alloceval/io.hpp"

namespace {

using namespace alloceval;

std::string fmt9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string with_replicate_suffix(const std::string& path, int rep, int total) {
    if (total <= 1) return path;
    const auto dot = path.rfind('.');
    if (dot == std::string::npos) return path + "_" + std::to_string(rep);
    return path.substr(0, dot) + "_" + std::to_string(rep) + path.substr(dot);
}

int cmd_simulate(const std::string& config_path) {
    const RunConfig cfg = parse_config(config_path);
    if (cfg.dataset_path.empty()) throw config_error("simulate requires output.dataset_path");
    cfg.plan.validate();
    for (int rep = 0; rep < cfg.dataset_replicates; ++rep) {
        Rng rng = make_rng(child_seed(splitmix64(cfg.plan.simulator.seed) ^ 0x5245504cULL, rep));
        RctDataset data;
        if (cfg.plan.simulator.domain_tag == DomainTag::corner_case) {
            data = run_corner_rct(cfg.plan.simulator.n, cfg.plan.policy.alpha,
                                  cfg.plan.simulator.corner_sigma, rng,
                                  cfg.plan.simulator.boost_center);
        } else {
            const AgentCohort cohort_p = sample_cohort(cfg.plan, rng);
            const AgentCohort cohort_c = sample_cohort(cfg.plan, rng);
            data = run_rct(cohort_p, cohort_c, cfg.plan.policy, cfg.plan.horizon, rng,
                           cfg.plan.simulator.initial_state);
        }
        const std::string path = with_replicate_suffix(cfg.dataset_path, rep, cfg.dataset_replicates);
        write_rct_csv(data, path);
        std::cout << path << "\n";
    }
    return 0;
}

int cmd_estimate(const std::string& dataset_path, const std::vector<std::string>& estimators,
                 double level, std::optional<int> truncate, std::optional<int> upto_round,
                 std::optional<double> weight, double alpha_override) {
    const RctDataset data = read_rct_csv(dataset_path, alpha_override);
    for (const std::string& name : estimators) {
        const EstimatorKind kind = estimator_kind_from_string(name);
        EstimateReport report;
        switch (kind) {
            case EstimatorKind::base: report = estimate_base(data, truncate, level); break;
            case EstimatorKind::subgroup:
                report = estimate_subgroup(data, upto_round, truncate, level);
                break;
            case EstimatorKind::threshold: report = estimate_threshold(data, truncate, level); break;
            case EstimatorKind::hybrid: report = estimate_hybrid(data, weight, truncate, level); break;
            case EstimatorKind::mate_reshuffle: {
                report.estimator = kind;
                report.point = estimate_mate_reshuffle(data, truncate);
                report.level = level;
                report.n = data.n();
                report.alpha = data.alpha;
                break;
            }
            case EstimatorKind::regression_base:
                report = estimate_regression(data, RegressionKind::base, upto_round, truncate, level);
                break;
            case EstimatorKind::regression_subgroup:
                report = estimate_regression(data, RegressionKind::subgroup, upto_round, truncate,
                                             level);
                break;
        }
        std::cout << report_to_json(report) << "\n";
    }
    return 0;
}

int cmd_coverage(const std::string& config_path, bool is_sweep) {
    const RunConfig cfg = parse_config(config_path);
    std::vector<std::pair<double, std::map<EstimatorKind, CoverageSummary>>> rows;
    std::string axis;
    if (is_sweep) {
        if (!cfg.plan.sweep_axis) throw config_error("sweep requires experiment.sweep in config");
        axis = cfg.plan.sweep_axis->name;
        rows = sweep(cfg.plan);
    } else {
        ExperimentPlan plan = cfg.plan;
        plan.sweep_axis.reset();
        rows.emplace_back(0.0, coverage_experiment(plan));
    }
    const std::string csv = coverage_csv(rows, axis);
    std::cout << csv;
    if (!cfg.coverage_csv_path.empty()) {
        std::ofstream out(cfg.coverage_csv_path, std::ios::binary);
        if (!out) throw config_error("cannot open '" + cfg.coverage_csv_path + "' for writing");
        out << csv;
    }
    if (!cfg.series_json_path.empty()) {
        std::ofstream out(cfg.series_json_path, std::ios::binary);
        if (!out) throw config_error("cannot open '" + cfg.series_json_path + "' for writing");
        out << coverage_series_json(rows, axis) << "\n";
    }
    return 0;
}

int cmd_corner_case(int n, double alpha, double sigma, int replicates, std::uint64_t seed,
                    int workers, const std::string& center, double level, int knn_k) {
    BoostCenter boost = BoostCenter::quantile;
    if (center == "alpha")
        boost = BoostCenter::alpha_literal;
    else if (center != "quantile")
        throw config_error("unknown boost center '" + center + "'");
    const CornerStudyResult result =
        corner_case_study(n, alpha, sigma, replicates, seed, workers, boost, level,
                          knn_k > 0 ? std::optional<int>(knn_k) : std::nullopt);
    std::string out = "{\"replicates\":" + std::to_string(result.replicates) + ",\"estimators\":{";
    bool first = true;
    for (const auto& [kind, stats] : result.stats) {
        if (!first) out += ",";
        first = false;
        out += "\"" + to_string(kind) + "\":{\"mean_point\":" + fmt9(stats.mean_point) +
               ",\"std_dev\":" + fmt9(stats.std_dev) +
               ",\"mean_ci_width\":" + fmt9(stats.mean_ci_width) + "}";
    }
    out += "}}";
    std::cout << out << "\n";
    return 0;
}

int cmd_compare(const std::string& path1, const std::string& path2, double level) {
    const EstimateReport r1 = report_from_json_file(path1);
    const EstimateReport r2 = report_from_json_file(path2);
    const auto ci = compare_policies(r1, r2, level);
    std::cout << "{\"diff\":" << fmt9(r1.point - r2.point) << ",\"ci_low\":" << fmt9(ci.first)
              << ",\"ci_high\":" << fmt9(ci.second) << ",\"level\":" << fmt9(level) << "}\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Index-policy RCT evaluation: simulators, estimators, inference, experiments"};
    app.require_subcommand(1);

    std::string config_path, dataset_path, report1, report2, center = "quantile";
    std::vector<std::string> estimators = {"subgroup"};
    double level = 0.95, alpha_override = 0.0, sigma = 0.05, alpha = 0.5;
    int truncate = 0, upto_round = 0, n = 500, replicates = 10000, workers = 0, knn_k = 0;
    std::uint64_t seed = 1;
    double weight = std::numeric_limits<double>::quiet_NaN();

    auto* sim = app.add_subcommand("simulate", "Write RCT dataset CSV files from a config");
    sim->add_option("config", config_path, "config file")->required();

    auto* est = app.add_subcommand("estimate", "Estimate treatment effects from a dataset CSV");
    est->add_option("dataset", dataset_path, "dataset CSV")->required();
    est->add_option("--estimator", estimators, "estimator name(s)");
    est->add_option("--level", level, "confidence level");
    est->add_option("--truncate", truncate, "use only the first T timesteps");
    est->add_option("--upto-round", upto_round, "subgroup of the first x rounds");
    est->add_option("--weight", weight, "explicit hybrid weight");
    est->add_option("--alpha", alpha_override, "override the treated fraction");

    auto* cov = app.add_subcommand("coverage", "Run a coverage experiment from a config");
    cov->add_option("config", config_path, "config file")->required();

    auto* sw = app.add_subcommand("sweep", "Run a hyperparameter sweep from a config");
    sw->add_option("config", config_path, "config file")->required();

    auto* corner = app.add_subcommand("corner-case", "Replicate the corner-case study");
    corner->add_option("--n", n, "agents per arm");
    corner->add_option("--alpha", alpha, "treated fraction");
    corner->add_option("--sigma", sigma, "boost bandwidth");
    corner->add_option("--replicates", replicates, "replicate count");
    corner->add_option("--seed", seed, "root seed");
    corner->add_option("--workers", workers, "worker threads (0 = auto)");
    corner->add_option("--center", center, "boost center: quantile | alpha");
    corner->add_option("--level", level, "confidence level");
    corner->add_option("--knn-k", knn_k, "window for the plug-in intervals (0 = ceil(sqrt(n)))");

    auto* cmp = app.add_subcommand("compare", "Compare two estimate report JSON files");
    cmp->add_option("report1", report1, "first report")->required();
    cmp->add_option("report2", report2, "second report")->required();
    cmp->add_option("--level", level, "confidence level");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config_path);
        if (est->parsed())
            return cmd_estimate(dataset_path, estimators, level,
                                truncate > 0 ? std::optional<int>(truncate) : std::nullopt,
                                upto_round > 0 ? std::optional<int>(upto_round) : std::nullopt,
                                std::isnan(weight) ? std::nullopt : std::optional<double>(weight),
                                alpha_override);
        if (cov->parsed()) return cmd_coverage(config_path, false);
        if (sw->parsed()) return cmd_coverage(config_path, true);
        if (corner->parsed())
            return cmd_corner_case(n, alpha, sigma, replicates, seed, workers, center, level,
                                   knn_k);
        if (cmp->parsed()) return cmd_compare(report1, report2, level);
    } catch (const invariant_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const numerical_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

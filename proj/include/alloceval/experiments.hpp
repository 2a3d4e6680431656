#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "alloceval/simulators.hpp"
#include "alloceval/types.hpp"

namespace alloceval {

struct SweepAxis {
    std::string name;  // alpha | n | horizon | effect_cap | level | rounds | truncate_at
    std::vector<double> grid;
};

struct ExperimentPlan {
    SimulatorConfig simulator;
    PolicySpec policy;
    int horizon = 10;
    int replicates = 500;
    std::vector<EstimatorKind> estimators = {EstimatorKind::base, EstimatorKind::subgroup};
    double level = 0.95;
    std::optional<SweepAxis> sweep_axis;
    std::optional<int> truncate_at;
    int estimand_reps = 1000;
    int workers = 0;  // 0 = hardware concurrency

    // Stand-in pools for the tb / mmitra domains (loaded from CSV or bundled).
    std::vector<TransitionModel> passive_pool;
    std::vector<CountTable> trajectory_pool;

    void validate() const;
};

// Bundled synthetic stand-in pools with documented generative recipes, used
// when no externally fitted pool is ingested.
std::vector<TransitionModel> bundled_passive_pool(int size, std::uint64_t seed);
std::vector<CountTable> bundled_trajectory_pool(int size, std::uint64_t seed);

AgentCohort sample_cohort(const ExperimentPlan& plan, Rng& rng);

// Monte-Carlo oracle for tau_new: analytic expected-reward differences for the
// policy-selected agents, averaged over freshly sampled cohorts.
double monte_carlo_estimand(const ExperimentPlan& plan);

// One full replicate RCT and all requested estimator reports.
std::map<EstimatorKind, EstimateReport> run_replicate(const ExperimentPlan& plan,
                                                      int replicate_index);

std::map<EstimatorKind, CoverageSummary> coverage_experiment(const ExperimentPlan& plan);

std::vector<std::pair<double, std::map<EstimatorKind, CoverageSummary>>> sweep(
    const ExperimentPlan& plan);

struct CornerStats {
    double mean_point = 0.0;
    double std_dev = 0.0;
    double mean_ci_width = 0.0;
};

struct CornerStudyResult {
    std::map<EstimatorKind, CornerStats> stats;  // base, subgroup, hybrid
    int replicates = 0;
};

// Two-arm RCT over the covariate-space corner construction (no MDP).
RctDataset run_corner_rct(int n, double alpha, double sigma, Rng& rng,
                          BoostCenter boost_center = BoostCenter::quantile);

// Intervals come from the order-statistic plug-in family (the one the
// boundary-boost analysis is phrased in); knn_k absent = ceil(sqrt(n)), a
// window narrow enough to resolve the boost instead of averaging it away.
CornerStudyResult corner_case_study(int n, double alpha, double sigma, int replicates,
                                    std::uint64_t seed, int workers = 0,
                                    BoostCenter boost_center = BoostCenter::quantile,
                                    double level = 0.95,
                                    std::optional<int> knn_k = std::nullopt);

}  // namespace alloceval

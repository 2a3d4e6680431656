#pragma once

#include <optional>
#include <utility>

#include "alloceval/estimators.hpp"
#include "alloceval/types.hpp"

namespace alloceval {

double normal_cdf(double x);
double normal_quantile(double p);

enum class VarianceMethod { sg_simple, sg_knn, base_knn, welch, ols_classical, hyb_knn };

struct VarianceEstimate {
    double value = 0.0;  // estimate of the asymptotic variance of sqrt(n)*(theta - tau)
    VarianceMethod method = VarianceMethod::sg_simple;
    std::optional<int> k_used;
    bool clamped = false;
};

// Closed-form asymptotic variance of the subgroup estimator.
VarianceEstimate var_sg_simple(const RctDataset& data,
                               std::optional<int> truncate_at = std::nullopt);

// The same variance evaluated on an explicit subgroup view (e.g. a partial
// first-x-rounds subgroup); alpha is the treated fraction the view represents.
VarianceEstimate th3_variance(const SubgroupView& view, int n, double alpha);

// Mean of the k+1 rewards at index ranks ceil(alpha*n)-k .. ceil(alpha*n);
// input must be the selected rewards ordered by index rank (ascending).
double conditional_mean_at_quantile(const std::vector<double>& sorted_selected_rewards, int k);

// Plug-in variance estimators built on order-statistic conditional means.
// k absent = auto: min(ceil(n^0.75), budget - 1).
VarianceEstimate var_sg_knn(const RctDataset& data, std::optional<int> k = std::nullopt,
                            std::optional<int> truncate_at = std::nullopt);
VarianceEstimate var_base_knn(const RctDataset& data, std::optional<int> k = std::nullopt,
                              std::optional<int> truncate_at = std::nullopt);

struct HybridWeightTerms {
    double A = 0.0;
    double B = 0.0;
    double C = 0.0;
    double w_star = 0.0;
};

// Raw plug-in A/B/C terms; w_star is NaN when A <= 0.
HybridWeightTerms hybrid_terms(const RctDataset& data, std::optional<int> k = std::nullopt,
                               std::optional<int> truncate_at = std::nullopt);

// As hybrid_terms, but rejects degenerate A <= 0 (a collapsed variance parabola).
HybridWeightTerms hybrid_optimal_weight(const RctDataset& data,
                                        std::optional<int> k = std::nullopt,
                                        std::optional<int> truncate_at = std::nullopt);

VarianceEstimate hybrid_variance(const HybridWeightTerms& terms, double w, double alpha);

std::pair<double, double> confidence_interval(double point, double sigma2, int n, double level);

// One-sided p-value for H0: tau <= 0.
double p_value_positive_effect(double point, double sigma2, int n);

std::pair<double, double> compare_policies(const EstimateReport& report1,
                                           const EstimateReport& report2, double level);

// Conservative baseline: the subgroup variance with its (nonpositive) third
// term dropped, so its interval is at least as wide on every dataset.
VarianceEstimate welch_variance(const SubgroupView& view, int n, double alpha);
std::pair<double, double> welch_interval(const SubgroupView& view, int n, double alpha,
                                         double level);

}  // namespace alloceval

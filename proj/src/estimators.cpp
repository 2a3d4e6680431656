#include "alloceval/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <unordered_set>

#include "alloceval/inference.hpp"
#include "alloceval/policies.hpp"

namespace alloceval {

namespace {

// Positions of arm records ordered by (index, agent_id).
std::vector<int> order_by_index(const std::vector<RctRecord>& arm, const std::vector<int>& pos) {
    std::vector<int> out = pos;
    std::sort(out.begin(), out.end(), [&](int a, int b) {
        if (arm[a].index != arm[b].index) return arm[a].index < arm[b].index;
        return arm[a].agent_id < arm[b].agent_id;
    });
    return out;
}

std::vector<int> treated_positions(const RctDataset& data, int upto_round) {
    std::vector<int> pos;
    for (int i = 0; i < data.n(); ++i) {
        const int w = data.policy_arm[i].treat_week;
        if (w >= 1 && w <= upto_round) pos.push_back(i);
    }
    return order_by_index(data.policy_arm, pos);
}

std::vector<int> counterfactual_positions(const RctDataset& data, int upto_round) {
    const int n = data.n();
    std::vector<double> indices(n);
    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) {
        indices[i] = data.control_arm[i].index;
        ids[i] = data.control_arm[i].agent_id;
    }
    std::unordered_set<int> taken;
    for (int r = 1; r <= upto_round; ++r) {
        const auto round = allocate(indices, ids, data.alpha, taken);
        taken.insert(round.selected.begin(), round.selected.end());
    }
    std::vector<int> pos;
    for (int i = 0; i < n; ++i)
        if (taken.count(ids[i])) pos.push_back(i);
    return order_by_index(data.control_arm, pos);
}

void fill_inference(EstimateReport& report, const VarianceEstimate& var, double level) {
    report.variance = var.value;
    report.variance_clamped = var.clamped;
    auto ci = confidence_interval(report.point, var.value, report.n, level);
    report.ci_low = ci.first;
    report.ci_high = ci.second;
    if (var.value > 0.0) report.p_value = p_value_positive_effect(report.point, var.value, report.n);
}

double boundary_index(const RctDataset& data) {
    double lambda = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (const auto& rec : data.policy_arm)
        if (rec.treat_week >= 1) {
            lambda = std::max(lambda, rec.index);
            any = true;
        }
    if (!any) throw invariant_error("no treated agents in policy arm");
    return lambda;
}

}  // namespace

SubgroupView build_subgroup_view(const RctDataset& data, int upto_round,
                                 std::optional<int> truncate_at) {
    if (upto_round < 1 || upto_round > data.rounds)
        throw std::out_of_range("upto_round outside [1, rounds]");
    SubgroupView view;
    for (int i : treated_positions(data, upto_round))
        view.treated_rewards.push_back(total_reward(data.policy_arm[i], truncate_at));
    for (int i : counterfactual_positions(data, upto_round))
        view.counterfactual_rewards.push_back(total_reward(data.control_arm[i], truncate_at));
    view.budget = upto_round * data.per_round_budget();
    if (static_cast<int>(view.treated_rewards.size()) != view.budget ||
        static_cast<int>(view.counterfactual_rewards.size()) != view.budget)
        throw invariant_error("subgroup view size does not match budget");
    return view;
}

EstimateReport estimate_base(const RctDataset& data, std::optional<int> truncate_at,
                             double level) {
    const int n = data.n();
    double sum_p = 0.0, sum_c = 0.0;
    for (const auto& rec : data.policy_arm) sum_p += total_reward(rec, truncate_at);
    for (const auto& rec : data.control_arm) sum_c += total_reward(rec, truncate_at);
    EstimateReport report;
    report.estimator = EstimatorKind::base;
    report.point = (sum_p - sum_c) / data.budget();
    report.level = level;
    report.n = n;
    report.alpha = data.alpha;
    // The plug-in variance needs at least two selected agents (k <= budget - 1);
    // on a budget-1 dataset the point estimate is still well defined, so report
    // it without an interval.
    if (data.budget() >= 2)
        fill_inference(report, var_base_knn(data, std::nullopt, truncate_at), level);
    return report;
}

EstimateReport estimate_subgroup(const RctDataset& data, std::optional<int> upto_round,
                                 std::optional<int> truncate_at, double level) {
    const int upto = upto_round.value_or(data.rounds);
    const auto view = build_subgroup_view(data, upto, truncate_at);
    const double sum_t = std::accumulate(view.treated_rewards.begin(), view.treated_rewards.end(), 0.0);
    const double sum_c = std::accumulate(view.counterfactual_rewards.begin(),
                                         view.counterfactual_rewards.end(), 0.0);
    EstimateReport report;
    report.estimator = EstimatorKind::subgroup;
    report.point = (sum_t - sum_c) / view.budget;
    report.level = level;
    report.n = data.n();
    report.alpha = data.alpha;
    const double alpha_eff = (upto == data.rounds && data.rounds == 1)
                                 ? data.alpha
                                 : static_cast<double>(view.budget) / data.n();
    fill_inference(report, th3_variance(view, data.n(), alpha_eff), level);
    return report;
}

EstimateReport estimate_threshold(const RctDataset& data, std::optional<int> truncate_at,
                                  double level) {
    if (data.rounds != 1) throw std::invalid_argument("threshold estimator requires rounds = 1");
    const double lambda = boundary_index(data);
    double sum_t = 0.0;
    int count_t = 0;
    for (const auto& rec : data.policy_arm)
        if (rec.treat_week >= 1) {
            sum_t += total_reward(rec, truncate_at);
            ++count_t;
        }
    double sum_c = 0.0;
    int count_c = 0;
    for (const auto& rec : data.control_arm)
        if (rec.index <= lambda) {
            sum_c += total_reward(rec, truncate_at);
            ++count_c;
        }
    if (count_c == 0)
        throw numerical_error("threshold estimator: no control-arm agent with index <= lambda");
    EstimateReport report;
    report.estimator = EstimatorKind::threshold;
    report.point = sum_t / count_t - sum_c / count_c;
    report.level = level;
    report.n = data.n();
    report.alpha = data.alpha;
    return report;
}

EstimateReport estimate_hybrid(const RctDataset& data, std::optional<double> weight,
                               std::optional<int> truncate_at, double level) {
    if (data.rounds != 1) throw std::invalid_argument("hybrid estimator requires rounds = 1");
    const double theta_sg = estimate_subgroup(data, std::nullopt, truncate_at, level).point;
    const double theta_base = estimate_base(data, truncate_at, level).point;

    double w;
    HybridWeightTerms terms;
    if (weight) {
        w = *weight;
        terms = hybrid_terms(data, std::nullopt, truncate_at);
    } else {
        terms = hybrid_optimal_weight(data, std::nullopt, truncate_at);
        w = terms.w_star;
    }
    EstimateReport report;
    report.estimator = EstimatorKind::hybrid;
    report.point = (1.0 - w) * theta_sg + w * theta_base;
    report.level = level;
    report.n = data.n();
    report.alpha = data.alpha;
    report.hybrid_weight = w;
    fill_inference(report, hybrid_variance(terms, w, data.alpha), level);
    return report;
}

double estimate_mate_reshuffle(const RctDataset& data, std::optional<int> truncate_at) {
    if (data.rounds != 1) throw std::invalid_argument("mate_reshuffle requires rounds = 1");
    const int n = data.n();
    const double lambda = boundary_index(data);

    double fill_sum = 0.0;
    int fill_count = 0;
    double sum_p_kept = 0.0;  // policy-arm rewards outside N^p
    int np = 0;
    for (const auto& rec : data.policy_arm) {
        const double r = total_reward(rec, truncate_at);
        if (rec.treat_week == 0) {
            ++np;
            fill_sum += r;
            ++fill_count;
        } else {
            sum_p_kept += r;
        }
    }
    double sum_c_kept = 0.0;  // control-arm rewards outside N^c
    int nc = 0;
    for (const auto& rec : data.control_arm) {
        const double r = total_reward(rec, truncate_at);
        if (rec.index > lambda) {
            ++nc;
            fill_sum += r;
            ++fill_count;
        } else {
            sum_c_kept += r;
        }
    }
    if (fill_count == 0) throw numerical_error("mate_reshuffle: N^c and N^p are both empty");
    const double r_fill = fill_sum / fill_count;
    return (sum_p_kept + (np - nc) * r_fill - sum_c_kept) / n;
}

EstimateReport estimate_regression(const RctDataset& data, RegressionKind kind,
                                   std::optional<int> upto_round, std::optional<int> truncate_at,
                                   double level) {
    const int n = data.n();
    const int upto = upto_round.value_or(data.rounds);

    std::vector<double> rewards;
    std::vector<double> treated;
    std::vector<const std::vector<double>*> covariates;
    if (kind == RegressionKind::subgroup) {
        for (int i : treated_positions(data, upto)) {
            rewards.push_back(total_reward(data.policy_arm[i], truncate_at));
            treated.push_back(1.0);
            covariates.push_back(&data.policy_arm[i].covariates);
        }
        for (int i : counterfactual_positions(data, upto)) {
            rewards.push_back(total_reward(data.control_arm[i], truncate_at));
            treated.push_back(0.0);
            covariates.push_back(&data.control_arm[i].covariates);
        }
    } else {
        for (const auto& rec : data.policy_arm) {
            rewards.push_back(total_reward(rec, truncate_at));
            treated.push_back(1.0);  // arm-membership indicator
            covariates.push_back(&rec.covariates);
        }
        for (const auto& rec : data.control_arm) {
            rewards.push_back(total_reward(rec, truncate_at));
            treated.push_back(0.0);
            covariates.push_back(&rec.covariates);
        }
    }

    const int rows = static_cast<int>(rewards.size());
    const int dim = covariates.empty() ? 0 : static_cast<int>(covariates.front()->size());
    const int cols = 2 + dim;
    if (rows <= cols) throw std::invalid_argument("regression: too few observations");

    Eigen::MatrixXd X(rows, cols);
    Eigen::VectorXd y(rows);
    for (int i = 0; i < rows; ++i) {
        X(i, 0) = 1.0;
        X(i, 1) = treated[i];
        for (int j = 0; j < dim; ++j) X(i, 2 + j) = (*covariates[i])[j];
        y(i) = rewards[i];
    }

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < cols) {
        const auto perm = qr.colsPermutation().indices();
        std::string names;
        for (int j = qr.rank(); j < cols; ++j) {
            const int col = perm(j);
            if (!names.empty()) names += ", ";
            if (col == 0)
                names += "intercept";
            else if (col == 1)
                names += "treatment";
            else
                names += "covariate_" + std::to_string(col - 2);
        }
        throw numerical_error("rank-deficient regression design; offending columns: " + names);
    }
    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd resid = y - X * beta;
    const double sigma2_hat = resid.squaredNorm() / (rows - cols);
    const Eigen::MatrixXd xtx_inv = (X.transpose() * X).inverse();
    const double se2 = sigma2_hat * xtx_inv(1, 1);

    EstimateReport report;
    report.estimator = kind == RegressionKind::subgroup ? EstimatorKind::regression_subgroup
                                                        : EstimatorKind::regression_base;
    report.point = beta(1);
    report.level = level;
    report.n = n;
    report.alpha = data.alpha;
    VarianceEstimate var;
    var.method = VarianceMethod::ols_classical;
    var.value = static_cast<double>(n) * se2;  // report scale: Var(sqrt(n) * theta)
    fill_inference(report, var, level);
    return report;
}

}  // namespace alloceval

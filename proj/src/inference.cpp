#include "alloceval/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace alloceval {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kSqrt2Pi = 2.50662827463100050242;

}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("normal_quantile: p outside (0,1)");
    // Acklam's rational approximation, then one Halley refinement step.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * kSqrt2Pi * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
    return x;
}

namespace {

// Reward sums/moments of the subgroup selection plus the control-arm remainder,
// the shared ingredients of every plug-in variance below. All means and second
// moments are normalized by n (not by the group size).
struct PlugIns {
    int n = 0;
    int m = 0;  // budget
    double alpha = 0.0;
    double sum_t = 0.0, sum_c = 0.0;
    double mu_t = 0.0, mu_c = 0.0, mu0 = 0.0;
    double s2_t = 0.0, s2_c = 0.0, s2_0 = 0.0;
    double var_r0_full = 0.0;  // plain sample variance of all control rewards
    std::vector<double> treated_sorted;  // by index rank, ascending
    std::vector<double> cf_sorted;
};

PlugIns compute_plugins(const RctDataset& data, std::optional<int> truncate_at) {
    data.validate(false);
    const int n = data.n();
    const int m = data.budget();
    PlugIns p;
    p.n = n;
    p.m = m;
    p.alpha = data.rounds == 1 ? data.alpha : static_cast<double>(m) / n;

    const auto view = build_subgroup_view(data, data.rounds, truncate_at);
    p.treated_sorted = view.treated_rewards;
    p.cf_sorted = view.counterfactual_rewards;

    for (double r : p.treated_sorted) {
        p.sum_t += r;
        p.s2_t += r * r;
    }
    for (double r : p.cf_sorted) {
        p.sum_c += r;
        p.s2_c += r * r;
    }
    p.mu_t = p.sum_t / n;
    p.mu_c = p.sum_c / n;
    p.s2_t = p.s2_t / n - p.mu_t * p.mu_t;
    p.s2_c = p.s2_c / n - p.mu_c * p.mu_c;

    // control-arm remainder + full control arm
    double sum_all = 0.0, sq_all = 0.0;
    for (const auto& rec : data.control_arm) {
        const double r = total_reward(rec, truncate_at);
        sum_all += r;
        sq_all += r * r;
    }
    const double sum0 = sum_all - p.sum_c;
    double sq0 = sq_all;
    for (double r : p.cf_sorted) sq0 -= r * r;
    p.mu0 = sum0 / n;
    p.s2_0 = sq0 / n - p.mu0 * p.mu0;
    const double mean_all = sum_all / n;
    p.var_r0_full = sq_all / n - mean_all * mean_all;
    return p;
}

VarianceEstimate clamp(double value, VarianceMethod method, std::optional<int> k = std::nullopt) {
    VarianceEstimate est;
    est.method = method;
    est.k_used = k;
    if (value < 0.0) {
        est.value = 0.0;
        est.clamped = true;
    } else {
        est.value = value;
    }
    return est;
}

int resolve_k(const PlugIns& p, std::optional<int> k) {
    if (k) {
        if (*k < 1 || *k > p.m - 1)
            throw std::out_of_range("k = " + std::to_string(*k) + " outside [1, " +
                                    std::to_string(p.m - 1) + "]");
        return *k;
    }
    const int auto_k = static_cast<int>(std::ceil(std::pow(p.n, 0.75)));
    return std::min(auto_k, p.m - 1);
}

}  // namespace

VarianceEstimate th3_variance(const SubgroupView& view, int n, double alpha) {
    if (n < 2) throw std::invalid_argument("th3_variance needs n >= 2");
    const double a = alpha;
    const int m = view.budget;
    double sum_t = 0.0, sum_c = 0.0;
    for (double r : view.treated_rewards) sum_t += r;
    for (double r : view.counterfactual_rewards) sum_c += r;
    // Deviations are taken from the selected-group means: that is the reading
    // under which constant rewards give 0 and dropping the third term recovers
    // the standard Welch z-variance.
    double t12 = 0.0;
    for (double r : view.treated_rewards) t12 += (r - sum_t / m) * (r - sum_t / m);
    for (double r : view.counterfactual_rewards) t12 += (r - sum_c / m) * (r - sum_c / m);
    t12 /= a * a * (n - 1);
    const double diff = sum_t - sum_c;
    const double t3 = (1.0 - a) * n / (a * (2.0 * n - 1.0) * static_cast<double>(m) * m) * diff * diff;
    return clamp(t12 - t3, VarianceMethod::sg_simple);
}

VarianceEstimate var_sg_simple(const RctDataset& data, std::optional<int> truncate_at) {
    const PlugIns p = compute_plugins(data, truncate_at);
    SubgroupView view;
    view.treated_rewards = p.treated_sorted;
    view.counterfactual_rewards = p.cf_sorted;
    view.budget = p.m;
    return th3_variance(view, p.n, p.alpha);
}

double conditional_mean_at_quantile(const std::vector<double>& sorted_selected_rewards, int k) {
    const int m = static_cast<int>(sorted_selected_rewards.size());
    if (k < 1 || k > m - 1)
        throw std::out_of_range("k = " + std::to_string(k) + " outside [1, " +
                                std::to_string(m - 1) + "]");
    double sum = 0.0;
    for (int i = m - k - 1; i < m; ++i) sum += sorted_selected_rewards[i];
    return sum / (k + 1);
}

VarianceEstimate var_sg_knn(const RctDataset& data, std::optional<int> k,
                            std::optional<int> truncate_at) {
    const PlugIns p = compute_plugins(data, truncate_at);
    const int kk = resolve_k(p, k);
    const double mh_p = conditional_mean_at_quantile(p.treated_sorted, kk);
    const double mh_c = conditional_mean_at_quantile(p.cf_sorted, kk);
    const double a = p.alpha;
    const double value = (a * (1.0 - a) * (mh_p * mh_p + mh_c * mh_c) -
                          2.0 * (1.0 - a) * (mh_p * p.mu_t + mh_c * p.mu_c) + p.s2_t + p.s2_c) /
                         (a * a);
    return clamp(value, VarianceMethod::sg_knn, kk);
}

VarianceEstimate var_base_knn(const RctDataset& data, std::optional<int> k,
                              std::optional<int> truncate_at) {
    const PlugIns p = compute_plugins(data, truncate_at);
    const int kk = resolve_k(p, k);
    const double mh_p = conditional_mean_at_quantile(p.treated_sorted, kk);
    const double mh_c = conditional_mean_at_quantile(p.cf_sorted, kk);
    const double a = p.alpha;
    const double dm = mh_p - mh_c;
    const double value = (a * (1.0 - a) * dm * dm +
                          (2.0 * a * p.mu0 - 2.0 * (1.0 - a) * p.mu_t) * dm + p.s2_t + p.s2_0 -
                          2.0 * p.mu_t * p.mu0 + p.var_r0_full) /
                         (a * a);
    return clamp(value, VarianceMethod::base_knn, kk);
}

HybridWeightTerms hybrid_terms(const RctDataset& data, std::optional<int> k,
                               std::optional<int> truncate_at) {
    const PlugIns p = compute_plugins(data, truncate_at);
    const int kk = resolve_k(p, k);
    const double mh_p = conditional_mean_at_quantile(p.treated_sorted, kk);
    const double mh_c = conditional_mean_at_quantile(p.cf_sorted, kk);
    const double a = p.alpha;

    HybridWeightTerms t;
    t.A = 2.0 * a * (1.0 - a) * mh_c * mh_c + 2.0 * p.s2_0 - 4.0 * a * mh_c * p.mu0;
    t.B = -2.0 * (p.mu_t + p.mu_c) * p.mu0 + 2.0 * (p.mu_t + p.mu_c) * mh_c * (1.0 - a) +
          2.0 * a * p.mu0 * (mh_p + mh_c) - 2.0 * a * (1.0 - a) * mh_c * (mh_p + mh_c);
    t.C = p.s2_t + p.s2_c - 2.0 * (1.0 - a) * (mh_p * p.mu_t + mh_c * p.mu_c) +
          a * (1.0 - a) * (mh_p * mh_p + mh_c * mh_c);
    t.w_star = t.A > 0.0 ? -t.B / (2.0 * t.A) : std::numeric_limits<double>::quiet_NaN();
    return t;
}

HybridWeightTerms hybrid_optimal_weight(const RctDataset& data, std::optional<int> k,
                                        std::optional<int> truncate_at) {
    HybridWeightTerms t = hybrid_terms(data, k, truncate_at);
    if (t.A <= 0.0)
        throw numerical_error("degenerate hybrid variance: A = " + std::to_string(t.A) + " <= 0");
    return t;
}

VarianceEstimate hybrid_variance(const HybridWeightTerms& terms, double w, double alpha) {
    const double value = (w * w * terms.A + w * terms.B + terms.C) / (alpha * alpha);
    return clamp(value, VarianceMethod::hyb_knn);
}

std::pair<double, double> confidence_interval(double point, double sigma2, int n, double level) {
    if (sigma2 < 0.0) throw std::invalid_argument("negative variance");
    if (!(level > 0.0 && level < 1.0)) throw std::domain_error("level outside (0,1)");
    const double beta = 1.0 - level;
    const double z = normal_quantile(1.0 - beta / 2.0);
    const double half = z * std::sqrt(sigma2 / n);
    return {point - half, point + half};
}

double p_value_positive_effect(double point, double sigma2, int n) {
    if (sigma2 <= 0.0) throw numerical_error("degenerate variance in p-value computation");
    return 1.0 - normal_cdf(std::sqrt(static_cast<double>(n)) * point / std::sqrt(sigma2));
}

std::pair<double, double> compare_policies(const EstimateReport& report1,
                                           const EstimateReport& report2, double level) {
    if (!report1.variance || !report2.variance)
        throw invariant_error("compare_policies requires variance estimates in both reports");
    if (report1.n != report2.n)
        throw invariant_error("compare_policies requires equal n in both reports");
    const double diff = report1.point - report2.point;
    return confidence_interval(diff, *report1.variance + *report2.variance, report1.n, level);
}

VarianceEstimate welch_variance(const SubgroupView& view, int n, double alpha) {
    if (view.treated_rewards.size() < 2 || view.counterfactual_rewards.size() < 2)
        throw std::invalid_argument("welch_variance needs at least 2 samples per group");
    const int m = view.budget;
    double sum_t = 0.0, sum_c = 0.0;
    for (double r : view.treated_rewards) sum_t += r;
    for (double r : view.counterfactual_rewards) sum_c += r;
    double t12 = 0.0;
    for (double r : view.treated_rewards) t12 += (r - sum_t / m) * (r - sum_t / m);
    for (double r : view.counterfactual_rewards) t12 += (r - sum_c / m) * (r - sum_c / m);
    t12 /= alpha * alpha * (n - 1);
    VarianceEstimate est;
    est.method = VarianceMethod::welch;
    est.value = t12;
    return est;
}

std::pair<double, double> welch_interval(const SubgroupView& view, int n, double alpha,
                                         double level) {
    double sum_t = 0.0, sum_c = 0.0;
    for (double r : view.treated_rewards) sum_t += r;
    for (double r : view.counterfactual_rewards) sum_c += r;
    const double point = (sum_t - sum_c) / view.budget;
    return confidence_interval(point, welch_variance(view, n, alpha).value, n, level);
}

}  // namespace alloceval

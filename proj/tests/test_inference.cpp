#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "alloceval/estimators.hpp"
#include "alloceval/inference.hpp"
#include "test_support.hpp"

using namespace alloceval;
using testsupport::Rec;
using testsupport::make_dataset;
using testsupport::random_dataset;

namespace {

RctDataset constant_reward_dataset(double c, int n = 8, double alpha = 0.5) {
    std::vector<Rec> policy(n), control(n);
    const int m = static_cast<int>(std::ceil(alpha * n));
    for (int i = 0; i < n; ++i) {
        policy[i] = {0.1 * i, i < m ? 1 : 0, {c}};
        control[i] = {0.1 * i, 0, {c}};
    }
    return make_dataset(policy, control, alpha);
}

}  // namespace

TEST_CASE("normal quantile and cdf reference values") {
    CHECK(std::abs(normal_quantile(0.5)) <= 1e-9);
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-5));
    CHECK(normal_cdf(0.0) == 0.5);
    CHECK(normal_cdf(1.959964) == doctest::Approx(0.975).epsilon(1e-6));
    CHECK(std::abs(normal_quantile(0.8) + normal_quantile(0.2)) <= 1e-12);
}

TEST_CASE("normal quantile domain errors") {
    CHECK_THROWS_AS(normal_quantile(0.0), std::domain_error);
    CHECK_THROWS_AS(normal_quantile(1.0), std::domain_error);
    CHECK_THROWS_AS(normal_quantile(-0.2), std::domain_error);
}

TEST_CASE("quantile and cdf are mutual inverses") {
    std::mt19937_64 rng(41);
    std::uniform_real_distribution<double> unif(1e-6, 1.0 - 1e-6);
    for (int i = 0; i < 10000; ++i) {
        const double p = unif(rng);
        CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) < 1e-7);
    }
}

TEST_CASE("subgroup variance vanishes for constant rewards") {
    const VarianceEstimate est = var_sg_simple(constant_reward_dataset(3.0));
    CHECK(est.value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(!est.clamped);
}

TEST_CASE("clamping flags negative variance estimates") {
    // Constant-but-different selected rewards: the deviation terms vanish while
    // the subtracted term stays positive.
    RctDataset data = constant_reward_dataset(0.0);
    for (auto& rec : data.policy_arm)
        if (rec.treat_week == 1) rec.reward_path = {5.0};
    const VarianceEstimate est = var_sg_simple(data);
    CHECK(est.value == 0.0);
    CHECK(est.clamped);
}

TEST_CASE("welch interval dominates the subgroup interval") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 50; ++trial) {
        const RctDataset data = random_dataset(rng, 30, 0.4);
        const SubgroupView view = build_subgroup_view(data, 1);
        const auto welch = welch_interval(view, data.n(), data.alpha, 0.95);
        const VarianceEstimate th = th3_variance(view, data.n(), data.alpha);
        const double point = estimate_subgroup(data).point;
        const auto ci = confidence_interval(point, th.value, data.n(), 0.95);
        CHECK(welch.second - welch.first >= ci.second - ci.first);
    }
}

TEST_CASE("welch equals the subgroup variance when the sums match") {
    // Equal treated and counterfactual sums kill the subtracted term.
    const RctDataset data = make_dataset(
        {{0.1, 1, {2}}, {0.2, 1, {4}}, {0.8, 0, {0}}, {0.9, 0, {0}}},
        {{0.1, 0, {1}}, {0.2, 0, {5}}, {0.8, 0, {9}}, {0.9, 0, {9}}}, 0.5);
    const SubgroupView view = build_subgroup_view(data, 1);
    const double welch = welch_variance(view, data.n(), data.alpha).value;
    const double th = th3_variance(view, data.n(), data.alpha).value;
    CHECK(welch == th);
}

TEST_CASE("welch variance needs two samples per group") {
    SubgroupView view;
    view.treated_rewards = {1.0};
    view.counterfactual_rewards = {2.0};
    view.budget = 1;
    CHECK_THROWS_AS(welch_variance(view, 2, 0.5), std::invalid_argument);
}

TEST_CASE("conditional mean at the quantile") {
    CHECK(conditional_mean_at_quantile({9, 5, 1}, 1) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(conditional_mean_at_quantile({9, 5, 1}, 2) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(conditional_mean_at_quantile({4, 4, 4, 4}, 2) == 4.0);
    CHECK_THROWS_AS(conditional_mean_at_quantile({9, 5, 1}, 0), std::out_of_range);
    CHECK_THROWS_AS(conditional_mean_at_quantile({9, 5, 1}, 3), std::out_of_range);
}

TEST_CASE("knn plug-in variances vanish for constant rewards") {
    const RctDataset data = constant_reward_dataset(2.0);
    CHECK(var_sg_knn(data).value == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(var_base_knn(data).value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("knn plug-ins respect the window precondition") {
    std::mt19937_64 rng(43);
    const RctDataset data = random_dataset(rng, 20, 0.5);  // budget 10
    CHECK_NOTHROW(var_sg_knn(data, 9));
    CHECK_THROWS_AS(var_sg_knn(data, 10), std::out_of_range);
    CHECK_THROWS_AS(var_sg_knn(data, 0), std::out_of_range);
    const VarianceEstimate est = var_sg_knn(data);
    REQUIRE(est.k_used);
    CHECK(*est.k_used == 9);  // auto window clamped to budget - 1
}

TEST_CASE("knn variances are nonnegative on random data") {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 200; ++trial) {
        const RctDataset data = random_dataset(rng, 24, 0.25);
        CHECK(var_sg_knn(data).value >= 0.0);
        CHECK(var_base_knn(data).value >= 0.0);
    }
}

TEST_CASE("hybrid terms reproduce the endpoint variances") {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 20; ++trial) {
        const RctDataset data = random_dataset(rng, 40, 0.3);
        const HybridWeightTerms t = hybrid_terms(data, 5);
        const double a = data.alpha;
        const double at_zero = t.C / (a * a);
        const double at_one = (t.A + t.B + t.C) / (a * a);
        CHECK(at_zero == doctest::Approx(var_sg_knn(data, 5).value).epsilon(1e-10));
        CHECK(at_one == doctest::Approx(var_base_knn(data, 5).value).epsilon(1e-10));
        CHECK(hybrid_variance(t, 0.0, a).value ==
              doctest::Approx(var_sg_knn(data, 5).value).epsilon(1e-10));
        CHECK(hybrid_variance(t, 1.0, a).value ==
              doctest::Approx(var_base_knn(data, 5).value).epsilon(1e-10));
    }
}

TEST_CASE("hybrid vertex minimizes the variance parabola") {
    std::mt19937_64 rng(46);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const RctDataset data = random_dataset(rng, 40, 0.3);
        const HybridWeightTerms t = hybrid_terms(data);
        if (t.A <= 0.0) continue;
        ++checked;
        CHECK(t.w_star == -t.B / (2.0 * t.A));
        const double a = data.alpha;
        const double at_vertex = hybrid_variance(t, t.w_star, a).value;
        CHECK(at_vertex <= hybrid_variance(t, 0.0, a).value + 1e-12);
        CHECK(at_vertex <= hybrid_variance(t, 1.0, a).value + 1e-12);
        for (double w : {-0.5, 0.25, 0.75, 1.5})
            CHECK(at_vertex <= hybrid_variance(t, w, a).value + 1e-12);
    }
    CHECK(checked > 0);
}

TEST_CASE("degenerate hybrid curvature is rejected") {
    // Constant rewards collapse the parabola: A = 0.
    const RctDataset data = constant_reward_dataset(1.0);
    CHECK_THROWS_AS(hybrid_optimal_weight(data), numerical_error);
    const HybridWeightTerms t = hybrid_terms(data);
    CHECK(std::isnan(t.w_star));
}

TEST_CASE("confidence interval reference values") {
    const auto ci = confidence_interval(0.0, 1.0, 100, 0.95);
    CHECK(ci.first == doctest::Approx(-0.196).epsilon(1e-3));
    CHECK(ci.second == doctest::Approx(0.196).epsilon(1e-3));
    CHECK(std::abs(ci.first + 0.1959964) <= 1e-4);

    const auto degenerate = confidence_interval(2.5, 0.0, 10, 0.95);
    CHECK(degenerate.first == 2.5);
    CHECK(degenerate.second == 2.5);

    const auto wide = confidence_interval(1.0, 4.0, 50, 0.99);
    const auto narrow = confidence_interval(1.0, 4.0, 50, 0.90);
    CHECK(wide.first < narrow.first);
    CHECK(wide.second > narrow.second);
}

TEST_CASE("p-value for a positive effect") {
    CHECK(p_value_positive_effect(0.0, 1.0, 100) == 0.5);
    // sqrt(n) * point / sigma = 1.959964
    CHECK(p_value_positive_effect(0.1959964, 1.0, 100) == doctest::Approx(0.025).epsilon(1e-3));
    CHECK(p_value_positive_effect(1.0, 1.0, 100) < p_value_positive_effect(0.5, 1.0, 100));
    CHECK_THROWS_AS(p_value_positive_effect(1.0, 0.0, 100), numerical_error);
}

TEST_CASE("policy comparison interval") {
    EstimateReport r1, r2;
    r1.point = 3.0;
    r1.variance = 4.0;
    r1.n = 100;
    r2.point = 1.0;
    r2.variance = 4.0;
    r2.n = 100;
    const auto ci = compare_policies(r1, r2, 0.95);
    CHECK(ci.first == doctest::Approx(1.4457).epsilon(1e-3));
    CHECK(ci.second == doctest::Approx(2.5543).epsilon(1e-3));

    const auto same = compare_policies(r1, r1, 0.95);
    CHECK(same.first == -same.second);

    r2.variance.reset();
    CHECK_THROWS_AS(compare_policies(r1, r2, 0.95), invariant_error);
    r2.variance = 4.0;
    r2.n = 50;
    CHECK_THROWS_AS(compare_policies(r1, r2, 0.95), invariant_error);
}

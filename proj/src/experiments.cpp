#include "alloceval/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <mutex>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "alloceval/estimators.hpp"
#include "alloceval/inference.hpp"
#include "alloceval/policies.hpp"

namespace alloceval {

namespace {

// Stream tags keep estimand cohorts and replicate RCTs on disjoint seed streams.
constexpr std::uint64_t kEstimandStream = 0x45535449ULL;
constexpr std::uint64_t kReplicateStream = 0x5245504cULL;

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mutex;
    for (int w = 0; w < std::min(workers, count); ++w)
        pool.emplace_back([&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= count) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

void ExperimentPlan::validate() const {
    simulator.validate();
    if (replicates < 1) throw config_error("replicates must be >= 1");
    if (estimand_reps < 1) throw config_error("estimand_reps must be >= 1");
    if (!(level > 0.0 && level < 1.0)) throw config_error("level outside (0,1)");
    if (policy.alpha <= 0.0 || policy.alpha > 1.0) throw config_error("alpha outside (0,1]");
    if (policy.rounds < 1) throw config_error("rounds must be >= 1");
    const int m = static_cast<int>(std::ceil(policy.alpha * simulator.n));
    if (static_cast<long long>(policy.rounds) * m > simulator.n)
        throw config_error("rounds * ceil(alpha*n) exceeds n");
    if (truncate_at && (*truncate_at < 1 || *truncate_at > horizon))
        throw config_error("truncate_at outside [1, horizon]");
    if (estimators.empty()) throw config_error("no estimators requested");
}

std::vector<TransitionModel> bundled_passive_pool(int size, std::uint64_t seed) {
    // Beta(2,2)-shaped passive recovery/retention probabilities: a plausible
    // adherence-style pool without any real data.
    Rng rng = make_rng(splitmix64(seed ^ 0x7b5ULL));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto beta22 = [&] {
        const double a = unif(rng), b = unif(rng);
        return 0.5 * (a + b);
    };
    std::vector<TransitionModel> pool(size);
    for (auto& t : pool) {
        const double p_bad = 0.6 * beta22();          // bad -> good is hard
        const double p_good = 0.4 + 0.6 * beta22();   // good state is sticky
        t = TransitionModel::from_good_probs(p_bad, p_good, p_bad, p_good);
    }
    return pool;
}

std::vector<CountTable> bundled_trajectory_pool(int size, std::uint64_t seed) {
    Rng rng = make_rng(splitmix64(seed ^ 0xc47ULL));
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::poisson_distribution<int> traj_len(12);
    std::vector<CountTable> pool(size);
    for (auto& table : pool) {
        // Simulate a short trajectory from a random latent chain and count.
        const double p_bad = unif(rng) * 0.6;
        const double p_good = 0.4 + 0.6 * unif(rng);
        const double lift = 0.2 * unif(rng);
        TransitionModel latent = TransitionModel::from_good_probs(
            p_bad, p_good, std::min(1.0, p_bad + lift), std::min(1.0, p_good + lift));
        int state = unif(rng) < 0.5 ? 1 : 0;
        const int len = std::max(4, traj_len(rng));
        for (int t = 0; t < len; ++t) {
            const int action = unif(rng) < 0.25 ? 1 : 0;
            const int to = unif(rng) < latent.to_good(action, state) ? 1 : 0;
            table.counts[state][action][to] += 1.0;
            state = to;
        }
    }
    return pool;
}

AgentCohort sample_cohort(const ExperimentPlan& plan, Rng& rng) {
    switch (plan.simulator.domain_tag) {
        case DomainTag::synthetic:
            return sample_synthetic_cohort(plan.simulator, rng);
        case DomainTag::tb:
            return sample_tb_like_cohort(
                plan.simulator,
                plan.passive_pool.empty() ? bundled_passive_pool(200, plan.simulator.seed)
                                          : plan.passive_pool,
                rng);
        case DomainTag::mmitra:
            return sample_mmitra_like_cohort(
                plan.simulator,
                plan.trajectory_pool.empty() ? bundled_trajectory_pool(200, plan.simulator.seed)
                                             : plan.trajectory_pool,
                rng);
        default:
            throw config_error("sample_cohort: unsupported domain for MDP simulation");
    }
}

double monte_carlo_estimand(const ExperimentPlan& plan) {
    plan.validate();
    if (plan.simulator.domain_tag == DomainTag::corner_case) return 1.0;  // constant unit effect

    const int reps = plan.estimand_reps;
    std::vector<double> values(reps);
    parallel_for(reps, plan.workers, [&](int rep) {
        Rng rng = make_rng(child_seed(splitmix64(plan.simulator.seed) ^ kEstimandStream, rep));
        const AgentCohort cohort = sample_cohort(plan, rng);
        const int n = static_cast<int>(cohort.size());
        std::vector<double> indices;
        if (plan.policy.index_kind == IndexKind::whittle) {
            indices.reserve(n);  // cached by the samplers
            for (const auto& agent : cohort.agents) indices.push_back(agent.index);
        } else {
            indices = compute_indices(cohort, plan.policy, rng);
        }
        std::vector<int> ids(n);
        std::unordered_map<int, int> position;
        for (int i = 0; i < n; ++i) {
            ids[i] = cohort.agents[i].id;
            position.emplace(ids[i], i);
        }

        std::unordered_set<int> treated;
        double total = 0.0;
        int count = 0;
        for (int r = 1; r <= plan.policy.rounds; ++r) {
            const auto round = allocate(indices, ids, plan.policy.alpha, treated);
            for (int id : round.selected) {
                treated.insert(id);
                const Agent& agent = cohort.agents[position.at(id)];
                total += expected_reward(agent, r, plan.horizon, plan.simulator.initial_state) -
                         expected_reward(agent, 0, plan.horizon, plan.simulator.initial_state);
                ++count;
            }
        }
        values[rep] = total / count;
    });
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / reps;
}

RctDataset run_corner_rct(int n, double alpha, double sigma, Rng& rng, BoostCenter boost_center) {
    const CornerCohort cp = corner_case_cohort(n, alpha, sigma, rng, boost_center);
    const CornerCohort cc = corner_case_cohort(n, alpha, sigma, rng, boost_center);

    std::vector<int> ids(n);
    std::vector<double> idx_p(n), idx_c(n);
    for (int i = 0; i < n; ++i) {
        ids[i] = i;
        idx_p[i] = cp.cohort.agents[i].index;
        idx_c[i] = cc.cohort.agents[i].index;
    }
    const auto selected = allocate(idx_p, ids, alpha);
    std::unordered_set<int> treated(selected.selected.begin(), selected.selected.end());

    RctDataset data;
    data.alpha = alpha;
    data.horizon = 1;
    data.rounds = 1;
    data.policy_arm.resize(n);
    data.control_arm.resize(n);
    for (int i = 0; i < n; ++i) {
        RctRecord& rp = data.policy_arm[i];
        rp.agent_id = i;
        rp.arm = Arm::policy;
        rp.index = idx_p[i];
        rp.treat_week = treated.count(i) ? 1 : 0;
        rp.covariates = cp.cohort.agents[i].covariates;
        rp.reward_path = {cp.r0[i] + (rp.treat_week ? cp.treatment_effect : 0.0)};

        RctRecord& rc = data.control_arm[i];
        rc.agent_id = i;
        rc.arm = Arm::control;
        rc.index = idx_c[i];
        rc.treat_week = 0;
        rc.covariates = cc.cohort.agents[i].covariates;
        rc.reward_path = {cc.r0[i]};
    }
    data.validate(false);
    return data;
}

std::map<EstimatorKind, EstimateReport> run_replicate(const ExperimentPlan& plan,
                                                      int replicate_index) {
    Rng rng = make_rng(
        child_seed(splitmix64(plan.simulator.seed) ^ kReplicateStream, replicate_index));

    RctDataset data;
    if (plan.simulator.domain_tag == DomainTag::corner_case) {
        data = run_corner_rct(plan.simulator.n, plan.policy.alpha, plan.simulator.corner_sigma,
                              rng, plan.simulator.boost_center);
    } else {
        const AgentCohort cohort_p = sample_cohort(plan, rng);
        const AgentCohort cohort_c = sample_cohort(plan, rng);
        data = run_rct(cohort_p, cohort_c, plan.policy, plan.horizon, rng,
                       plan.simulator.initial_state);
    }

    std::map<EstimatorKind, EstimateReport> reports;
    for (EstimatorKind kind : plan.estimators) {
        switch (kind) {
            case EstimatorKind::base:
                reports[kind] = estimate_base(data, plan.truncate_at, plan.level);
                break;
            case EstimatorKind::subgroup:
                reports[kind] = estimate_subgroup(data, std::nullopt, plan.truncate_at, plan.level);
                break;
            case EstimatorKind::threshold:
                reports[kind] = estimate_threshold(data, plan.truncate_at, plan.level);
                break;
            case EstimatorKind::hybrid:
                reports[kind] = estimate_hybrid(data, std::nullopt, plan.truncate_at, plan.level);
                break;
            case EstimatorKind::mate_reshuffle: {
                EstimateReport report;
                report.estimator = kind;
                report.point = estimate_mate_reshuffle(data, plan.truncate_at);
                report.level = plan.level;
                report.n = data.n();
                report.alpha = data.alpha;
                reports[kind] = report;
                break;
            }
            case EstimatorKind::regression_base:
                reports[kind] = estimate_regression(data, RegressionKind::base, std::nullopt,
                                                    plan.truncate_at, plan.level);
                break;
            case EstimatorKind::regression_subgroup:
                reports[kind] = estimate_regression(data, RegressionKind::subgroup, std::nullopt,
                                                    plan.truncate_at, plan.level);
                break;
        }
    }
    return reports;
}

std::map<EstimatorKind, CoverageSummary> coverage_experiment(const ExperimentPlan& plan) {
    plan.validate();
    for (EstimatorKind kind : plan.estimators)
        if (kind == EstimatorKind::threshold || kind == EstimatorKind::mate_reshuffle)
            throw config_error("estimator '" + to_string(kind) +
                               "' has no confidence interval; cannot run coverage");
    const double tau = monte_carlo_estimand(plan);

    std::vector<std::map<EstimatorKind, EstimateReport>> results(plan.replicates);
    parallel_for(plan.replicates, plan.workers,
                 [&](int rep) { results[rep] = run_replicate(plan, rep); });

    std::map<EstimatorKind, CoverageSummary> out;
    for (EstimatorKind kind : plan.estimators) {
        CoverageSummary summary;
        summary.replicates = plan.replicates;
        summary.estimand = tau;
        long below = 0, covered = 0, above = 0;
        double width = 0.0;
        for (const auto& reports : results) {
            const EstimateReport& r = reports.at(kind);
            if (!r.ci_low || !r.ci_high)
                throw numerical_error("replicate produced no CI for " + to_string(kind));
            if (tau < *r.ci_low)
                ++above;  // interval sits entirely above the estimand
            else if (tau > *r.ci_high)
                ++below;
            else
                ++covered;
            width += 0.5 * (*r.ci_high - *r.ci_low);
        }
        summary.below = static_cast<double>(below) / plan.replicates;
        summary.covered = static_cast<double>(covered) / plan.replicates;
        summary.above = static_cast<double>(above) / plan.replicates;
        summary.mean_half_width = width / plan.replicates;
        out[kind] = summary;
    }
    return out;
}

std::vector<std::pair<double, std::map<EstimatorKind, CoverageSummary>>> sweep(
    const ExperimentPlan& plan) {
    if (!plan.sweep_axis) throw config_error("sweep requires a sweep_axis");
    const std::string& axis = plan.sweep_axis->name;
    std::vector<std::pair<double, std::map<EstimatorKind, CoverageSummary>>> out;
    for (double value : plan.sweep_axis->grid) {
        ExperimentPlan p = plan;
        p.sweep_axis.reset();
        if (axis == "alpha") {
            p.policy.alpha = value;
        } else if (axis == "n") {
            p.simulator.n = static_cast<int>(value);
        } else if (axis == "horizon") {
            p.horizon = static_cast<int>(value);
            p.simulator.horizon = static_cast<int>(value);
        } else if (axis == "effect_cap") {
            p.simulator.effect_cap = value;
        } else if (axis == "level") {
            p.level = value;
        } else if (axis == "rounds") {
            // fixed total budget: split the planned fraction across rounds
            p.policy.rounds = static_cast<int>(value);
            p.policy.alpha = plan.policy.alpha / value;
        } else if (axis == "truncate_at") {
            p.truncate_at = static_cast<int>(value);
        } else {
            throw config_error("unknown sweep axis '" + axis + "'");
        }
        out.emplace_back(value, coverage_experiment(p));
    }
    return out;
}

CornerStudyResult corner_case_study(int n, double alpha, double sigma, int replicates,
                                    std::uint64_t seed, int workers, BoostCenter boost_center,
                                    double level, std::optional<int> knn_k) {
    struct Row {
        double point[3];
        double width[3];
    };
    const int k = knn_k ? *knn_k : static_cast<int>(std::ceil(std::sqrt(double(n))));
    std::vector<Row> rows(replicates);
    parallel_for(replicates, workers, [&](int rep) {
        Rng rng = make_rng(child_seed(splitmix64(seed) ^ kReplicateStream, rep));
        const RctDataset data = run_corner_rct(n, alpha, sigma, rng, boost_center);

        const EstimateReport base = estimate_base(data, std::nullopt, level);
        const EstimateReport sg = estimate_subgroup(data, std::nullopt, std::nullopt, level);

        const VarianceEstimate sg_var = var_sg_knn(data, k);
        const VarianceEstimate base_var = var_base_knn(data, k);
        const auto sg_ci = confidence_interval(sg.point, sg_var.value, n, level);
        const auto base_ci = confidence_interval(base.point, base_var.value, n, level);

        // hybrid with data-driven weight; an empirically degenerate A (<= 0)
        // collapses the parabola, in which case the base endpoint is used
        const HybridWeightTerms terms = hybrid_terms(data, k);
        const double w = terms.A > 0.0 ? terms.w_star : 1.0;
        const double hyb_point = (1.0 - w) * sg.point + w * base.point;
        const VarianceEstimate hyb_var = hybrid_variance(terms, w, alpha);
        const auto hyb_ci = confidence_interval(hyb_point, hyb_var.value, n, level);

        rows[rep].point[0] = base.point;
        rows[rep].point[1] = sg.point;
        rows[rep].point[2] = hyb_point;
        rows[rep].width[0] = base_ci.second - base_ci.first;
        rows[rep].width[1] = sg_ci.second - sg_ci.first;
        rows[rep].width[2] = hyb_ci.second - hyb_ci.first;
    });

    const EstimatorKind kinds[3] = {EstimatorKind::base, EstimatorKind::subgroup,
                                    EstimatorKind::hybrid};
    CornerStudyResult result;
    result.replicates = replicates;
    for (int e = 0; e < 3; ++e) {
        double mean = 0.0, width = 0.0;
        for (const auto& row : rows) {
            mean += row.point[e];
            width += row.width[e];
        }
        mean /= replicates;
        width /= replicates;
        double var = 0.0;
        for (const auto& row : rows) var += (row.point[e] - mean) * (row.point[e] - mean);
        CornerStats stats;
        stats.mean_point = mean;
        stats.std_dev = std::sqrt(var / (replicates - 1));
        stats.mean_ci_width = width;
        result.stats[kinds[e]] = stats;
    }
    return result;
}

}  // namespace alloceval

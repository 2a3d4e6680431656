#include "alloceval/simulators.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "alloceval/inference.hpp"
#include "alloceval/policies.hpp"

namespace alloceval {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> project_covariates(const TransitionModel& t,
                                       const std::vector<double>& matrix, int dim) {
    // covariates = (dim x 8 matrix) * flattened transition tensor
    std::vector<double> flat(8);
    int idx = 0;
    for (int a = 0; a < 2; ++a)
        for (int s = 0; s < 2; ++s)
            for (int to = 0; to < 2; ++to) flat[idx++] = t.probs[a][s][to];
    std::vector<double> cov(dim, 0.0);
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < 8; ++c) cov[r] += matrix[r * 8 + c] * flat[c];
    return cov;
}

std::vector<double> draw_projection_matrix(int dim, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> matrix(static_cast<std::size_t>(dim) * 8);
    for (auto& v : matrix) v = gauss(rng);
    return matrix;
}

void finish_agent(Agent& agent) {
    agent.transitions.validate();
    agent.index = whittle_index(agent);
}

double stationary_good_prob(const TransitionModel& t) {
    const double p01 = t.to_good(0, 0);
    const double p10 = 1.0 - t.to_good(0, 1);
    const double denom = p01 + p10;
    if (denom == 0.0) return 0.0;  // frozen chain: start in the bad state
    return p01 / denom;
}

int draw_initial_state(const TransitionModel& t, Rng& rng, InitialState rule) {
    switch (rule) {
        case InitialState::fixed_good: return 1;
        case InitialState::fixed_bad: return 0;
        case InitialState::stationary: break;
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    return unif(rng) < stationary_good_prob(t) ? 1 : 0;
}

}  // namespace

void SimulatorConfig::validate() const {
    if (n < 2) throw config_error("n must be >= 2");
    if (horizon < 1) throw config_error("horizon must be >= 1");
    if (effect_cap < 0.0 || effect_cap > 1.0) throw config_error("effect_cap outside [0,1]");
    if (corner_sigma <= 0.0) throw config_error("corner_sigma must be positive");
    if (covariate_dim < 0) throw config_error("covariate_dim must be >= 0");
    if (prior_strength < 0.0) throw config_error("prior_strength must be >= 0");
}

AgentCohort sample_synthetic_cohort(const SimulatorConfig& cfg, Rng& rng) {
    cfg.validate();
    if (cfg.domain_tag != DomainTag::synthetic) throw config_error("domain_tag must be synthetic");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const auto matrix = cfg.covariate_dim > 0 ? draw_projection_matrix(cfg.covariate_dim, rng)
                                              : std::vector<double>{};
    AgentCohort cohort;
    cohort.domain_tag = DomainTag::synthetic;
    cohort.agents.resize(cfg.n);
    for (int i = 0; i < cfg.n; ++i) {
        Agent& agent = cohort.agents[i];
        agent.id = i;
        const double p0_bad = unif(rng);
        const double p0_good = unif(rng);
        const double p1_bad = std::min(1.0, p0_bad + cfg.effect_cap * unif(rng));
        const double p1_good = std::min(1.0, p0_good + cfg.effect_cap * unif(rng));
        agent.transitions = TransitionModel::from_good_probs(p0_bad, p0_good, p1_bad, p1_good);
        if (cfg.covariate_dim > 0)
            agent.covariates = project_covariates(agent.transitions, matrix, cfg.covariate_dim);
        finish_agent(agent);
    }
    return cohort;
}

AgentCohort sample_tb_like_cohort(const SimulatorConfig& cfg,
                                  const std::vector<TransitionModel>& passive_pool, Rng& rng) {
    cfg.validate();
    if (passive_pool.empty()) throw config_error("empty passive transition pool");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> pick(0, passive_pool.size() - 1);
    const auto matrix = cfg.covariate_dim > 0 ? draw_projection_matrix(cfg.covariate_dim, rng)
                                              : std::vector<double>{};
    AgentCohort cohort;
    cohort.domain_tag = DomainTag::tb;
    cohort.agents.resize(cfg.n);
    for (int i = 0; i < cfg.n; ++i) {
        Agent& agent = cohort.agents[i];
        agent.id = i;
        const TransitionModel& passive = passive_pool[pick(rng)];
        const double p0_bad = passive.to_good(0, 0);
        const double p0_good = passive.to_good(0, 1);
        const double p1_bad = std::min(1.0, p0_bad + cfg.effect_cap * unif(rng));
        const double p1_good = std::min(1.0, p0_good + cfg.effect_cap * unif(rng));
        agent.transitions = TransitionModel::from_good_probs(p0_bad, p0_good, p1_bad, p1_good);
        if (cfg.covariate_dim > 0)
            agent.covariates = project_covariates(agent.transitions, matrix, cfg.covariate_dim);
        finish_agent(agent);
    }
    return cohort;
}

AgentCohort sample_mmitra_like_cohort(const SimulatorConfig& cfg,
                                      const std::vector<CountTable>& trajectory_pool, Rng& rng) {
    cfg.validate();
    if (trajectory_pool.empty()) throw config_error("empty trajectory pool");

    // Population transition distribution pooled over all tables.
    double pooled[2][2][2] = {};
    for (const auto& table : trajectory_pool)
        for (int s = 0; s < 2; ++s)
            for (int a = 0; a < 2; ++a)
                for (int to = 0; to < 2; ++to) pooled[s][a][to] += table.counts[s][a][to];
    double p_pop[2][2][2];
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) {
            const double mass = pooled[s][a][0] + pooled[s][a][1];
            if (mass <= 0.0)
                throw config_error("pooled counts have zero mass for (s=" + std::to_string(s) +
                                   ",a=" + std::to_string(a) + ")");
            for (int to = 0; to < 2; ++to) p_pop[s][a][to] = pooled[s][a][to] / mass;
        }

    std::uniform_int_distribution<std::size_t> pick(0, trajectory_pool.size() - 1);
    const auto matrix = cfg.covariate_dim > 0 ? draw_projection_matrix(cfg.covariate_dim, rng)
                                              : std::vector<double>{};
    AgentCohort cohort;
    cohort.domain_tag = DomainTag::mmitra;
    cohort.agents.resize(cfg.n);
    for (int i = 0; i < cfg.n; ++i) {
        Agent& agent = cohort.agents[i];
        agent.id = i;
        const CountTable& table = trajectory_pool[pick(rng)];
        for (int s = 0; s < 2; ++s)
            for (int a = 0; a < 2; ++a) {
                double denom = 0.0;
                for (int to = 0; to < 2; ++to)
                    denom += cfg.prior_strength * p_pop[s][a][to] + table.counts[s][a][to];
                if (denom <= 0.0) throw config_error("zero posterior mass in count table row");
                for (int to = 0; to < 2; ++to)
                    agent.transitions.probs[a][s][to] =
                        (cfg.prior_strength * p_pop[s][a][to] + table.counts[s][a][to]) / denom;
            }
        if (cfg.covariate_dim > 0)
            agent.covariates = project_covariates(agent.transitions, matrix, cfg.covariate_dim);
        finish_agent(agent);
    }
    return cohort;
}

CornerCohort corner_case_cohort(int n, double alpha, double sigma, Rng& rng,
                                BoostCenter boost_center) {
    if (sigma <= 0.0) throw config_error("sigma must be positive");
    if (n < 2) throw config_error("n must be >= 2");
    if (alpha <= 0.0 || alpha > 1.0) throw config_error("alpha outside (0,1]");
    const double center =
        boost_center == BoostCenter::quantile ? normal_quantile(std::min(alpha, 1.0 - 1e-12))
                                              : alpha;
    std::normal_distribution<double> gauss(0.0, 1.0);
    CornerCohort out;
    out.cohort.domain_tag = DomainTag::corner_case;
    out.cohort.agents.resize(n);
    out.r0.resize(n);
    for (int i = 0; i < n; ++i) {
        Agent& agent = out.cohort.agents[i];
        agent.id = i;
        const double x = gauss(rng);
        const double y = gauss(rng);
        const double d = (x - center) / sigma;
        const double z = std::exp(-0.5 * d * d) / (sigma * std::sqrt(2.0 * kPi));
        agent.covariates = {x};
        agent.index = x;  // identity index
        out.r0[i] = x + y + z;
    }
    return out;
}

std::vector<int> simulate_reward_path(const Agent& agent, int treat_week, int horizon, Rng& rng,
                                      InitialState initial_state) {
    if (treat_week < 0 || treat_week > horizon)
        throw std::out_of_range("treat_week outside [0, horizon]");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int state = draw_initial_state(agent.transitions, rng, initial_state);
    std::vector<int> path(horizon);
    for (int t = 1; t <= horizon; ++t) {
        const int action = (t == treat_week) ? 1 : 0;
        const double p_good = agent.transitions.to_good(action, state);
        state = unif(rng) < p_good ? 1 : 0;
        path[t - 1] = state;
    }
    return path;
}

double expected_reward(const Agent& agent, int treat_week, int horizon,
                       InitialState initial_state) {
    if (treat_week < 0 || treat_week > horizon)
        throw std::out_of_range("treat_week outside [0, horizon]");
    double p_good;
    switch (initial_state) {
        case InitialState::fixed_good: p_good = 1.0; break;
        case InitialState::fixed_bad: p_good = 0.0; break;
        default: p_good = stationary_good_prob(agent.transitions); break;
    }
    double total = 0.0;
    for (int t = 1; t <= horizon; ++t) {
        const int action = (t == treat_week) ? 1 : 0;
        p_good = (1.0 - p_good) * agent.transitions.to_good(action, 0) +
                 p_good * agent.transitions.to_good(action, 1);
        total += p_good;
    }
    return total;
}

RctDataset run_rct(const AgentCohort& cohort_p, const AgentCohort& cohort_c,
                   const PolicySpec& spec, int horizon, Rng& rng, InitialState initial_state) {
    if (cohort_p.size() != cohort_c.size())
        throw std::invalid_argument("policy and control cohorts must have equal size");
    const int n = static_cast<int>(cohort_p.size());
    const int m = static_cast<int>(std::ceil(spec.alpha * n));
    if (static_cast<long long>(spec.rounds) * m > n)
        throw std::invalid_argument("rounds * ceil(alpha*n) exceeds n");

    auto indices_for = [&](const AgentCohort& cohort) {
        if (spec.index_kind == IndexKind::whittle) {
            // samplers cache the Whittle index per agent
            std::vector<double> idx;
            idx.reserve(cohort.size());
            for (const auto& agent : cohort.agents) idx.push_back(agent.index);
            return idx;
        }
        return compute_indices(cohort, spec, rng);
    };
    const auto indices_p = indices_for(cohort_p);
    const auto indices_c = indices_for(cohort_c);

    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = cohort_p.agents[i].id;

    std::unordered_map<int, int> position;
    position.reserve(n);
    for (int i = 0; i < n; ++i) position.emplace(ids[i], i);

    std::vector<int> treat_week(n, 0);
    std::unordered_set<int> treated;
    for (int r = 1; r <= spec.rounds; ++r) {
        const auto round = allocate(indices_p, ids, spec.alpha, treated);
        for (int id : round.selected) {
            treated.insert(id);
            treat_week[position.at(id)] = r;
        }
    }

    RctDataset data;
    data.alpha = spec.alpha;
    data.horizon = horizon;
    data.rounds = spec.rounds;
    data.policy_arm.resize(n);
    data.control_arm.resize(n);
    for (int i = 0; i < n; ++i) {
        RctRecord& rec = data.policy_arm[i];
        rec.agent_id = cohort_p.agents[i].id;
        rec.arm = Arm::policy;
        rec.index = indices_p[i];
        rec.treat_week = treat_week[i];
        rec.covariates = cohort_p.agents[i].covariates;
        const auto path = simulate_reward_path(cohort_p.agents[i], treat_week[i], horizon, rng,
                                               initial_state);
        rec.reward_path.assign(path.begin(), path.end());
    }
    for (int i = 0; i < n; ++i) {
        RctRecord& rec = data.control_arm[i];
        rec.agent_id = cohort_c.agents[i].id;
        rec.arm = Arm::control;
        rec.index = indices_c[i];
        rec.treat_week = 0;
        rec.covariates = cohort_c.agents[i].covariates;
        const auto path = simulate_reward_path(cohort_c.agents[i], 0, horizon, rng, initial_state);
        rec.reward_path.assign(path.begin(), path.end());
    }
    data.validate();
    return data;
}

}  // namespace alloceval

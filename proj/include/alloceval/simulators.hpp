#pragma once

#include <vector>

#include "alloceval/rng.hpp"
#include "alloceval/types.hpp"

namespace alloceval {

enum class InitialState { stationary, fixed_good, fixed_bad };

// Where the corner-case reward boost is centered. `quantile` puts it at the
// index boundary q_alpha (the regime the construction is meant to stress);
// `alpha_literal` centers it at the raw value alpha.
enum class BoostCenter { quantile, alpha_literal };

struct SimulatorConfig {
    DomainTag domain_tag = DomainTag::synthetic;
    int n = 0;
    int horizon = 1;
    double effect_cap = 0.2;  // max T1_{s,1} - T0_{s,1}
    int covariate_dim = 0;
    std::uint64_t seed = 0;
    double corner_sigma = 0.05;
    double prior_strength = 5.0;
    InitialState initial_state = InitialState::stationary;
    BoostCenter boost_center = BoostCenter::quantile;

    void validate() const;
};

// Counts N(s, a, s') of observed transitions, one table per trajectory.
struct CountTable {
    double counts[2][2][2] = {};
};

AgentCohort sample_synthetic_cohort(const SimulatorConfig& cfg, Rng& rng);

AgentCohort sample_tb_like_cohort(const SimulatorConfig& cfg,
                                  const std::vector<TransitionModel>& passive_pool, Rng& rng);

AgentCohort sample_mmitra_like_cohort(const SimulatorConfig& cfg,
                                      const std::vector<CountTable>& trajectory_pool, Rng& rng);

// Corner-case cohort: rewards live in covariate space, not in an MDP.
// R(0) = x + y + z with z a pdf bump near the boost center; R(1) = R(0) + 1.
struct CornerCohort {
    AgentCohort cohort;
    std::vector<double> r0;          // control potential outcome per agent
    double treatment_effect = 1.0;   // constant: R(1) - R(0)
};

CornerCohort corner_case_cohort(int n, double alpha, double sigma, Rng& rng,
                                BoostCenter boost_center = BoostCenter::quantile);

std::vector<int> simulate_reward_path(const Agent& agent, int treat_week, int horizon, Rng& rng,
                                      InitialState initial_state = InitialState::stationary);

double expected_reward(const Agent& agent, int treat_week, int horizon,
                       InitialState initial_state = InitialState::stationary);

RctDataset run_rct(const AgentCohort& cohort_p, const AgentCohort& cohort_c,
                   const PolicySpec& spec, int horizon, Rng& rng,
                   InitialState initial_state = InitialState::stationary);

}  // namespace alloceval

#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace alloceval {

// Error taxonomy; the CLI maps these onto exit codes (2/3/4).
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct invariant_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Per-agent 2-state x 2-action Markov transition probabilities T^a_{s,s'}.
struct TransitionModel {
    // probs[action][from_state][to_state]
    double probs[2][2][2] = {};

    double p(int action, int from, int to) const { return probs[action][from][to]; }
    // Probability of landing in the good state (1) from `from` under `action`.
    double to_good(int action, int from) const { return probs[action][from][1]; }

    void validate() const {
        for (int a = 0; a < 2; ++a)
            for (int s = 0; s < 2; ++s) {
                double row = probs[a][s][0] + probs[a][s][1];
                if (std::abs(row - 1.0) > 1e-12)
                    throw invariant_error("transition row (a=" + std::to_string(a) +
                                          ",s=" + std::to_string(s) + ") sums to " +
                                          std::to_string(row) + ", expected 1");
                for (int t = 0; t < 2; ++t)
                    if (probs[a][s][t] < 0.0 || probs[a][s][t] > 1.0)
                        throw invariant_error("transition probability out of [0,1]");
            }
    }

    static TransitionModel from_good_probs(double p0_bad, double p0_good, double p1_bad,
                                           double p1_good) {
        TransitionModel m;
        m.probs[0][0][1] = p0_bad;
        m.probs[0][0][0] = 1.0 - p0_bad;
        m.probs[0][1][1] = p0_good;
        m.probs[0][1][0] = 1.0 - p0_good;
        m.probs[1][0][1] = p1_bad;
        m.probs[1][0][0] = 1.0 - p1_bad;
        m.probs[1][1][1] = p1_good;
        m.probs[1][1][0] = 1.0 - p1_good;
        return m;
    }
};

struct Agent {
    int id = 0;
    TransitionModel transitions;
    std::vector<double> covariates;
    double index = 0.0;  // cached policy index
};

enum class DomainTag { synthetic, tb, mmitra, corner_case, ingested };

struct AgentCohort {
    std::vector<Agent> agents;
    DomainTag domain_tag = DomainTag::synthetic;

    std::size_t size() const { return agents.size(); }
};

enum class IndexKind { whittle, random, custom_column };

struct PolicySpec {
    IndexKind index_kind = IndexKind::whittle;
    double alpha = 0.2;
    int rounds = 1;
    int custom_column = 0;  // covariate column used when index_kind == custom_column
};

enum class Arm { policy, control };

struct RctRecord {
    int agent_id = 0;
    Arm arm = Arm::policy;
    double index = 0.0;
    int treat_week = 0;  // 0 = never treated; t >= 1 = week of treatment
    std::vector<double> reward_path;
    std::vector<double> covariates;
};

// Sum of the first min(truncate_at, horizon) reward entries.
double total_reward(const RctRecord& record, std::optional<int> truncate_at = std::nullopt);

struct RctDataset {
    std::vector<RctRecord> policy_arm;
    std::vector<RctRecord> control_arm;
    double alpha = 0.0;
    int horizon = 0;
    int rounds = 1;
    std::uint64_t seed = 0;

    int n() const { return static_cast<int>(policy_arm.size()); }
    // Treated agents per round.
    int per_round_budget() const { return static_cast<int>(std::ceil(alpha * n())); }
    int budget() const { return rounds * per_round_budget(); }

    // Rejects invariant violations at construction time. binary_rewards=false is
    // used for datasets whose rewards are defined directly in covariate space
    // (corner-case construction) rather than by state-occupancy counting.
    void validate(bool binary_rewards = true) const;
};

enum class EstimatorKind {
    base,
    subgroup,
    threshold,
    hybrid,
    mate_reshuffle,
    regression_base,
    regression_subgroup
};

std::string to_string(EstimatorKind kind);
EstimatorKind estimator_kind_from_string(const std::string& name);

struct EstimateReport {
    EstimatorKind estimator = EstimatorKind::base;
    double point = 0.0;
    std::optional<double> variance;  // estimate of Var(sqrt(n) * (theta - tau))
    std::optional<double> ci_low;
    std::optional<double> ci_high;
    double level = 0.95;
    std::optional<double> p_value;
    int n = 0;
    double alpha = 0.0;
    std::optional<double> hybrid_weight;
    bool variance_clamped = false;
};

struct CoverageSummary {
    double below = 0.0;
    double covered = 0.0;
    double above = 0.0;
    double mean_half_width = 0.0;
    int replicates = 0;
    double estimand = 0.0;
};

}  // namespace alloceval

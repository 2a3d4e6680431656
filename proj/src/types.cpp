#include "alloceval/types.hpp"

#include <algorithm>
#include <numeric>

namespace alloceval {

double total_reward(const RctRecord& record, std::optional<int> truncate_at) {
    const int horizon = static_cast<int>(record.reward_path.size());
    int upto = horizon;
    if (truncate_at) {
        if (*truncate_at < 1 || *truncate_at > horizon)
            throw std::out_of_range("truncate_at " + std::to_string(*truncate_at) +
                                    " outside [1, " + std::to_string(horizon) + "]");
        upto = *truncate_at;
    }
    return std::accumulate(record.reward_path.begin(), record.reward_path.begin() + upto, 0.0);
}

void RctDataset::validate(bool binary_rewards) const {
    if (policy_arm.size() != control_arm.size())
        throw invariant_error("policy and control arms have different sizes");
    if (policy_arm.empty()) throw invariant_error("empty dataset");
    if (alpha <= 0.0 || alpha > 1.0) throw invariant_error("alpha outside (0,1]");
    if (rounds < 1) throw invariant_error("rounds < 1");
    const int m = per_round_budget();
    if (static_cast<long long>(rounds) * m > n())
        throw invariant_error("rounds * ceil(alpha*n) exceeds n");

    std::vector<int> treated_per_round(rounds + 1, 0);
    for (const auto& rec : policy_arm) {
        if (rec.treat_week < 0 || rec.treat_week > rounds)
            throw invariant_error("policy-arm treat_week outside [0, rounds]");
        ++treated_per_round[rec.treat_week];
    }
    for (int r = 1; r <= rounds; ++r)
        if (treated_per_round[r] != m)
            throw invariant_error("round " + std::to_string(r) + " treats " +
                                  std::to_string(treated_per_round[r]) + " agents, expected " +
                                  std::to_string(m));
    for (const auto& rec : control_arm)
        if (rec.treat_week != 0) throw invariant_error("control-arm record with treat_week != 0");

    auto check_arm = [&](const std::vector<RctRecord>& arm) {
        for (const auto& rec : arm) {
            if (static_cast<int>(rec.reward_path.size()) != horizon)
                throw invariant_error("reward_path length != horizon");
            if (binary_rewards)
                for (double v : rec.reward_path)
                    if (v != 0.0 && v != 1.0)
                        throw invariant_error("reward_path entry not in {0,1}");
            if (!std::isfinite(rec.index)) throw invariant_error("non-finite index");
        }
    };
    check_arm(policy_arm);
    check_arm(control_arm);
}

std::string to_string(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::base: return "base";
        case EstimatorKind::subgroup: return "subgroup";
        case EstimatorKind::threshold: return "threshold";
        case EstimatorKind::hybrid: return "hybrid";
        case EstimatorKind::mate_reshuffle: return "mate_reshuffle";
        case EstimatorKind::regression_base: return "regression_base";
        case EstimatorKind::regression_subgroup: return "regression_subgroup";
    }
    throw std::logic_error("unreachable estimator kind");
}

EstimatorKind estimator_kind_from_string(const std::string& name) {
    if (name == "base") return EstimatorKind::base;
    if (name == "subgroup") return EstimatorKind::subgroup;
    if (name == "threshold") return EstimatorKind::threshold;
    if (name == "hybrid") return EstimatorKind::hybrid;
    if (name == "mate_reshuffle") return EstimatorKind::mate_reshuffle;
    if (name == "regression_base") return EstimatorKind::regression_base;
    if (name == "regression_subgroup") return EstimatorKind::regression_subgroup;
    throw config_error("unknown estimator '" + name + "'");
}

}  // namespace alloceval

#pragma once

#include <optional>
#include <vector>

#include "alloceval/types.hpp"

namespace alloceval {

// Treated policy-arm rewards paired with the rewards of the control-arm agents
// the policy would have selected (the counterfactual subgroup).
struct SubgroupView {
    std::vector<double> treated_rewards;        // ordered by index rank (ascending)
    std::vector<double> counterfactual_rewards; // ordered by index rank (ascending)
    int budget = 0;
};

SubgroupView build_subgroup_view(const RctDataset& data, int upto_round,
                                 std::optional<int> truncate_at = std::nullopt);

EstimateReport estimate_base(const RctDataset& data,
                             std::optional<int> truncate_at = std::nullopt, double level = 0.95);

EstimateReport estimate_subgroup(const RctDataset& data,
                                 std::optional<int> upto_round = std::nullopt,
                                 std::optional<int> truncate_at = std::nullopt,
                                 double level = 0.95);

EstimateReport estimate_threshold(const RctDataset& data,
                                  std::optional<int> truncate_at = std::nullopt,
                                  double level = 0.95);

// weight absent = data-driven optimal weight w* from inference.
EstimateReport estimate_hybrid(const RctDataset& data,
                               std::optional<double> weight = std::nullopt,
                               std::optional<int> truncate_at = std::nullopt,
                               double level = 0.95);

// Point estimate only; the reshuffle construction admits no CI.
double estimate_mate_reshuffle(const RctDataset& data,
                               std::optional<int> truncate_at = std::nullopt);

enum class RegressionKind { base, subgroup };

EstimateReport estimate_regression(const RctDataset& data, RegressionKind kind,
                                   std::optional<int> upto_round = std::nullopt,
                                   std::optional<int> truncate_at = std::nullopt,
                                   double level = 0.95);

}  // namespace alloceval

#pragma once

#include <unordered_set>
#include <vector>

#include "alloceval/rng.hpp"
#include "alloceval/types.hpp"

namespace alloceval {

struct WhittleConfig {
    double discount = 0.9;
    int eval_state = 0;  // bad state: where treatment matters most
    double tol = 1e-6;
};

// Negated Whittle subsidy of the evaluation state, so that the
// lowest-index-first allocation treats the highest-subsidy agents.
double whittle_index(const Agent& agent, const WhittleConfig& cfg = {});

std::vector<double> compute_indices(const AgentCohort& cohort, const PolicySpec& spec, Rng& rng);

struct AllocationResult {
    std::vector<int> selected;   // agent ids, one round
    double boundary_index = 0.0; // largest index among selected
};

// One allocation round: the ceil(alpha*n) lowest-index agents not yet treated,
// ties broken by (index, agent_id).
AllocationResult allocate(const std::vector<double>& indices, const std::vector<int>& ids,
                          double alpha, const std::unordered_set<int>& already_treated = {});

std::vector<int> threshold_select(const std::vector<double>& indices, const std::vector<int>& ids,
                                  double lambda);

}  // namespace alloceval

#include "alloceval/policies.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace alloceval {

namespace {

// Optimal value of the 2-state discounted MDP in which the passive action
// additionally earns `subsidy`, with reward 1 on arrival in the good state.
// Solved exactly: evaluate all four deterministic stationary policies via a
// 2x2 linear solve; the optimal one dominates componentwise.
std::array<double, 2> optimal_value(const TransitionModel& t, double subsidy, double gamma) {
    std::array<double, 2> best = {-1e300, -1e300};
    for (int a0 = 0; a0 < 2; ++a0)
        for (int a1 = 0; a1 < 2; ++a1) {
            const double p0 = t.to_good(a0, 0);
            const double p1 = t.to_good(a1, 1);
            const double c0 = p0 + (a0 == 0 ? subsidy : 0.0);
            const double c1 = p1 + (a1 == 0 ? subsidy : 0.0);
            // (I - gamma P) V = c with P rows ((1-p0, p0), (1-p1, p1))
            const double a = 1.0 - gamma * (1.0 - p0);
            const double b = -gamma * p0;
            const double c = -gamma * (1.0 - p1);
            const double d = 1.0 - gamma * p1;
            const double det = a * d - b * c;
            const double v0 = (d * c0 - b * c1) / det;
            const double v1 = (a * c1 - c * c0) / det;
            best[0] = std::max(best[0], v0);
            best[1] = std::max(best[1], v1);
        }
    return best;
}

double q_difference(const TransitionModel& t, double subsidy, double gamma, int s) {
    const auto v = optimal_value(t, subsidy, gamma);
    const double pa = t.to_good(1, s);
    const double pp = t.to_good(0, s);
    const double qa = pa + gamma * ((1.0 - pa) * v[0] + pa * v[1]);
    const double qp = subsidy + pp + gamma * ((1.0 - pp) * v[0] + pp * v[1]);
    return qa - qp;
}

}  // namespace

double whittle_index(const Agent& agent, const WhittleConfig& cfg) {
    if (cfg.discount <= 0.0 || cfg.discount >= 1.0) throw config_error("discount outside (0,1)");
    if (cfg.tol <= 0.0) throw config_error("tol must be positive");
    const TransitionModel& t = agent.transitions;
    const double bound = 2.0 / (1.0 - cfg.discount) + 1.0;
    double lo = -bound, hi = bound;
    double flo = q_difference(t, lo, cfg.discount, cfg.eval_state);
    double fhi = q_difference(t, hi, cfg.discount, cfg.eval_state);
    if (flo < 0.0 || fhi > 0.0)
        throw numerical_error("whittle bisection bracket failure (non-indexable instance?)");
    int iters = 0;
    while (hi - lo > cfg.tol) {
        if (++iters > 200) throw numerical_error("whittle bisection did not converge in 200 iterations");
        const double mid = 0.5 * (lo + hi);
        if (q_difference(t, mid, cfg.discount, cfg.eval_state) > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return -0.5 * (lo + hi);
}

std::vector<double> compute_indices(const AgentCohort& cohort, const PolicySpec& spec, Rng& rng) {
    std::vector<double> out;
    out.reserve(cohort.size());
    switch (spec.index_kind) {
        case IndexKind::whittle:
            for (const auto& agent : cohort.agents) out.push_back(whittle_index(agent));
            break;
        case IndexKind::random: {
            std::uniform_real_distribution<double> unif(0.0, 1.0);
            for (std::size_t i = 0; i < cohort.size(); ++i) out.push_back(unif(rng));
            break;
        }
        case IndexKind::custom_column:
            for (const auto& agent : cohort.agents) {
                if (spec.custom_column < 0 ||
                    spec.custom_column >= static_cast<int>(agent.covariates.size()))
                    throw config_error("custom_column " + std::to_string(spec.custom_column) +
                                       " out of range");
                out.push_back(agent.covariates[spec.custom_column]);
            }
            break;
    }
    return out;
}

AllocationResult allocate(const std::vector<double>& indices, const std::vector<int>& ids,
                          double alpha, const std::unordered_set<int>& already_treated) {
    if (indices.size() != ids.size()) throw std::invalid_argument("indices/ids size mismatch");
    if (alpha <= 0.0 || alpha > 1.0) throw config_error("alpha outside (0,1]");
    const int n = static_cast<int>(indices.size());
    const int m = static_cast<int>(std::ceil(alpha * n));

    std::vector<int> order;
    order.reserve(indices.size());
    for (int i = 0; i < n; ++i)
        if (!already_treated.count(ids[i])) order.push_back(i);
    if (static_cast<int>(order.size()) < m)
        throw std::invalid_argument("fewer untreated agents than ceil(alpha*n)");
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (indices[a] != indices[b]) return indices[a] < indices[b];
        return ids[a] < ids[b];
    });

    AllocationResult result;
    result.selected.reserve(m);
    double boundary = -std::numeric_limits<double>::infinity();
    for (int r = 0; r < m; ++r) {
        result.selected.push_back(ids[order[r]]);
        boundary = std::max(boundary, indices[order[r]]);
    }
    result.boundary_index = boundary;
    return result;
}

std::vector<int> threshold_select(const std::vector<double>& indices, const std::vector<int>& ids,
                                  double lambda) {
    if (indices.size() != ids.size()) throw std::invalid_argument("indices/ids size mismatch");
    std::vector<int> out;
    for (std::size_t i = 0; i < indices.size(); ++i)
        if (indices[i] <= lambda) out.push_back(ids[i]);
    return out;
}

}  // namespace alloceval

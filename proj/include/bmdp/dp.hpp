#pragma once

#include <utility>
#include <vector>

#include "bmdp/model.hpp"
#include "bmdp/policy.hpp"

namespace bmdp {

struct ReachResult {
    double probability = 0.0;
    MarkovPolicy policy;   // state-level argmax policy over layers 1..H
};

/// Backward DP maximizing the probability of visiting `target_state` at its
/// layer. Argmax ties break to the lowest action index.
ReachResult max_reach_probability(const BlockMdp& m, int target_state);

/// Max-reach DP with per-layer forced sets: states listed in
/// `forced_value_zero[h-1]` contribute value 0 (they are forced to leave the
/// reachable part of the chain). Used by the truncated-class machinery.
double max_reach_restricted(const BlockMdp& m, int target_state,
                            const std::vector<std::vector<int>>& forced_value_zero);

struct ValueResult {
    double value = 0.0;
    MarkovPolicy policy;
};

/// Exact finite-horizon optimal value and a greedy state-level policy.
/// Requires a reward table.
ValueResult value_iteration(const BlockMdp& m);

/// Exact expected return of a state-level Markov policy (latent DP).
double policy_return(const BlockMdp& m, const MarkovPolicy& policy);

} // namespace bmdp

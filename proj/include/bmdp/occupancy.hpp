#pragma once

#include <vector>

#include "bmdp/model.hpp"
#include "bmdp/policy.hpp"

namespace bmdp {

/// Per-layer latent state visitation probabilities (local indexing within
/// each layer). Layers outside [first_layer, last covered layer] read as 0.
struct OccupancyTable {
    int first_layer = 1;
    std::vector<std::vector<double>> per_layer;

    int last_layer() const { return first_layer + static_cast<int>(per_layer.size()) - 1; }
    const std::vector<double>& layer(int h) const { return per_layer[h - first_layer]; }
    double at(const BlockMdp& m, int global_state) const;
};

/// Exact forward DP for a schedule starting from the initial distribution.
/// Observation-level policies are marginalized over emissions; stack segments
/// are handled by augmenting the DP state with the carried index. Computes
/// layers 1..last_layer (default: the model horizon).
OccupancyTable exact_occupancy(const BlockMdp& m, const Schedule& sched, int last_layer = -1);

OccupancyTable exact_occupancy(const BlockMdp& m, const MarkovPolicy& policy);

/// Occupancy of unif(roll_in) composed with a partial policy stack at the
/// stack's start layer. A null/empty roll-in means the bare initial
/// distribution (only valid when the stack starts at layer 1). Layers run
/// 1..stack.end_layer+1. Throws on misaligned layers.
OccupancyTable exact_occupancy_stack(const BlockMdp& m, const PolicyCover* roll_in,
                                     const PartialPolicyStack& stack);

/// Occupancy of a single cover member over layers 1..last_layer.
OccupancyTable member_occupancy(const BlockMdp& m, const CoverPolicy& member, int last_layer);

/// Exact expected total reward of a schedule covering layers 1..H.
double exact_return(const BlockMdp& m, const Schedule& sched);

/// Distribution over layer `to_layer` states (local indexing) starting from
/// `dist` over layer `from_layer` states and following `sched` in between.
std::vector<double> forward_distribution(const BlockMdp& m, const Schedule& sched,
                                         int from_layer, const std::vector<double>& dist,
                                         int to_layer);

/// Layer-t state distribution of unif(cover) roll-ins; the initial-state
/// marginal pushed to layer t when the cover is empty (t must then be 1).
std::vector<double> rollin_distribution(const BlockMdp& m, const PolicyCover& roll_in, int t);

} // namespace bmdp

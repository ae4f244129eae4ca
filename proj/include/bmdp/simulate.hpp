#pragma once

#include <vector>

#include "bmdp/model.hpp"
#include "bmdp/policy.hpp"
#include "bmdp/rng.hpp"

namespace bmdp {

/// One rollout. Latent states are recorded for diagnostics only; algorithms
/// must not read them (the tabular variant sees them through the observation
/// channel instead).
struct Trajectory {
    struct Step {
        Obs x;
        int action = -1;
        double reward = 0.0;
        int latent = -1;
    };
    std::vector<Step> steps;

    int length() const { return static_cast<int>(steps.size()); }
    double total_reward() const;
};

/// Samples a trajectory by executing `sched` on the model, stopping after
/// observing layer `last_layer` (the full horizon by default; the action and
/// reward at the stopping layer are recorded only when the schedule covers
/// it). Deterministic given the rng-stream.
Trajectory sample_trajectory(const BlockMdp& m, const Schedule& sched, RngStream& rng,
                             int last_layer = -1);

Trajectory sample_trajectory(const BlockMdp& m, const MarkovPolicy& policy, RngStream& rng);

} // namespace bmdp

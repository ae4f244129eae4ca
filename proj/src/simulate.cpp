#include "bmdp/simulate.hpp"

namespace bmdp {

double Trajectory::total_reward() const {
    double r = 0.0;
    for (const auto& s : steps) r += s.reward;
    return r;
}

Trajectory sample_trajectory(const BlockMdp& m, const Schedule& sched, RngStream& rng,
                             int last_layer) {
    if (last_layer < 0) last_layer = m.horizon;
    Trajectory traj;
    int s = m.layer_offset(1) + rng.categorical(m.initial_dist);
    ScheduleRunner runner(sched);
    for (int h = 1; h <= last_layer; ++h) {
        const auto& em = m.emissions[s];
        Obs x{em.obs[rng.categorical(em.prob)], {}};

        Trajectory::Step step;
        step.x = x;
        step.latent = s;

        const SegmentPolicy* active = nullptr;
        for (const auto& seg : sched.segments)
            if (seg.from_layer <= h) active = &seg.policy;
        bool covered = active != nullptr;
        if (covered && active->kind == SegmentPolicy::Kind::Markov)
            covered = h <= active->markov->end_layer;
        if (covered && active->kind == SegmentPolicy::Kind::Stack)
            covered = h <= active->stack->end_layer;
        if (h < last_layer || (covered && h <= m.horizon)) {
            int a = runner.act(h, x, m.num_actions, rng, s);
            step.action = a;
            step.reward = m.reward_at(s, a);
            if (h < m.horizon) {
                const auto& row = m.transitions[s][a];
                s = m.layer_offset(h + 1) + rng.categorical(row);
            }
        }
        traj.steps.push_back(std::move(step));
    }
    return traj;
}

Trajectory sample_trajectory(const BlockMdp& m, const MarkovPolicy& policy, RngStream& rng) {
    Schedule sched;
    sched.add(policy.start_layer, SegmentPolicy::of(policy));
    return sample_trajectory(m, sched, rng);
}

} // namespace bmdp

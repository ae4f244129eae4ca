#include "bmdp/occupancy.hpp"

#include <algorithm>
#include <stdexcept>

namespace bmdp {

namespace {

// Forward DP over the augmented state (latent, carried index). The carried
// dimension has K slots plus a sentinel (value K) used outside stack segments.
struct Engine {
    const BlockMdp& m;
    const Schedule& sched;
    bool with_rewards = false;

    int carried_slots = 1;

    Engine(const BlockMdp& model, const Schedule& s, bool rewards)
        : m(model), sched(s), with_rewards(rewards) {
        for (const auto& seg : sched.segments)
            if (seg.policy.kind == SegmentPolicy::Kind::Stack)
                for (const auto& rule : seg.policy.stack->rules)
                    carried_slots = std::max(carried_slots, rule->f.num_indices());
    }

    int segment_for(int layer) const {
        int seg = -1;
        for (int k = 0; k < static_cast<int>(sched.segments.size()); ++k)
            if (sched.segments[k].from_layer <= layer) seg = k;
        return seg;
    }

    // d[s_local * (carried_slots+1) + c]
    int idx(int s_local, int c) const { return s_local * (carried_slots + 1) + c; }

    struct Result {
        OccupancyTable occ;
        double ret = 0.0;
    };

    Result run(int from_layer, const std::vector<double>& start, int last_layer) {
        Result res;
        res.occ.first_layer = from_layer;
        const int sentinel = carried_slots;

        int n0 = m.states_per_layer[from_layer - 1];
        if (static_cast<int>(start.size()) != n0)
            throw std::invalid_argument("forward DP: start distribution arity");
        std::vector<double> cur(static_cast<std::size_t>(n0) * (carried_slots + 1), 0.0);
        for (int s = 0; s < n0; ++s) cur[idx(s, sentinel)] = start[s];

        int active_prev = -2;
        for (int h = from_layer; h <= last_layer; ++h) {
            int n = m.states_per_layer[h - 1];

            std::vector<double> marg(n, 0.0);
            for (int s = 0; s < n; ++s)
                for (int c = 0; c <= carried_slots; ++c) marg[s] += cur[idx(s, c)];
            res.occ.per_layer.push_back(marg);

            bool act_here = with_rewards ? true : (h < last_layer);
            if (!act_here) continue;

            int active = segment_for(h);
            if (active < 0)
                throw std::runtime_error("schedule has no segment for layer " + std::to_string(h));
            if (active != active_prev) {
                // A new segment begins: reset the carried index.
                const SegmentPolicy& pol = sched.segments[active].policy;
                int init = (pol.kind == SegmentPolicy::Kind::Stack)
                               ? pol.stack->initial_index
                               : sentinel;
                std::vector<double> reset(cur.size(), 0.0);
                for (int s = 0; s < n; ++s) {
                    double total = 0.0;
                    for (int c = 0; c <= carried_slots; ++c) total += cur[idx(s, c)];
                    reset[idx(s, init)] = total;
                }
                cur.swap(reset);
                active_prev = active;
            }

            const SegmentPolicy& pol = sched.segments[active].policy;
            int offset = m.layer_offset(h);
            bool transition = h < m.horizon;
            int n_next = transition ? m.states_per_layer[h] : 0;
            std::vector<double> next(
                transition ? static_cast<std::size_t>(n_next) * (carried_slots + 1) : 0, 0.0);

            // emit mass p at (s, a, c'): accumulate reward and push through T.
            auto push = [&](int s_local, double p, int a, int c_new) {
                if (p == 0.0) return;
                int s = offset + s_local;
                if (with_rewards && m.has_reward) res.ret += p * m.reward[s][a];
                if (!transition) return;
                const auto& row = m.transitions[s][a];
                for (int t = 0; t < n_next; ++t)
                    if (row[t] != 0.0) next[idx(t, c_new)] += p * row[t];
            };

            for (int s_local = 0; s_local < n; ++s_local) {
                int s = offset + s_local;
                for (int c = 0; c <= carried_slots; ++c) {
                    double p = cur[idx(s_local, c)];
                    if (p == 0.0) continue;
                    switch (pol.kind) {
                        case SegmentPolicy::Kind::Uniform: {
                            double q = p / m.num_actions;
                            for (int a = 0; a < m.num_actions; ++a) push(s_local, q, a, c);
                            break;
                        }
                        case SegmentPolicy::Kind::Markov: {
                            if (pol.markov->level == MarkovPolicy::Level::State) {
                                push(s_local, p, pol.markov->act(h, Obs{}, s), c);
                            } else {
                                const auto& em = m.emissions[s];
                                for (std::size_t k = 0; k < em.obs.size(); ++k)
                                    push(s_local, p * em.prob[k],
                                         pol.markov->act(h, Obs{em.obs[k], {}}), c);
                            }
                            break;
                        }
                        case SegmentPolicy::Kind::Stack: {
                            if (h < pol.stack->start_layer || h > pol.stack->end_layer)
                                throw std::runtime_error("stack undefined at layer " +
                                                         std::to_string(h));
                            const auto& em = m.emissions[s];
                            const IkRule& rule = *pol.stack->rules[h - pol.stack->start_layer];
                            for (std::size_t k = 0; k < em.obs.size(); ++k) {
                                int z = rule.phi.decode(h, Obs{em.obs[k], {}});
                                auto [a, j] = rule.f.argmax_cell(z, c);
                                push(s_local, p * em.prob[k], a, j);
                            }
                            break;
                        }
                    }
                }
            }
            if (transition) cur.swap(next);
        }
        return res;
    }
};

} // namespace

double OccupancyTable::at(const BlockMdp& m, int global_state) const {
    int h = m.layer_of_state(global_state);
    if (h < first_layer || h > last_layer()) return 0.0;
    return layer(h)[global_state - m.layer_offset(h)];
}

OccupancyTable exact_occupancy(const BlockMdp& m, const Schedule& sched, int last_layer) {
    if (last_layer < 0) last_layer = m.horizon;
    Engine eng(m, sched, false);
    return eng.run(1, m.initial_dist, last_layer).occ;
}

OccupancyTable exact_occupancy(const BlockMdp& m, const MarkovPolicy& policy) {
    Schedule sched;
    sched.add(policy.start_layer, SegmentPolicy::of(policy));
    return exact_occupancy(m, sched);
}

OccupancyTable exact_occupancy_stack(const BlockMdp& m, const PolicyCover* roll_in,
                                     const PartialPolicyStack& stack) {
    int t = stack.start_layer;
    int last = std::min(stack.end_layer + 1, m.horizon);
    if (roll_in == nullptr || roll_in->empty()) {
        if (t != 1)
            throw std::invalid_argument("exact_occupancy_stack: stack starts at layer " +
                                        std::to_string(t) + " but no roll-in was given");
        Schedule sched;
        sched.add(1, SegmentPolicy::of(stack));
        return exact_occupancy(m, sched, last);
    }
    if (roll_in->layer != t)
        throw std::invalid_argument("exact_occupancy_stack: misaligned layers");
    OccupancyTable avg;
    avg.first_layer = 1;
    for (const auto& member : roll_in->members) {
        Schedule sched;
        sched.add(1, SegmentPolicy::of(member));
        sched.add(t, SegmentPolicy::of(stack));
        OccupancyTable occ = exact_occupancy(m, sched, last);
        if (avg.per_layer.empty()) {
            avg.per_layer.assign(occ.per_layer.size(), {});
            for (std::size_t k = 0; k < occ.per_layer.size(); ++k)
                avg.per_layer[k].assign(occ.per_layer[k].size(), 0.0);
        }
        double w = 1.0 / roll_in->size();
        for (std::size_t k = 0; k < occ.per_layer.size(); ++k)
            for (std::size_t s = 0; s < occ.per_layer[k].size(); ++s)
                avg.per_layer[k][s] += w * occ.per_layer[k][s];
    }
    return avg;
}

OccupancyTable member_occupancy(const BlockMdp& m, const CoverPolicy& member, int last_layer) {
    Schedule sched;
    sched.add(1, SegmentPolicy::of(member));
    return exact_occupancy(m, sched, last_layer);
}

double exact_return(const BlockMdp& m, const Schedule& sched) {
    if (!m.has_reward) throw std::invalid_argument("exact_return: model has no reward");
    Engine eng(m, sched, true);
    return eng.run(1, m.initial_dist, m.horizon).ret;
}

std::vector<double> forward_distribution(const BlockMdp& m, const Schedule& sched,
                                         int from_layer, const std::vector<double>& dist,
                                         int to_layer) {
    if (to_layer == from_layer) return dist;
    Engine eng(m, sched, false);
    auto res = eng.run(from_layer, dist, to_layer);
    return res.occ.per_layer.back();
}

std::vector<double> rollin_distribution(const BlockMdp& m, const PolicyCover& roll_in, int t) {
    if (roll_in.empty()) {
        if (t != 1) throw std::invalid_argument("rollin_distribution: empty cover at layer > 1");
        return m.initial_dist;
    }
    std::vector<double> mix(m.states_per_layer[t - 1], 0.0);
    for (const auto& member : roll_in.members) {
        OccupancyTable occ = member_occupancy(m, member, t);
        const auto& last = occ.layer(t);
        for (std::size_t s = 0; s < last.size(); ++s) mix[s] += last[s] / roll_in.size();
    }
    return mix;
}

} // namespace bmdp

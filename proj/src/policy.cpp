#include "bmdp/policy.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace bmdp {

int MarkovPolicy::act(int layer, const Obs& x, int latent) const {
    if (layer < start_layer || layer > end_layer)
        throw std::runtime_error("policy undefined at layer " + std::to_string(layer));
    int key = (level == Level::Observation) ? x.id : (latent >= 0 ? latent : x.id);
    if (key < 0 || key >= static_cast<int>(action.size()) || action[key] < 0)
        throw std::runtime_error("policy undefined at (layer " + std::to_string(layer) +
                                 ", observation " + std::to_string(x.id) + ")");
    return action[key];
}

Schedule& Schedule::add(int from_layer, SegmentPolicy p) {
    segments.push_back({from_layer, p});
    std::stable_sort(segments.begin(), segments.end(),
                     [](const Segment& a, const Segment& b) { return a.from_layer < b.from_layer; });
    return *this;
}

int stack_step(const PartialPolicyStack& st, int layer, const Obs& x,
               int& carried, long long* reads) {
    if (layer < st.start_layer || layer > st.end_layer)
        throw std::runtime_error("stack undefined at layer " + std::to_string(layer));
    const IkRule& rule = *st.rules[layer - st.start_layer];
    int z = rule.phi.decode(layer, x);
    auto [a, j] = rule.f.argmax_cell(z, carried, reads);
    carried = j;
    return a;
}

int ScheduleRunner::act(int layer, const Obs& x, int num_actions, RngStream& rng,
                        int latent, long long* reads) {
    int seg = -1;
    for (int k = 0; k < static_cast<int>(sched_->segments.size()); ++k) {
        if (sched_->segments[k].from_layer <= layer) seg = k;
    }
    if (seg < 0)
        throw std::runtime_error("schedule has no segment for layer " + std::to_string(layer));
    const SegmentPolicy& pol = sched_->segments[seg].policy;
    if (seg != active_) {
        active_ = seg;
        carried_ = (pol.kind == SegmentPolicy::Kind::Stack) ? pol.stack->initial_index : -1;
    }
    switch (pol.kind) {
        case SegmentPolicy::Kind::Uniform: return rng.uniform_int(num_actions);
        case SegmentPolicy::Kind::Markov: return pol.markov->act(layer, x, latent);
        case SegmentPolicy::Kind::Stack: return stack_step(*pol.stack, layer, x, carried_, reads);
    }
    throw std::logic_error("unreachable");
}

} // namespace bmdp

#include "bmdp/env.hpp"

#include <stdexcept>

namespace bmdp {

BlockMdpEnv::BlockMdpEnv(const BlockMdp& model, bool tabular, bool composable)
    : model_(&model), tabular_(tabular), composable_(composable) {}

Obs BlockMdpEnv::emit(RngStream& rng) const {
    if (tabular_) return Obs{state_, {}};
    const auto& e = model_->emissions[state_];
    Obs x{e.obs[rng.categorical(e.prob)], {}};
    if (!model_->obs_vectors.empty()) x.vec = model_->obs_vectors[x.id];
    return x;
}

Obs BlockMdpEnv::reset(RngStream& rng) {
    ++episodes_;
    layer_ = 1;
    state_ = model_->layer_offset(1) + rng.categorical(model_->initial_dist);
    return emit(rng);
}

Env::StepResult BlockMdpEnv::step(int action, RngStream& rng) {
    if (layer_ < 1) throw std::logic_error("step before reset");
    if (action < 0 || action >= model_->num_actions)
        throw std::invalid_argument("step: bad action");
    StepResult res;
    res.reward = model_->reward_at(state_, action);
    if (layer_ == model_->horizon) {
        res.done = true;
        return res;
    }
    const auto& row = model_->transitions[state_][action];
    state_ = model_->layer_offset(layer_ + 1) + rng.categorical(row);
    ++layer_;
    res.obs = emit(rng);
    res.done = false;
    return res;
}

} // namespace bmdp

#pragma once

#include <memory>

#include "bmdp/model.hpp"
#include "bmdp/rng.hpp"

namespace bmdp {

/// Episodic sampling interface shared by exact (finite-observation) and
/// sampling-only environments. All randomness comes from the rng-stream the
/// caller passes in; the environment holds only trajectory position.
/// `reset` begins a new episode (counted) and returns the first observation.
class Env {
public:
    virtual ~Env() = default;

    virtual int horizon() const = 0;
    virtual int state_count() const = 0;     // total latent states
    virtual int action_count() const = 0;
    virtual int states_at_layer(int h) const = 0;
    virtual bool rewarded() const = 0;
    virtual bool tabular() const { return false; }
    virtual bool composable() const { return false; }

    /// Exact model behind the observations, or nullptr for sampling-only envs.
    virtual const BlockMdp* exact_model() const { return nullptr; }

    virtual Obs reset(RngStream& rng) = 0;

    struct StepResult {
        Obs obs;            // next observation (empty after the last layer)
        double reward = 0.0;
        bool done = false;
    };
    virtual StepResult step(int action, RngStream& rng) = 0;

    virtual int current_layer() const = 0;

    /// Diagnostics only; algorithms must not call this.
    virtual int current_state() const = 0;

    long long episodes_started() const { return episodes_; }

protected:
    long long episodes_ = 0;
};

/// Environment backed by an explicit model. In tabular mode the observation
/// id equals the latent state id (the emission process is bypassed).
class BlockMdpEnv final : public Env {
public:
    explicit BlockMdpEnv(const BlockMdp& model, bool tabular = false, bool composable = false);

    int horizon() const override { return model_->horizon; }
    int state_count() const override { return model_->total_states(); }
    int action_count() const override { return model_->num_actions; }
    int states_at_layer(int h) const override { return model_->states_per_layer[h - 1]; }
    bool rewarded() const override { return model_->has_reward; }
    bool tabular() const override { return tabular_; }
    bool composable() const override { return composable_; }
    const BlockMdp* exact_model() const override { return model_; }

    Obs reset(RngStream& rng) override;
    StepResult step(int action, RngStream& rng) override;
    int current_layer() const override { return layer_; }
    int current_state() const override { return state_; }

private:
    Obs emit(RngStream& rng) const;

    const BlockMdp* model_;
    bool tabular_;
    bool composable_;
    int state_ = -1;
    int layer_ = 0;
};

} // namespace bmdp

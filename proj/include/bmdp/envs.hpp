#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "bmdp/decoder.hpp"
#include "bmdp/env.hpp"
#include "bmdp/model.hpp"

namespace bmdp {

// ---------------------------------------------------------------------------
// Diabolical combination lock
// ---------------------------------------------------------------------------

enum class CombLockNoise { Noiseless, Gaussian };

struct CombLockSpec {
    int horizon = 3;
    int actions = 10;
    int states_per_layer = 3;          // two good states and one absorbing bad state
    CombLockNoise noise = CombLockNoise::Noiseless;
    double noise_stddev = 0.1;
    std::uint64_t seed = 0;

    /// Observation dimension: the smallest power of two holding the state
    /// one-hot, the layer one-hot, and one noise coordinate.
    int obs_dim() const;
};

struct CombLock {
    CombLockSpec spec;
    BlockMdp model;                     // latent dynamics; noiseless observations
    std::vector<int> good_action;       // [h-1][j] flattened: good_action[2*(h-1)+j]

    int good_state(int layer, int j) const { return model.layer_offset(layer) + j; }
    int bad_state(int layer) const { return model.layer_offset(layer) + 2; }
    int good_action_at(int layer, int j) const { return good_action[2 * (layer - 1) + j]; }
};

/// Builds the lock: at a good state the single good action moves to each of
/// the two next good states with probability 1/2, every other action drops to
/// the absorbing bad state. Reward 1 for the good action at a good final
/// state, an anti-shaped 0.1 for non-good actions at good states below the
/// final layer, 0 otherwise. Noiseless observations are one id per state with
/// the Hadamard-transformed one-hot vector attached.
CombLock make_comblock(const CombLockSpec& spec);

/// Sampling-only environment for the Gaussian-noise observation process:
/// concat(one-hot state, one-hot layer, noise draw), zero-padded and passed
/// through a Hadamard matrix.
class NoisyCombLockEnv final : public Env {
public:
    explicit NoisyCombLockEnv(const CombLock& lock);

    int horizon() const override { return lock_->model.horizon; }
    int state_count() const override { return lock_->model.total_states(); }
    int action_count() const override { return lock_->model.num_actions; }
    int states_at_layer(int h) const override { return lock_->model.states_per_layer[h - 1]; }
    bool rewarded() const override { return true; }
    bool composable() const override { return true; }

    Obs reset(RngStream& rng) override;
    StepResult step(int action, RngStream& rng) override;
    int current_layer() const override { return layer_; }
    int current_state() const override { return state_; }

    std::vector<double> observe(int state, RngStream& rng) const;

private:
    const CombLock* lock_;
    int state_ = -1;
    int layer_ = 0;
};

/// Linear-argmax decoder class for the Gaussian lock: the true
/// Hadamard-inverse map plus row-perturbed decoys.
DecoderClass make_comblock_linear_decoders(const CombLock& lock, int n_decoys,
                                           double perturbation, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Random layered models
// ---------------------------------------------------------------------------

struct RandomBmdpSpec {
    int horizon = 3;
    int states_per_layer = 3;
    int actions = 2;
    int obs_per_state = 1;
    double dirichlet_alpha = 1.0;
    bool with_reward = false;
    std::uint64_t seed = 0;

    /// When set, rescales inbound mass of one state at `plant_layer` (default:
    /// the last layer) until its max reach probability falls below this value.
    std::optional<double> plant_eps;
    int plant_layer = -1;
};

/// Transitions and emissions drawn from symmetric Dirichlet(alpha); k disjoint
/// observations per state; deterministic given the seed. Throws on an
/// infeasible plant request.
BlockMdp make_random_bmdp(const RandomBmdpSpec& spec);

/// Planted state of the most recent make_random_bmdp call semantics: the
/// planted state is always the last state of the plant layer.
int planted_state(const BlockMdp& m, const RandomBmdpSpec& spec);

// ---------------------------------------------------------------------------
// Decoder classes
// ---------------------------------------------------------------------------

/// {true decoder} plus `n_decoys` corruptions. Each decoy re-maps a fraction
/// `corruption_rate` of the observation assignments uniformly to a different
/// state within the same layer (at least one assignment when the rate is
/// positive). Order is shuffled by the seed; the true decoder's position is
/// recorded for tests only.
DecoderClass make_decoder_class(const BlockMdp& m, int n_decoys, double corruption_rate,
                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// Named presets (CLI surface)
// ---------------------------------------------------------------------------

/// Environment addressed by a preset string:
///   comblock:H=<n>[,A=<n>][,noise=none|gaussian][,seed=<n>]
///   random:<path-to-config>   (key = value lines, see parse docs)
///   model:<path>              (serialized model file)
struct EnvHandle {
    std::string preset;
    std::unique_ptr<BlockMdp> owned_model;
    std::unique_ptr<CombLock> lock;
    std::unique_ptr<Env> env;
    bool is_comblock = false;
};

EnvHandle make_env_from_preset(const std::string& preset, std::uint64_t seed, bool tabular);

} // namespace bmdp

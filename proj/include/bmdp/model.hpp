#pragma once

#include <string>
#include <vector>

namespace bmdp {

/// One observation. Finite-observation models use `id` (a global integer);
/// sampling-only environments with vector observations leave `id` at -1 and
/// fill `vec`.
struct Obs {
    int id = -1;
    std::vector<double> vec;
};

/// Layered block MDP over finite latent states, actions, and observations.
///
/// States carry global indices 0..S-1 in layer-major order; observations carry
/// global indices 0..X-1. Emission supports are disjoint across states, so the
/// true decoder is a total map obs -> state. Transition rows for a layer-h
/// state are distributions over the states of layer h+1 (local indexing into
/// `layer_offset(h+1)..`).
class BlockMdp {
public:
    int horizon = 0;
    std::vector<int> states_per_layer;            // |S_1| .. |S_H|
    int num_actions = 0;
    std::vector<double> initial_dist;             // over layer-1 states

    // transitions[s][a] = row over next-layer states (local indices), s global,
    // defined for all states below the last layer.
    std::vector<std::vector<std::vector<double>>> transitions;

    struct Emission {
        std::vector<int> obs;                     // global observation ids
        std::vector<double> prob;
    };
    std::vector<Emission> emissions;              // per global state

    std::vector<int> obs_to_state;                // true decoder, per global obs id
    std::vector<int> obs_layer;                   // layer of each observation

    bool has_reward = false;
    std::vector<std::vector<double>> reward;      // [s][a] in [0,1], empty when !has_reward

    // Optional real-vector payloads attached to observation ids (used by the
    // combination-lock constructions); empty when absent.
    std::vector<std::vector<double>> obs_vectors;

    // ---- derived shape helpers ----
    int total_states() const;
    int total_obs() const { return static_cast<int>(obs_to_state.size()); }
    int layer_offset(int layer) const;            // first global id of layer (1-based layer)
    int layer_of_state(int s) const;
    int local_index(int s) const { return s - layer_offset(layer_of_state(s)); }
    std::vector<int> states_at(int layer) const;  // global ids
    std::vector<int> obs_at(int layer) const;     // global obs ids

    double reward_at(int s, int a) const { return has_reward ? reward[s][a] : 0.0; }
};

struct Violation {
    std::string kind;      // "row-sum", "decodability", "layer-structure", ...
    std::string detail;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

/// Checks every structural invariant: distribution rows sum to 1 within 1e-12,
/// emission supports are pairwise disjoint, the stored decoder matches the
/// supports, transition rows have next-layer arity, rewards lie in [0,1].
ValidationReport validate_model(const BlockMdp& model);

} // namespace bmdp

#pragma once

#include <vector>

#include "bmdp/decoder.hpp"
#include "bmdp/model.hpp"
#include "bmdp/occupancy.hpp"
#include "bmdp/tables.hpp"

namespace bmdp {

/// Inverse-kinematics regression data for a layer pair (t, h): the rollout
/// index drawn at layer t, the action played there, and the observations at
/// layers t and h. Tabular datasets store latent states in the observation
/// ids and leave `index` unused.
struct IkRecord {
    int index = -1;
    int action = -1;
    Obs x_t;
    Obs x_h;
};

struct IkDataset {
    int t = 1;
    int h = 2;
    int num_indices = 1;
    std::vector<IkRecord> records;

    int size() const { return static_cast<int>(records.size()); }
};

struct MleFit {
    ConditionalTable table;
    int decoder_index = -1;
    std::vector<double> logliks;   // achieved log-likelihood per decoder
};

/// Joint maximizer of sum ln f((a,j) | phi(x_t), phi(x_h)) over stochastic
/// tables f and decoders in the class. For fixed phi the inner maximizer is
/// the empirical conditional frequency table (0 ln 0 = 0); the returned
/// decoder maximizes the achieved likelihood, ties to the lowest index.
/// Unobserved conditioning cells stay at the uniform row.
MleFit fit_mle(const IkDataset& data, const DecoderClass& decoders, int num_actions);

/// Tabular form: empirical conditionals of the action given (s_t, s_h).
ConditionalTable fit_mle_tabular(const IkDataset& data, int num_actions);

/// Exact kinematics computed from the model for a layer pair (t, h) and a set
/// of roll-out policies over layers t+1..h-1 (one schedule per index; pass
/// schedules with a single uniform segment for the t = h-1 convention).
///
/// fk(k, s, a, s') = P^{rollout_k}[ s_h = s' | s_t = s, a_t = a ].
class KinematicsTable {
public:
    int t = 1;
    int h = 2;
    int num_actions = 0;
    int num_indices = 0;
    std::vector<int> layer_t_states;   // global ids
    std::vector<int> layer_h_states;

    double fk(int k, int s_t, int a, int s_h) const;

    // Pooled (index-predicting) normalizer and Bayes row.
    double z_pooled(int s_t, int s_h) const;
    double bayes_pooled(int a, int j, int s_t, int s_h) const;
    bool defined_pooled(int s_t, int s_h) const { return z_pooled(s_t, s_h) > 0.0; }

    // Per-rollout (action-only) normalizer and Bayes row.
    double z_single(int k, int s_t, int s_h) const;
    double bayes_single(int k, int a, int s_t, int s_h) const;
    bool defined_single(int k, int s_t, int s_h) const { return z_single(k, s_t, s_h) > 0.0; }

    /// Forward kinematics toward the state targeted by rollout k: the
    /// probability of landing on layer_h_states[k].
    double p_fk(int k, int s_t, int a) const { return fk(k, s_t, a, layer_h_states[k]); }

    std::vector<double> values;        // [k][st][a][sh] flattened

    int st_local(int s_t) const;
    int sh_local(int s_h) const;

private:
    double at(int k, int st, int a, int sh) const;
};

KinematicsTable bayes_predictor(const BlockMdp& m, const std::vector<Schedule>& rollouts,
                                int t, int h);

/// Single-rollout slice (K = 1).
KinematicsTable forward_kinematics(const BlockMdp& m, const Schedule& rollout, int t, int h);

/// Exact expected squared distance between a fitted table and the Bayes
/// predictor under the data-generating process: roll-in distribution over
/// layer-t states, uniform action, rollout(s) to layer h. `rollout_index`
/// selects the per-rollout (action-only) form; -1 selects the pooled
/// index-predicting form. Throws on shape mismatch.
double mle_population_error(const ConditionalTable& fhat, const KinematicsTable& oracle,
                            const std::vector<double>& rollin_dist, int rollout_index = -1);

} // namespace bmdp

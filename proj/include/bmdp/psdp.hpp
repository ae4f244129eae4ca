#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "bmdp/decoder.hpp"
#include "bmdp/env.hpp"
#include "bmdp/musik.hpp"
#include "bmdp/policy.hpp"

namespace bmdp {

/// Estimated state-action returns over decoded states. Missing cells read as
/// 0; stored values are clamped to the layer's return range.
struct QTable {
    int num_actions = 0;
    std::map<std::pair<int, int>, double> values;   // (z, a) -> mean return

    double at(int z, int a) const;
    int greedy(int z) const;   // ties to the lowest action
};

struct QRecord {
    Obs x;
    int layer = 1;      // layer of x (linear decoders need it)
    int action = -1;
    double ret = 0.0;   // cumulative tail return
};

struct QFit {
    QTable q;
    int decoder_index = -1;
    std::vector<double> sses;   // achieved squared error per decoder
};

/// Joint least-squares minimizer over per-cell constant predictors and
/// decoders: for each decoder the inner minimizer is the per-(z, a) empirical
/// mean; the returned decoder minimizes the total squared error (ties to the
/// lowest index). Means are clamped to [0, clamp_hi].
QFit fit_q_regression(const std::vector<QRecord>& records, const DecoderClass& decoders,
                      int num_actions, double clamp_hi);

struct PsdpResult {
    PartialPolicyStack policy;       // greedy layers 1..H (one decode + table row per layer)
    RunStats stats;
    std::vector<int> chosen_decoders;
};

/// Policy search by dynamic programming on top of a policy cover: backward
/// over layers, roll in with unif(cover at h), probe a uniform action, follow
/// the greedy suffix, regress the observed tail returns, extend greedily.
/// Episodes consumed: H * n.
PsdpResult run_psdp(const CoverSet& covers, const DecoderClass& decoders, Env& env,
                    long long n, std::uint64_t seed);

/// Observation-level table form of a K=1 greedy stack (finite models).
MarkovPolicy materialize_markov(const BlockMdp& m, const PartialPolicyStack& stack);

struct EvalResult {
    double value = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    bool exact = false;
    long long episodes = 0;
};

/// Exact latent DP (Markov policies and stacks) or Monte-Carlo mean with a
/// normal-approximation 95% interval.
EvalResult evaluate_policy_return(const BlockMdp& m, const CoverPolicy& policy);
EvalResult evaluate_policy_return_mc(Env& env, const CoverPolicy& policy, long long episodes,
                                     std::uint64_t seed);

} // namespace bmdp

#pragma once

#include <optional>
#include <vector>

#include "bmdp/env.hpp"
#include "bmdp/model.hpp"
#include "bmdp/policy.hpp"

namespace bmdp {

/// Base model augmented with one terminal state per layer and a terminal
/// action. The terminal action moves any layer-h state to the next terminal
/// state; terminal states absorb under every action and emit a dedicated
/// observation. Restricted to base states and actions the dynamics coincide
/// with the base model.
struct ExtendedBmdp {
    BlockMdp ext;
    const BlockMdp* base = nullptr;
    int terminal_action = -1;
    std::vector<int> terminal_state;   // per layer, ext global id
    std::vector<int> ext_of_base;      // base global -> ext global
    std::vector<int> base_of_ext;      // ext global -> base global, -1 for terminals
};

ExtendedBmdp extend(const BlockMdp& base);

/// Per-layer forced-terminal sets representing the truncated policy class:
/// K_t holds the layer-t states whose max reach over the already-truncated
/// class falls below eps (those states are forced to play the terminal
/// action). `max_reach` records the deciding reach value per state.
struct TruncationSets {
    double eps = 0.0;
    std::vector<std::vector<int>> forced;        // per layer, ext global ids
    std::vector<std::vector<double>> max_reach;  // per layer, per base-local state

    bool is_forced(int ext_state, int layer) const;
};

TruncationSets truncated_class(const ExtendedBmdp& ext, double eps);

/// Max reach of an ext-model state over the truncated class (forced states
/// below the target's layer play the terminal action).
double max_reach_truncated(const ExtendedBmdp& ext, const TruncationSets& trunc,
                           int ext_target);

struct CoverEntry {
    int state = -1;        // global id in the model the baseline lives in
    double baseline = 0.0;
    double achieved = 0.0;
    bool pass = false;
};

struct CoverReport {
    int layer = 0;
    double alpha = 0.0;
    double eps = 0.0;
    bool all_pass = true;
    std::vector<CoverEntry> entries;   // one per state with baseline >= eps
};

/// Absolute cover check: for every layer state with unrestricted max reach at
/// least eps, the best member occupancy must reach alpha times the baseline.
CoverReport check_cover(const BlockMdp& m, const PolicyCover& cover, double alpha, double eps);

/// Relative check against the truncated class in the extended model. Members
/// must never play the terminal action (their base occupancies are then equal
/// to their extended occupancies, which is what gets compared).
CoverReport check_cover_truncated(const ExtendedBmdp& ext, const TruncationSets& trunc,
                                  const PolicyCover& cover, double alpha, double eps);

/// Statistical cover check for sampling-only environments: per-member reach
/// estimated from rollouts; a state passes when the best estimate clears
/// alpha * baseline minus a 95% binomial margin. Baselines must be supplied
/// (exact reach is unavailable without a model). Entries are flagged
/// statistical via CoverReport::statistical.
struct McCoverReport {
    CoverReport report;
    bool statistical = true;
    long long episodes_per_member = 0;
};

McCoverReport check_cover_mc(Env& env, const PolicyCover& cover, double alpha, double eps,
                             const std::vector<double>& baselines,
                             long long episodes_per_member, std::uint64_t seed);

struct LemmaEntry {
    int state = -1;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;   // rhs - lhs
    bool ok = false;
};

struct LemmaReport {
    bool all_ok = true;
    std::vector<LemmaEntry> entries;
};

/// For every base state: unrestricted max reach <= truncated max reach +
/// S * eps (tolerance 1e-10).
LemmaReport verify_truncation_lemma(const ExtendedBmdp& ext, double eps);

struct TransferLayerReport {
    int layer = 0;
    bool premise = false;      // (1/2, eps/2S)-cover relative to the truncated class
    bool conclusion = false;   // (1/4, eps)-cover, unrestricted, base model
    bool implication_ok = true;
};

struct TransferReport {
    double eps = 0.0;
    double inner_eps = 0.0;    // eps / (2S)
    bool all_ok = true;
    std::vector<TransferLayerReport> layers;   // layers 2..H
};

/// Instance-wise check of the cover-transfer implication, layer by layer.
TransferReport verify_transfer(const BlockMdp& m, double eps, const CoverSet& covers);

/// Exhaustive enumeration of state-level Markov policies (the test oracle).
/// `forced` (per layer, global ids) pins those states to `forced_action`.
/// Throws when the policy space exceeds the guard (1e7).
double brute_force_max_reach(const BlockMdp& m, int target,
                             const std::vector<std::vector<int>>* forced = nullptr,
                             int forced_action = -1);

/// Exhaustive-enumeration optimal value for tiny rewarded models.
double brute_force_max_value(const BlockMdp& m);

} // namespace bmdp

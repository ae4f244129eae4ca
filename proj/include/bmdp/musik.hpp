#pragma once

#include <cstdint>
#include <vector>

#include "bmdp/decoder.hpp"
#include "bmdp/density.hpp"
#include "bmdp/env.hpp"
#include "bmdp/policy.hpp"
#include "bmdp/simulate.hpp"

namespace bmdp {

struct MusikConfig {
    enum class Variant { Bmdp, Tabular, Composable };

    long long n = 1000;        // samples per regression
    double eps = 0.05;         // target cover resolution (reporting / auto-n)
    double delta = 0.05;       // failure budget (reporting only)
    double theory_c = 1e-9;    // constant for the sample-size heuristic
    Variant variant = Variant::Bmdp;
};

struct RunStats {
    long long episodes = 0;
    // chosen decoder index per regression, in execution order
    std::vector<int> chosen_decoders;
    double wall_ms = 0.0;
};

struct MusikResult {
    CoverSet covers;
    RunStats stats;
};

/// Reward-free exploration: builds per-layer policy covers by iterating the
/// inverse-kinematics dynamic program for h = 2..H. The layer-1 cover is
/// empty (roll-ins there use the initial distribution). Episodes consumed:
/// sum over h of (h-1) * n.
MusikResult run_musik(Env& env, const DecoderClass& decoders, const MusikConfig& cfg,
                      std::uint64_t seed);

/// One backward pass for layer h: for t = h-1..1 collect a dataset, solve the
/// inverse-kinematics regression, and prepend the learned rule to the policy
/// stacks. Returns S policy stacks (one per rollout index). `stats` may be
/// null.
PolicyCover run_ikdp(Env& env, const CoverSet& covers, const DecoderClass& decoders,
                     long long n, int h, std::uint64_t seed, RunStats* stats);

/// Roll in with unif(roll_in) to layer t (initial distribution when empty),
/// play a uniform action, draw a rollout index uniformly from [num_indices],
/// and follow that stack to layer h. Records (index, action, x_t, x_h).
/// `roll_outs` must either cover all indices or be empty (the t = h-1
/// convention, where the rollout is vacuous).
IkDataset collect_ik_dataset(Env& env, int t, int h, const PolicyCover& roll_in,
                             const std::vector<PartialPolicyStack>& roll_outs,
                             long long n, int num_indices, std::uint64_t seed);

/// Composition step: one stack per index i, playing the rule's argmax at the
/// rule's layer and carrying the index into `next`. The rule list is shared
/// across all returned stacks.
std::vector<PartialPolicyStack> build_partial_policies(const IkRulePtr& rule,
                                                       const std::vector<PartialPolicyStack>& next,
                                                       int num_indices);

struct ExecutionStats {
    long long table_reads = 0;
    int stored_rule_pairs = 0;
};

/// Executes a stack on an environment positioned at the stack's start layer;
/// returns the partial trajectory from start to end+1 (observations) and the
/// actions played. Per-step work is one decode plus one scan of the A*S
/// argmax cells.
Trajectory execute_stack(const PartialPolicyStack& stack, Env& env, const Obs& current,
                         RngStream& rng, ExecutionStats* instr = nullptr);

/// Tabular variant: per target state at layer h a separate action-only
/// regression; Markov (state-level) partial policies composed per index.
/// Episodes consumed: sum over h of (h-1) * |S_h| * n.
MusikResult run_musik_tab(Env& env, long long n, std::uint64_t seed);

/// Forward one-step variant for environments with composable policy covers
/// (flagged on the env). Builds Markov-behaving covers layer by layer from
/// one-step inverse kinematics plus an index-association table. Episodes
/// consumed: (H-1) * n.
MusikResult run_musik_comp(Env& env, const DecoderClass& decoders, long long n,
                           std::uint64_t seed);

/// Sample-size heuristic from the cover guarantees; solves the ln(n)
/// self-reference by 20 fixed-point rounds and returns the ceiling (at least
/// 1; saturates instead of overflowing).
long long recommended_n(int S, int A, int H, long long decoder_class_size, double eps,
                        double delta, double c,
                        MusikConfig::Variant variant = MusikConfig::Variant::Bmdp);

} // namespace bmdp

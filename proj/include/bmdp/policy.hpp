#pragma once

#include <variant>
#include <vector>

#include "bmdp/rng.hpp"
#include "bmdp/tables.hpp"

namespace bmdp {

/// Markov (partial) policy over layers [start_layer, end_layer]. State-level
/// policies index `action` by global latent state (usable on tabular
/// environments and in model-side dynamic programming); observation-level
/// policies index it by global observation id. Entries of -1 are undefined.
struct MarkovPolicy {
    enum class Level { State, Observation };
    Level level = Level::State;
    int start_layer = 1;
    int end_layer = 1;
    std::vector<int> action;

    /// Action at `layer`; `latent` is the decoded state when the caller knows
    /// it (model-side DP, tabular envs), otherwise the observation id is used
    /// for state-level policies.
    int act(int layer, const Obs& x, int latent = -1) const;
};

/// Non-Markov partial policy represented by its per-layer (table, decoder)
/// rules plus the initial carried index. Executing it carries a single index
/// across layers: at layer tau the rule's argmax over (action, index) cells
/// yields the action to play and the index to carry. Rules are shared between
/// the policies of one cover, so a layer-h cover stores h-1 rule pairs total.
struct PartialPolicyStack {
    int start_layer = 1;
    int end_layer = 1;
    int initial_index = 0;
    std::vector<IkRulePtr> rules;   // rules[tau - start_layer]
};

struct CoverPolicy {
    std::variant<MarkovPolicy, PartialPolicyStack> impl;

    bool is_stack() const { return std::holds_alternative<PartialPolicyStack>(impl); }
    const MarkovPolicy& markov() const { return std::get<MarkovPolicy>(impl); }
    const PartialPolicyStack& stack() const { return std::get<PartialPolicyStack>(impl); }
};

/// Policy cover for one layer: members span layers 1..layer-1.
struct PolicyCover {
    int layer = 1;
    std::vector<CoverPolicy> members;

    int size() const { return static_cast<int>(members.size()); }
    bool empty() const { return members.empty(); }
};

/// Per-layer covers, covers[h-1] for layer h; the layer-1 cover is empty by
/// convention (roll-ins at layer 1 use the initial distribution).
struct CoverSet {
    std::vector<PolicyCover> covers;

    const PolicyCover& at_layer(int h) const { return covers[h - 1]; }
    PolicyCover& at_layer(int h) { return covers[h - 1]; }
};

/// Mid-trajectory policy switching: an ordered list of (switch layer, policy)
/// segments. Segment k is in force from its switch layer until the next
/// segment begins. Segments are non-owning views; the referenced policies
/// must outlive the schedule.
struct SegmentPolicy {
    enum class Kind { Uniform, Markov, Stack };
    Kind kind = Kind::Uniform;
    const MarkovPolicy* markov = nullptr;
    const PartialPolicyStack* stack = nullptr;

    static SegmentPolicy uniform() { return {}; }
    static SegmentPolicy of(const MarkovPolicy& p) { return {Kind::Markov, &p, nullptr}; }
    static SegmentPolicy of(const PartialPolicyStack& p) { return {Kind::Stack, nullptr, &p}; }
    static SegmentPolicy of(const CoverPolicy& p) {
        return p.is_stack() ? of(p.stack()) : of(p.markov());
    }
};

struct Schedule {
    struct Segment {
        int from_layer;
        SegmentPolicy policy;
    };
    std::vector<Segment> segments;

    Schedule& add(int from_layer, SegmentPolicy p);
};

/// Per-episode execution state for a schedule (carried stack indices live
/// here, keeping the policies themselves immutable and shareable).
class ScheduleRunner {
public:
    explicit ScheduleRunner(const Schedule& s) : sched_(&s) {}

    /// Action at `layer` given observation `x`. `latent` as in
    /// MarkovPolicy::act. `reads` counts conditional-table cell reads.
    int act(int layer, const Obs& x, int num_actions, RngStream& rng,
            int latent = -1, long long* reads = nullptr);

private:
    const Schedule* sched_;
    int active_ = -1;
    int carried_ = -1;
};

/// One stack step: decode, argmax over (action, index) cells, update the
/// carried index. Returns the action.
int stack_step(const PartialPolicyStack& st, int layer, const Obs& x,
               int& carried, long long* reads = nullptr);

} // namespace bmdp

#include "bmdp/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bmdp/dp.hpp"
#include "bmdp/occupancy.hpp"

namespace bmdp {

namespace {
constexpr double kTol = 1e-10;
}

ExtendedBmdp extend(const BlockMdp& base) {
    ExtendedBmdp out;
    out.base = &base;
    BlockMdp& m = out.ext;
    const int H = base.horizon;
    const int A = base.num_actions;

    m.horizon = H;
    m.num_actions = A + 1;
    out.terminal_action = A;
    m.states_per_layer.resize(H);
    for (int h = 1; h <= H; ++h) m.states_per_layer[h - 1] = base.states_per_layer[h - 1] + 1;

    out.ext_of_base.assign(base.total_states(), -1);
    out.base_of_ext.assign(m.total_states(), -1);
    out.terminal_state.resize(H);
    for (int h = 1; h <= H; ++h) {
        int nb = base.states_per_layer[h - 1];
        for (int i = 0; i < nb; ++i) {
            int b = base.layer_offset(h) + i;
            int x = m.layer_offset(h) + i;
            out.ext_of_base[b] = x;
            out.base_of_ext[x] = b;
        }
        out.terminal_state[h - 1] = m.layer_offset(h) + nb;
    }

    m.initial_dist.assign(m.states_per_layer[0], 0.0);
    for (std::size_t i = 0; i < base.initial_dist.size(); ++i)
        m.initial_dist[i] = base.initial_dist[i];

    m.transitions.resize(m.total_states());
    for (int h = 1; h < H; ++h) {
        int nb = base.states_per_layer[h - 1];
        int n_next = m.states_per_layer[h];
        int terminal_next_local = n_next - 1;
        for (int i = 0; i <= nb; ++i) {
            int s = m.layer_offset(h) + i;
            m.transitions[s].assign(A + 1, std::vector<double>(n_next, 0.0));
            for (int a = 0; a <= A; ++a) {
                auto& row = m.transitions[s][a];
                if (i == nb || a == A) {
                    row[terminal_next_local] = 1.0;   // terminal chain / terminal action
                } else {
                    int b = base.layer_offset(h) + i;
                    const auto& brow = base.transitions[b][a];
                    for (std::size_t t = 0; t < brow.size(); ++t) row[t] = brow[t];
                }
            }
        }
    }

    // Emissions: base observations keep their ids; each terminal state emits
    // one fresh observation.
    int X = base.total_obs();
    m.obs_to_state.assign(X + H, -1);
    m.obs_layer.assign(X + H, -1);
    m.emissions.resize(m.total_states());
    for (int b = 0; b < base.total_states(); ++b) {
        int s = out.ext_of_base[b];
        m.emissions[s] = base.emissions[b];
        for (int x : m.emissions[s].obs) {
            m.obs_to_state[x] = s;
            m.obs_layer[x] = base.obs_layer[x];
        }
    }
    for (int h = 1; h <= H; ++h) {
        int s = out.terminal_state[h - 1];
        int x = X + (h - 1);
        m.emissions[s].obs = {x};
        m.emissions[s].prob = {1.0};
        m.obs_to_state[x] = s;
        m.obs_layer[x] = h;
    }

    if (base.has_reward) {
        m.has_reward = true;
        m.reward.assign(m.total_states(), std::vector<double>(A + 1, 0.0));
        for (int b = 0; b < base.total_states(); ++b)
            for (int a = 0; a < A; ++a) m.reward[out.ext_of_base[b]][a] = base.reward[b][a];
    }
    return out;
}

bool TruncationSets::is_forced(int ext_state, int layer) const {
    const auto& f = forced[layer - 1];
    return std::find(f.begin(), f.end(), ext_state) != f.end();
}

TruncationSets truncated_class(const ExtendedBmdp& ext, double eps) {
    if (eps <= 0.0 || eps >= 1.0)
        throw std::invalid_argument("truncated_class: eps in (0,1)");
    const BlockMdp& m = ext.ext;
    TruncationSets trunc;
    trunc.eps = eps;
    trunc.forced.resize(m.horizon);
    trunc.max_reach.resize(m.horizon);
    for (int t = 1; t <= m.horizon; ++t) {
        int nb = ext.base->states_per_layer[t - 1];
        trunc.max_reach[t - 1].resize(nb);
        for (int i = 0; i < nb; ++i) {
            int s = m.layer_offset(t) + i;
            // Reach over the class truncated at layers < t; behavior at later
            // layers cannot affect a layer-t visitation.
            double r = max_reach_restricted(m, s, trunc.forced);
            trunc.max_reach[t - 1][i] = r;
            if (r < eps) trunc.forced[t - 1].push_back(s);
        }
    }
    return trunc;
}

double max_reach_truncated(const ExtendedBmdp& ext, const TruncationSets& trunc,
                           int ext_target) {
    return max_reach_restricted(ext.ext, ext_target, trunc.forced);
}

namespace {

// Max over cover members of the layer-h occupancy, one DP per member.
std::vector<double> best_member_occupancy(const BlockMdp& m, const PolicyCover& cover, int h) {
    std::vector<double> best(m.states_per_layer[h - 1], 0.0);
    for (const auto& member : cover.members) {
        OccupancyTable occ = member_occupancy(m, member, h);
        const auto& row = occ.layer(h);
        for (std::size_t i = 0; i < row.size(); ++i) best[i] = std::max(best[i], row[i]);
    }
    return best;
}

} // namespace

CoverReport check_cover(const BlockMdp& m, const PolicyCover& cover, double alpha, double eps) {
    CoverReport rep;
    rep.layer = cover.layer;
    rep.alpha = alpha;
    rep.eps = eps;
    int h = cover.layer;
    std::vector<double> achieved(m.states_per_layer[h - 1], 0.0);
    if (!cover.empty()) achieved = best_member_occupancy(m, cover, h);
    for (int i = 0; i < m.states_per_layer[h - 1]; ++i) {
        int s = m.layer_offset(h) + i;
        double baseline = max_reach_probability(m, s).probability;
        if (baseline < eps) continue;
        CoverEntry entry;
        entry.state = s;
        entry.baseline = baseline;
        entry.achieved = achieved[i];
        entry.pass = entry.achieved >= alpha * baseline - kTol;
        rep.all_pass = rep.all_pass && entry.pass;
        rep.entries.push_back(entry);
    }
    return rep;
}

CoverReport check_cover_truncated(const ExtendedBmdp& ext, const TruncationSets& trunc,
                                  const PolicyCover& cover, double alpha, double eps) {
    CoverReport rep;
    rep.layer = cover.layer;
    rep.alpha = alpha;
    rep.eps = eps;
    int h = cover.layer;
    const BlockMdp& base = *ext.base;
    std::vector<double> achieved(base.states_per_layer[h - 1], 0.0);
    if (!cover.empty()) achieved = best_member_occupancy(base, cover, h);
    for (int i = 0; i < base.states_per_layer[h - 1]; ++i) {
        int s_ext = ext.ext.layer_offset(h) + i;
        double baseline = max_reach_truncated(ext, trunc, s_ext);
        if (baseline < eps) continue;
        CoverEntry entry;
        entry.state = s_ext;
        entry.baseline = baseline;
        entry.achieved = achieved[i];
        entry.pass = entry.achieved >= alpha * baseline - kTol;
        rep.all_pass = rep.all_pass && entry.pass;
        rep.entries.push_back(entry);
    }
    return rep;
}

McCoverReport check_cover_mc(Env& env, const PolicyCover& cover, double alpha, double eps,
                             const std::vector<double>& baselines,
                             long long episodes_per_member, std::uint64_t seed) {
    const int h = cover.layer;
    if (static_cast<int>(baselines.size()) != env.states_at_layer(h))
        throw std::invalid_argument("check_cover_mc: baseline arity");
    McCoverReport out;
    out.episodes_per_member = episodes_per_member;
    CoverReport& rep = out.report;
    rep.layer = h;
    rep.alpha = alpha;
    rep.eps = eps;

    // layer-local offset of the target layer
    int offset = 0;
    for (int t = 1; t < h; ++t) offset += env.states_at_layer(t);

    std::vector<double> achieved(baselines.size(), 0.0);
    for (std::size_t mi = 0; mi < cover.members.size(); ++mi) {
        Schedule sched;
        sched.add(1, SegmentPolicy::of(cover.members[mi]));
        std::vector<long long> hits(baselines.size(), 0);
        for (long long e = 0; e < episodes_per_member; ++e) {
            RngStream rng(seed, "cover-mc", (static_cast<std::uint64_t>(mi) << 40) ^
                                                static_cast<std::uint64_t>(e));
            Obs x = env.reset(rng);
            ScheduleRunner runner(sched);
            for (int tau = 1; tau < h; ++tau) {
                int a = runner.act(tau, x, env.action_count(), rng);
                x = env.step(a, rng).obs;
            }
            ++hits[env.current_state() - offset];
        }
        for (std::size_t i = 0; i < hits.size(); ++i)
            achieved[i] =
                std::max(achieved[i], static_cast<double>(hits[i]) / episodes_per_member);
    }
    for (std::size_t i = 0; i < baselines.size(); ++i) {
        if (baselines[i] < eps) continue;
        CoverEntry entry;
        entry.state = offset + static_cast<int>(i);
        entry.baseline = baselines[i];
        entry.achieved = achieved[i];
        double margin =
            1.96 * std::sqrt(achieved[i] * (1.0 - achieved[i]) /
                             static_cast<double>(episodes_per_member));
        entry.pass = achieved[i] + margin >= alpha * baselines[i];
        rep.all_pass = rep.all_pass && entry.pass;
        rep.entries.push_back(entry);
    }
    return out;
}

LemmaReport verify_truncation_lemma(const ExtendedBmdp& ext, double eps) {
    LemmaReport rep;
    TruncationSets trunc = truncated_class(ext, eps);
    const BlockMdp& m = ext.ext;
    double slack = ext.base->total_states() * eps;
    for (int h = 1; h <= m.horizon; ++h) {
        for (int i = 0; i < ext.base->states_per_layer[h - 1]; ++i) {
            int s = m.layer_offset(h) + i;
            LemmaEntry entry;
            entry.state = s;
            entry.lhs = max_reach_probability(m, s).probability;
            entry.rhs = max_reach_truncated(ext, trunc, s) + slack;
            entry.margin = entry.rhs - entry.lhs;
            entry.ok = entry.lhs <= entry.rhs + kTol;
            rep.all_ok = rep.all_ok && entry.ok;
            rep.entries.push_back(entry);
        }
    }
    return rep;
}

TransferReport verify_transfer(const BlockMdp& m, double eps, const CoverSet& covers) {
    TransferReport rep;
    rep.eps = eps;
    rep.inner_eps = eps / (2.0 * m.total_states());
    ExtendedBmdp ext = extend(m);
    TruncationSets trunc = truncated_class(ext, rep.inner_eps);
    for (int h = 2; h <= m.horizon; ++h) {
        const PolicyCover& cover = covers.at_layer(h);
        TransferLayerReport layer;
        layer.layer = h;
        layer.premise =
            check_cover_truncated(ext, trunc, cover, 0.5, rep.inner_eps).all_pass;
        layer.conclusion = check_cover(m, cover, 0.25, eps).all_pass;
        layer.implication_ok = !layer.premise || layer.conclusion;
        rep.all_ok = rep.all_ok && layer.implication_ok;
        rep.layers.push_back(layer);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Brute-force oracles
// ---------------------------------------------------------------------------

namespace {

struct PolicyEnumerator {
    // free_states[i]: global state id whose action is enumerated
    std::vector<int> free_states;
    std::vector<int> choice;
    int num_actions;

    explicit PolicyEnumerator(int A) : num_actions(A) {}

    long long space() const {
        long long total = 1;
        for (std::size_t i = 0; i < free_states.size(); ++i) {
            total *= num_actions;
            if (total > 10000000LL) return total;
        }
        return total;
    }

    bool next() {
        for (std::size_t i = 0; i < choice.size(); ++i) {
            if (++choice[i] < num_actions) return true;
            choice[i] = 0;
        }
        return false;
    }
};

} // namespace

double brute_force_max_reach(const BlockMdp& m, int target,
                             const std::vector<std::vector<int>>* forced, int forced_action) {
    int target_layer = m.layer_of_state(target);
    PolicyEnumerator en(m.num_actions);
    MarkovPolicy pol;
    pol.level = MarkovPolicy::Level::State;
    pol.start_layer = 1;
    pol.end_layer = m.horizon;
    pol.action.assign(m.total_states(), 0);

    for (int h = 1; h < target_layer; ++h) {
        for (int s : m.states_at(h)) {
            bool pinned = false;
            if (forced) {
                const auto& f = (*forced)[h - 1];
                pinned = std::find(f.begin(), f.end(), s) != f.end();
            }
            if (pinned) pol.action[s] = forced_action;
            else en.free_states.push_back(s);
        }
    }
    if (en.space() > 10000000LL)
        throw std::invalid_argument("brute_force_max_reach: policy space exceeds guard");
    en.choice.assign(en.free_states.size(), 0);

    double best = 0.0;
    do {
        for (std::size_t i = 0; i < en.free_states.size(); ++i)
            pol.action[en.free_states[i]] = en.choice[i];
        OccupancyTable occ = exact_occupancy(m, pol);
        best = std::max(best, occ.at(m, target));
    } while (en.next());
    return best;
}

double brute_force_max_value(const BlockMdp& m) {
    if (!m.has_reward) throw std::invalid_argument("brute_force_max_value: no reward");
    PolicyEnumerator en(m.num_actions);
    MarkovPolicy pol;
    pol.level = MarkovPolicy::Level::State;
    pol.start_layer = 1;
    pol.end_layer = m.horizon;
    pol.action.assign(m.total_states(), 0);
    for (int s = 0; s < m.total_states(); ++s) en.free_states.push_back(s);
    if (en.space() > 10000000LL)
        throw std::invalid_argument("brute_force_max_value: policy space exceeds guard");
    en.choice.assign(en.free_states.size(), 0);

    double best = 0.0;
    do {
        for (std::size_t i = 0; i < en.free_states.size(); ++i)
            pol.action[en.free_states[i]] = en.choice[i];
        best = std::max(best, policy_return(m, pol));
    } while (en.next());
    return best;
}

} // namespace bmdp

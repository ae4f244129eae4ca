#include "bmdp/dp.hpp"

#include <algorithm>
#include <stdexcept>

#include "bmdp/occupancy.hpp"

namespace bmdp {

namespace {

// Backward reach DP; fills an optional argmax action table (global states).
double reach_dp(const BlockMdp& m, int target, const std::vector<std::vector<int>>* forced,
                std::vector<int>* argmax_action) {
    int target_layer = m.layer_of_state(target);
    int n_t = m.states_per_layer[target_layer - 1];
    std::vector<double> value(n_t, 0.0);
    value[target - m.layer_offset(target_layer)] = 1.0;

    for (int h = target_layer - 1; h >= 1; --h) {
        int n = m.states_per_layer[h - 1];
        int offset = m.layer_offset(h);
        std::vector<double> v(n, 0.0);
        for (int s_local = 0; s_local < n; ++s_local) {
            int s = offset + s_local;
            bool is_forced = false;
            if (forced) {
                const auto& f = (*forced)[h - 1];
                is_forced = std::find(f.begin(), f.end(), s) != f.end();
            }
            if (is_forced) {
                v[s_local] = 0.0;
                continue;
            }
            double best = -1.0;
            int best_a = 0;
            for (int a = 0; a < m.num_actions; ++a) {
                const auto& row = m.transitions[s][a];
                double q = 0.0;
                for (std::size_t t = 0; t < row.size(); ++t) q += row[t] * value[t];
                if (q > best) {
                    best = q;
                    best_a = a;
                }
            }
            v[s_local] = best;
            if (argmax_action) (*argmax_action)[s] = best_a;
        }
        value.swap(v);
    }

    if (target_layer == 1) {
        return m.initial_dist[target - m.layer_offset(1)];
    }
    double p = 0.0;
    for (std::size_t s = 0; s < m.initial_dist.size(); ++s) p += m.initial_dist[s] * value[s];
    return p;
}

} // namespace

ReachResult max_reach_probability(const BlockMdp& m, int target_state) {
    if (target_state < 0 || target_state >= m.total_states())
        throw std::out_of_range("max_reach_probability: bad target state");
    ReachResult res;
    std::vector<int> actions(m.total_states(), 0);
    res.probability = reach_dp(m, target_state, nullptr, &actions);
    res.policy.level = MarkovPolicy::Level::State;
    res.policy.start_layer = 1;
    res.policy.end_layer = m.horizon;
    res.policy.action = std::move(actions);
    return res;
}

double max_reach_restricted(const BlockMdp& m, int target_state,
                            const std::vector<std::vector<int>>& forced_value_zero) {
    return reach_dp(m, target_state, &forced_value_zero, nullptr);
}

ValueResult value_iteration(const BlockMdp& m) {
    if (!m.has_reward) throw std::invalid_argument("value_iteration: model has no reward");
    ValueResult res;
    res.policy.level = MarkovPolicy::Level::State;
    res.policy.start_layer = 1;
    res.policy.end_layer = m.horizon;
    res.policy.action.assign(m.total_states(), 0);

    std::vector<double> value(m.states_per_layer[m.horizon - 1], 0.0);
    for (int h = m.horizon; h >= 1; --h) {
        int n = m.states_per_layer[h - 1];
        int offset = m.layer_offset(h);
        std::vector<double> v(n, 0.0);
        for (int s_local = 0; s_local < n; ++s_local) {
            int s = offset + s_local;
            double best = -1.0;
            int best_a = 0;
            for (int a = 0; a < m.num_actions; ++a) {
                double q = m.reward[s][a];
                if (h < m.horizon) {
                    const auto& row = m.transitions[s][a];
                    for (std::size_t t = 0; t < row.size(); ++t) q += row[t] * value[t];
                }
                if (q > best) {
                    best = q;
                    best_a = a;
                }
            }
            v[s_local] = best;
            res.policy.action[s] = best_a;
        }
        value.swap(v);
    }
    for (std::size_t s = 0; s < m.initial_dist.size(); ++s)
        res.value += m.initial_dist[s] * value[s];
    return res;
}

double policy_return(const BlockMdp& m, const MarkovPolicy& policy) {
    Schedule sched;
    sched.add(policy.start_layer, SegmentPolicy::of(policy));
    return exact_return(m, sched);
}

} // namespace bmdp

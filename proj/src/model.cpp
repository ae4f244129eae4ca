#include "bmdp/model.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace bmdp {

namespace {

constexpr double kRowSumTol = 1e-12;

std::string fmt(const char* pattern, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, args...);
    return std::string(buf);
}

} // namespace

int BlockMdp::total_states() const {
    return std::accumulate(states_per_layer.begin(), states_per_layer.end(), 0);
}

int BlockMdp::layer_offset(int layer) const {
    int off = 0;
    for (int h = 1; h < layer; ++h) off += states_per_layer[h - 1];
    return off;
}

int BlockMdp::layer_of_state(int s) const {
    int off = 0;
    for (int h = 1; h <= horizon; ++h) {
        off += states_per_layer[h - 1];
        if (s < off) return h;
    }
    throw std::out_of_range("layer_of_state: bad state id");
}

std::vector<int> BlockMdp::states_at(int layer) const {
    std::vector<int> out(states_per_layer[layer - 1]);
    std::iota(out.begin(), out.end(), layer_offset(layer));
    return out;
}

std::vector<int> BlockMdp::obs_at(int layer) const {
    std::vector<int> out;
    for (int x = 0; x < total_obs(); ++x)
        if (obs_layer[x] == layer) out.push_back(x);
    return out;
}

ValidationReport validate_model(const BlockMdp& m) {
    ValidationReport rep;
    auto add = [&](std::string kind, std::string detail) {
        rep.violations.push_back({std::move(kind), std::move(detail)});
    };

    if (m.horizon < 1) add("shape", "horizon must be >= 1");
    if (static_cast<int>(m.states_per_layer.size()) != m.horizon)
        add("shape", "states_per_layer size != horizon");
    if (m.num_actions < 1) add("shape", "actions must be >= 1");
    if (!rep.ok()) return rep;

    const int S = m.total_states();

    // Initial distribution.
    if (static_cast<int>(m.initial_dist.size()) != m.states_per_layer[0]) {
        add("shape", "initial_dist arity");
    } else {
        double sum = std::accumulate(m.initial_dist.begin(), m.initial_dist.end(), 0.0);
        if (std::abs(sum - 1.0) > kRowSumTol)
            add("row-sum", fmt("initial_dist sums to %.17g", sum));
        for (double p : m.initial_dist)
            if (p < 0.0) add("negative", "initial_dist has a negative entry");
    }

    // Transition rows: defined for every state below the last layer, supported
    // on the next layer only (enforced by arity).
    if (static_cast<int>(m.transitions.size()) != S) {
        add("shape", "transitions indexed by fewer/more states than the model has");
    } else {
        for (int s = 0; s < S; ++s) {
            int h = m.layer_of_state(s);
            if (h == m.horizon) {
                if (!m.transitions[s].empty())
                    add("layer-structure", fmt("state %d at last layer has transition rows", s));
                continue;
            }
            if (static_cast<int>(m.transitions[s].size()) != m.num_actions) {
                add("shape", fmt("state %d transition action arity", s));
                continue;
            }
            int next_count = m.states_per_layer[h];
            for (int a = 0; a < m.num_actions; ++a) {
                const auto& row = m.transitions[s][a];
                if (static_cast<int>(row.size()) != next_count) {
                    add("layer-structure", fmt("row arity at (h=%d,s=%d,a=%d)", h, s, a));
                    continue;
                }
                double sum = std::accumulate(row.begin(), row.end(), 0.0);
                if (std::abs(sum - 1.0) > kRowSumTol)
                    add("row-sum", fmt("transition row (h=%d,s=%d,a=%d) sums to %.17g", h, s, a, sum));
                for (double p : row)
                    if (p < 0.0) add("negative", fmt("negative transition prob at (s=%d,a=%d)", s, a));
            }
        }
    }

    // Emissions: rows normalized, supports disjoint, decoder consistent.
    if (static_cast<int>(m.emissions.size()) != S) {
        add("shape", "emissions indexed by fewer/more states than the model has");
        return rep;
    }
    std::vector<int> owner(m.obs_to_state.size(), -1);
    for (int s = 0; s < S; ++s) {
        const auto& e = m.emissions[s];
        if (e.obs.size() != e.prob.size() || e.obs.empty()) {
            add("shape", fmt("emission support of state %d", s));
            continue;
        }
        double sum = std::accumulate(e.prob.begin(), e.prob.end(), 0.0);
        if (std::abs(sum - 1.0) > kRowSumTol)
            add("row-sum", fmt("emission row of state %d sums to %.17g", s, sum));
        for (std::size_t k = 0; k < e.obs.size(); ++k) {
            int x = e.obs[k];
            if (x < 0 || x >= m.total_obs()) {
                add("shape", fmt("state %d emits unknown observation %d", s, x));
                continue;
            }
            if (e.prob[k] < 0.0) add("negative", fmt("negative emission prob at (s=%d,x=%d)", s, x));
            if (owner[x] >= 0 && owner[x] != s)
                add("decodability", fmt("observation %d emitted by states %d and %d", x, owner[x], s));
            owner[x] = s;
            if (m.obs_to_state[x] != s)
                add("decoder", fmt("decoder maps observation %d to %d, emitted by %d", x, m.obs_to_state[x], s));
            if (m.obs_layer[x] != m.layer_of_state(s))
                add("layer-structure", fmt("observation %d tagged with wrong layer", x));
        }
    }
    for (std::size_t x = 0; x < owner.size(); ++x)
        if (owner[x] < 0) add("shape", fmt("observation %zu emitted by no state", x));

    if (m.has_reward) {
        if (static_cast<int>(m.reward.size()) != S) {
            add("shape", "reward table arity");
        } else {
            for (int s = 0; s < S; ++s) {
                if (static_cast<int>(m.reward[s].size()) != m.num_actions) {
                    add("shape", fmt("reward row arity at state %d", s));
                    continue;
                }
                for (int a = 0; a < m.num_actions; ++a)
                    if (m.reward[s][a] < 0.0 || m.reward[s][a] > 1.0)
                        add("reward-range", fmt("reward(%d,%d) outside [0,1]", s, a));
            }
        }
    }
    return rep;
}

} // namespace bmdp

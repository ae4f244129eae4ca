#include "bmdp/psdp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "bmdp/occupancy.hpp"

namespace bmdp {

double QTable::at(int z, int a) const {
    auto it = values.find({z, a});
    return it == values.end() ? 0.0 : it->second;
}

int QTable::greedy(int z) const {
    int best = 0;
    double best_v = at(z, 0);
    for (int a = 1; a < num_actions; ++a) {
        double v = at(z, a);
        if (v > best_v) {
            best_v = v;
            best = a;
        }
    }
    return best;
}

QFit fit_q_regression(const std::vector<QRecord>& records, const DecoderClass& decoders,
                      int num_actions, double clamp_hi) {
    if (records.empty()) throw std::invalid_argument("fit_q_regression: empty records");
    QFit fit;
    fit.sses.resize(decoders.size());
    int best = -1;
    std::map<std::pair<int, int>, std::pair<double, double>> best_cells;   // (sum, count)
    // Records carry the layer in their observation; decode layer is taken from
    // the observation id's layer at call sites via the decoder itself, so the
    // layer argument below only matters for linear decoders.
    for (int d = 0; d < decoders.size(); ++d) {
        std::map<std::pair<int, int>, std::pair<double, double>> cells;
        double sumsq = 0.0;
        for (const auto& rec : records) {
            int z = decoders[d].decode(rec.layer, rec.x);
            auto& cell = cells[{z, rec.action}];
            cell.first += rec.ret;
            cell.second += 1.0;
            sumsq += rec.ret * rec.ret;
        }
        double sse = sumsq;
        for (const auto& [key, cell] : cells) sse -= cell.first * cell.first / cell.second;
        fit.sses[d] = sse;
        if (best < 0 || sse < fit.sses[best]) {
            best = d;
            best_cells = std::move(cells);
        }
    }
    fit.decoder_index = best;
    fit.q.num_actions = num_actions;
    for (const auto& [key, cell] : best_cells) {
        double mean = cell.first / cell.second;
        fit.q.values[key] = std::clamp(mean, 0.0, clamp_hi);
    }
    return fit;
}

PsdpResult run_psdp(const CoverSet& covers, const DecoderClass& decoders, Env& env,
                    long long n, std::uint64_t seed) {
    if (!env.rewarded()) throw std::invalid_argument("run_psdp: environment has no reward");
    const int H = env.horizon();
    const int A = env.action_count();
    const int S = env.state_count();
    if (static_cast<int>(covers.covers.size()) < H)
        throw std::invalid_argument("run_psdp: covers do not span all layers");
    auto start = std::chrono::steady_clock::now();
    long long episodes_before = env.episodes_started();

    PsdpResult res;
    std::vector<IkRulePtr> greedy_rules;   // rules for layers h..H as h walks back

    for (int h = H; h >= 1; --h) {
        const PolicyCover& roll_in = covers.at_layer(h);
        if (h > 1 && roll_in.empty())
            throw std::invalid_argument("run_psdp: cover gap at layer " + std::to_string(h));

        std::vector<QRecord> records;
        records.reserve(n);
        for (long long e = 0; e < n; ++e) {
            RngStream rng(seed, "psdp",
                          (static_cast<std::uint64_t>(h) << 48) ^ static_cast<std::uint64_t>(e));
            Obs x = env.reset(rng);
            if (h > 1) {
                const CoverPolicy& member = roll_in.members[rng.uniform_int(roll_in.size())];
                Schedule sched;
                sched.add(1, SegmentPolicy::of(member));
                ScheduleRunner runner(sched);
                for (int tau = 1; tau < h; ++tau) {
                    int a = runner.act(tau, x, A, rng);
                    x = env.step(a, rng).obs;
                }
            }
            QRecord rec;
            rec.x = x;
            rec.layer = h;
            rec.action = rng.uniform_int(A);
            auto step = env.step(rec.action, rng);
            rec.ret = step.reward;
            if (h < H) {
                Obs cur = step.obs;
                int carried = 0;
                PartialPolicyStack suffix;
                suffix.start_layer = h + 1;
                suffix.end_layer = H;
                suffix.rules = greedy_rules;
                for (int tau = h + 1; tau <= H; ++tau) {
                    int a = stack_step(suffix, tau, cur, carried);
                    auto s2 = env.step(a, rng);
                    rec.ret += s2.reward;
                    cur = s2.obs;
                }
            }
            records.push_back(std::move(rec));
        }

        QFit fit = fit_q_regression(records, decoders, A, static_cast<double>(H - h + 1));
        res.chosen_decoders.push_back(fit.decoder_index);

        auto rule = std::make_shared<IkRule>();
        rule->layer = h;
        rule->f = ConditionalTable(A, 1);
        rule->phi = decoders[fit.decoder_index];
        rule->decoder_index = fit.decoder_index;
        for (int z = 0; z < S; ++z) {
            std::vector<double> point(A, 0.0);
            point[fit.q.greedy(z)] = 1.0;
            rule->f.set_row(z, 0, std::move(point));
        }
        greedy_rules.insert(greedy_rules.begin(), rule);
    }

    res.policy.start_layer = 1;
    res.policy.end_layer = H;
    res.policy.initial_index = 0;
    res.policy.rules = std::move(greedy_rules);
    res.stats.episodes = env.episodes_started() - episodes_before;
    res.stats.wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start).count();
    return res;
}

MarkovPolicy materialize_markov(const BlockMdp& m, const PartialPolicyStack& stack) {
    MarkovPolicy pol;
    pol.level = MarkovPolicy::Level::Observation;
    pol.start_layer = stack.start_layer;
    pol.end_layer = stack.end_layer;
    pol.action.assign(m.total_obs(), -1);
    for (int x = 0; x < m.total_obs(); ++x) {
        int layer = m.obs_layer[x];
        if (layer < stack.start_layer || layer > stack.end_layer) continue;
        const IkRule& rule = *stack.rules[layer - stack.start_layer];
        int z = rule.phi.decode(layer, Obs{x, {}});
        auto [a, j] = rule.f.argmax_cell(z, 0);
        (void)j;
        pol.action[x] = a;
    }
    return pol;
}

EvalResult evaluate_policy_return(const BlockMdp& m, const CoverPolicy& policy) {
    if (!m.has_reward) throw std::invalid_argument("evaluate_policy_return: no reward");
    Schedule sched;
    sched.add(1, SegmentPolicy::of(policy));
    EvalResult res;
    res.value = exact_return(m, sched);
    res.ci_lo = res.ci_hi = res.value;
    res.exact = true;
    return res;
}

EvalResult evaluate_policy_return_mc(Env& env, const CoverPolicy& policy, long long episodes,
                                     std::uint64_t seed) {
    if (!env.rewarded()) throw std::invalid_argument("evaluate_policy_return_mc: no reward");
    Schedule sched;
    sched.add(1, SegmentPolicy::of(policy));
    double sum = 0.0, sumsq = 0.0;
    for (long long e = 0; e < episodes; ++e) {
        RngStream rng(seed, "eval", e);
        Obs x = env.reset(rng);
        ScheduleRunner runner(sched);
        double total = 0.0;
        for (int tau = 1; tau <= env.horizon(); ++tau) {
            int a = runner.act(tau, x, env.action_count(), rng);
            auto step = env.step(a, rng);
            total += step.reward;
            x = step.obs;
        }
        sum += total;
        sumsq += total * total;
    }
    EvalResult res;
    res.episodes = episodes;
    res.value = sum / episodes;
    double var = std::max(0.0, sumsq / episodes - res.value * res.value);
    double half = 1.96 * std::sqrt(var / episodes);
    res.ci_lo = res.value - half;
    res.ci_hi = res.value + half;
    return res;
}

} // namespace bmdp

#include "bmdp/musik.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <stdexcept>

namespace bmdp {

namespace {

std::uint64_t episode_key(int h, int t, long long e) {
    return (static_cast<std::uint64_t>(h) << 52) ^ (static_cast<std::uint64_t>(t) << 40) ^
           static_cast<std::uint64_t>(e);
}

// Rolls in with one cover member from reset up to (and including) layer
// stop-1; returns the observation at `stop`.
Obs roll_in_to(Env& env, const CoverPolicy* member, int stop, RngStream& rng) {
    Obs x = env.reset(rng);
    if (stop == 1) return x;
    Schedule sched;
    if (member) sched.add(1, SegmentPolicy::of(*member));
    else sched.add(1, SegmentPolicy::uniform());
    ScheduleRunner runner(sched);
    for (int tau = 1; tau < stop; ++tau) {
        int a = runner.act(tau, x, env.action_count(), rng);
        x = env.step(a, rng).obs;
    }
    return x;
}

const CoverPolicy* pick_member(const PolicyCover& cover, RngStream& rng) {
    if (cover.empty()) return nullptr;
    return &cover.members[rng.uniform_int(cover.size())];
}

} // namespace

IkDataset collect_ik_dataset(Env& env, int t, int h, const PolicyCover& roll_in,
                             const std::vector<PartialPolicyStack>& roll_outs,
                             long long n, int num_indices, std::uint64_t seed) {
    if (!roll_outs.empty() && static_cast<int>(roll_outs.size()) != num_indices)
        throw std::invalid_argument("collect_ik_dataset: roll_outs must cover all indices");
    if (roll_outs.empty() && t != h - 1)
        throw std::invalid_argument("collect_ik_dataset: missing roll-outs for t < h-1");
    if (t > 1 && roll_in.empty())
        throw std::invalid_argument("collect_ik_dataset: empty roll-in cover at layer " +
                                    std::to_string(t));

    IkDataset data;
    data.t = t;
    data.h = h;
    data.num_indices = num_indices;
    data.records.reserve(n);

    for (long long e = 0; e < n; ++e) {
        RngStream rng(seed, "ik-data", episode_key(h, t, e));
        const CoverPolicy* member = (t > 1) ? pick_member(roll_in, rng) : nullptr;
        Obs x_t = roll_in_to(env, member, t, rng);
        int index = rng.uniform_int(num_indices);
        int a_t = rng.uniform_int(env.action_count());
        Obs x = env.step(a_t, rng).obs;
        if (!roll_outs.empty()) {
            const PartialPolicyStack& stack = roll_outs[index];
            int carried = stack.initial_index;
            for (int tau = t + 1; tau <= h - 1; ++tau) {
                int a = stack_step(stack, tau, x, carried);
                x = env.step(a, rng).obs;
            }
        }
        data.records.push_back({index, a_t, std::move(x_t), std::move(x)});
    }
    return data;
}

std::vector<PartialPolicyStack> build_partial_policies(const IkRulePtr& rule,
                                                       const std::vector<PartialPolicyStack>& next,
                                                       int num_indices) {
    std::vector<IkRulePtr> rules;
    int end_layer = rule->layer;
    if (!next.empty()) {
        if (next.front().start_layer != rule->layer + 1)
            throw std::invalid_argument("build_partial_policies: rule/stack layer mismatch");
        rules.reserve(next.front().rules.size() + 1);
        rules.push_back(rule);
        rules.insert(rules.end(), next.front().rules.begin(), next.front().rules.end());
        end_layer = next.front().end_layer;
    } else {
        rules.push_back(rule);
    }
    std::vector<PartialPolicyStack> out(num_indices);
    for (int i = 0; i < num_indices; ++i) {
        out[i].start_layer = rule->layer;
        out[i].end_layer = end_layer;
        out[i].initial_index = i;
        out[i].rules = rules;   // shared_ptr copies; tables are shared
    }
    return out;
}

Trajectory execute_stack(const PartialPolicyStack& stack, Env& env, const Obs& current,
                         RngStream& rng, ExecutionStats* instr) {
    if (env.current_layer() != stack.start_layer)
        throw std::invalid_argument("execute_stack: env at layer " +
                                    std::to_string(env.current_layer()) + ", stack starts at " +
                                    std::to_string(stack.start_layer));
    Trajectory traj;
    Obs x = current;
    int carried = stack.initial_index;
    long long* reads = instr ? &instr->table_reads : nullptr;
    if (instr) instr->stored_rule_pairs = static_cast<int>(stack.rules.size());
    for (int tau = stack.start_layer; tau <= stack.end_layer; ++tau) {
        Trajectory::Step step;
        step.x = x;
        step.action = stack_step(stack, tau, x, carried, reads);
        auto res = env.step(step.action, rng);
        step.reward = res.reward;
        traj.steps.push_back(step);
        x = res.obs;
        if (res.done) break;
    }
    Trajectory::Step last;
    last.x = x;
    traj.steps.push_back(last);
    return traj;
}

PolicyCover run_ikdp(Env& env, const CoverSet& covers, const DecoderClass& decoders,
                     long long n, int h, std::uint64_t seed, RunStats* stats) {
    const int K = env.state_count();
    const int A = env.action_count();
    std::vector<PartialPolicyStack> current;   // empty at t = h-1 (uniform rollout)
    for (int t = h - 1; t >= 1; --t) {
        IkDataset data =
            collect_ik_dataset(env, t, h, covers.at_layer(t), current, n, K, seed);
        MleFit fit = fit_mle(data, decoders, A);
        auto rule = std::make_shared<IkRule>();
        rule->layer = t;
        rule->f = std::move(fit.table);
        rule->phi = decoders[fit.decoder_index];
        rule->decoder_index = fit.decoder_index;
        current = build_partial_policies(rule, current, K);
        if (stats) stats->chosen_decoders.push_back(fit.decoder_index);
    }
    PolicyCover cover;
    cover.layer = h;
    for (auto& stack : current) cover.members.push_back({std::move(stack)});
    return cover;
}

MusikResult run_musik(Env& env, const DecoderClass& decoders, const MusikConfig& cfg,
                      std::uint64_t seed) {
    auto start = std::chrono::steady_clock::now();
    long long episodes_before = env.episodes_started();
    MusikResult res;
    res.covers.covers.resize(env.horizon());
    for (int h = 1; h <= env.horizon(); ++h) res.covers.covers[h - 1].layer = h;
    for (int h = 2; h <= env.horizon(); ++h)
        res.covers.covers[h - 1] = run_ikdp(env, res.covers, decoders, cfg.n, h, seed, &res.stats);
    res.stats.episodes = env.episodes_started() - episodes_before;
    res.stats.wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start).count();
    return res;
}

// ---------------------------------------------------------------------------
// Tabular variant
// ---------------------------------------------------------------------------

MusikResult run_musik_tab(Env& env, long long n, std::uint64_t seed) {
    if (!env.tabular())
        throw std::invalid_argument("run_musik_tab: environment does not expose latent states");
    auto start = std::chrono::steady_clock::now();
    long long episodes_before = env.episodes_started();
    const int H = env.horizon();
    const int A = env.action_count();
    const int S = env.state_count();

    std::vector<int> offsets(H + 1, 0);
    for (int h = 1; h <= H; ++h) offsets[h] = offsets[h - 1] + env.states_at_layer(h);

    MusikResult res;
    res.covers.covers.resize(H);
    for (int h = 1; h <= H; ++h) res.covers.covers[h - 1].layer = h;

    for (int h = 2; h <= H; ++h) {
        const int K = env.states_at_layer(h);
        std::vector<MarkovPolicy> current(K);   // pi^(i, t+1); empty tables at t = h-1
        for (int i = 0; i < K; ++i) {
            current[i].level = MarkovPolicy::Level::State;
            current[i].start_layer = h;   // no layers yet
            current[i].end_layer = h - 1;
            current[i].action.assign(S, -1);
        }
        for (int t = h - 1; t >= 1; --t) {
            std::vector<MarkovPolicy> updated = current;
            for (int i = 0; i < K; ++i) {
                int target = offsets[h - 1] + i;
                // n rollouts with the index-i partial policy
                IkDataset data;
                data.t = t;
                data.h = h;
                data.num_indices = 1;
                data.records.reserve(n);
                for (long long e = 0; e < n; ++e) {
                    RngStream rng(seed, "ik-tab",
                                  episode_key(h, t, e * static_cast<long long>(K) + i));
                    const PolicyCover& roll_in = res.covers.at_layer(t);
                    const CoverPolicy* member = (t > 1) ? pick_member(roll_in, rng) : nullptr;
                    if (t > 1 && member == nullptr)
                        throw std::invalid_argument("run_musik_tab: missing cover for layer " +
                                                    std::to_string(t));
                    Obs x_t = roll_in_to(env, member, t, rng);
                    int a_t = rng.uniform_int(A);
                    Obs x = env.step(a_t, rng).obs;
                    for (int tau = t + 1; tau <= h - 1; ++tau) {
                        int a = current[i].act(tau, x);
                        x = env.step(a, rng).obs;
                    }
                    data.records.push_back({0, a_t, std::move(x_t), std::move(x)});
                }
                ConditionalTable f = fit_mle_tabular(data, A);
                // greedy action toward the target cell, composed with the same index
                MarkovPolicy& pol = updated[i];
                pol.start_layer = t;
                pol.end_layer = h - 1;
                for (int s = offsets[t - 1]; s < offsets[t]; ++s) {
                    const auto& row = f.row(s, target);
                    int best = 0;
                    for (int a = 1; a < A; ++a)
                        if (row[a] > row[best]) best = a;
                    pol.action[s] = best;
                }
            }
            current = std::move(updated);
        }
        PolicyCover cover;
        cover.layer = h;
        for (auto& pol : current) cover.members.push_back({std::move(pol)});
        res.covers.covers[h - 1] = std::move(cover);
    }
    res.stats.episodes = env.episodes_started() - episodes_before;
    res.stats.wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start).count();
    return res;
}

// ---------------------------------------------------------------------------
// Composable variant
// ---------------------------------------------------------------------------

namespace {

// Empirical conditional counts keyed by (cell, decoded layer-h state).
struct CompCounts {
    std::map<std::pair<int, int>, std::vector<double>> cells;
    double loglik() const {
        double total = 0.0;
        for (const auto& [key, row] : cells) {
            double cell_total = 0.0;
            for (double c : row) cell_total += c;
            for (double c : row)
                if (c > 0.0) total += c * std::log(c / cell_total);
        }
        return total;
    }
};

// Cell of the layer-(h-1) observation: the observation id when finite,
// otherwise the decoded state under the candidate decoder.
int comp_cell(const Decoder& phi, int layer, const Obs& x) {
    if (x.id >= 0) return x.id;
    return phi.decode(layer, x);
}

} // namespace

MusikResult run_musik_comp(Env& env, const DecoderClass& decoders, long long n,
                           std::uint64_t seed) {
    if (!env.composable())
        throw std::invalid_argument("run_musik_comp: environment lacks the composability flag");
    auto start = std::chrono::steady_clock::now();
    long long episodes_before = env.episodes_started();
    const int H = env.horizon();
    const int A = env.action_count();

    std::vector<int> offsets(H + 1, 0);
    for (int h = 1; h <= H; ++h) offsets[h] = offsets[h - 1] + env.states_at_layer(h);

    MusikResult res;
    res.covers.covers.resize(H);
    for (int h = 1; h <= H; ++h) res.covers.covers[h - 1].layer = h;

    // Layer-1 cover: uniform members (their span is empty; roll-ins at layer 1
    // take no actions before the uniform probe).
    {
        PolicyCover& c1 = res.covers.covers[0];
        for (int j = 0; j < env.states_at_layer(1); ++j) {
            PartialPolicyStack st;
            st.start_layer = 1;
            st.end_layer = 0;
            st.initial_index = 0;
            c1.members.push_back({std::move(st)});
        }
    }

    for (int h = 2; h <= H; ++h) {
        const PolicyCover& prev = res.covers.at_layer(h - 1);
        const int n_prev = prev.size();
        const int K = env.states_at_layer(h);

        // -- collect (member index, a_{h-1}, x_{h-1}, x_h)
        struct CompRecord {
            int member;
            int action;
            Obs x_prev, x_h;
        };
        std::vector<CompRecord> records;
        records.reserve(n);
        for (long long e = 0; e < n; ++e) {
            RngStream rng(seed, "ik-comp", episode_key(h, 0, e));
            int idx = rng.uniform_int(n_prev);
            const CoverPolicy& member = prev.members[idx];
            Obs x = env.reset(rng);
            if (h >= 3) {
                Schedule sched;
                sched.add(1, SegmentPolicy::of(member));
                ScheduleRunner runner(sched);
                for (int tau = 1; tau <= h - 2; ++tau) {
                    int a = runner.act(tau, x, A, rng);
                    x = env.step(a, rng).obs;
                }
            }
            int a = rng.uniform_int(A);
            Obs x_h = env.step(a, rng).obs;
            records.push_back({idx, a, std::move(x), std::move(x_h)});
        }

        // -- one-step inverse kinematics with a hard decoder at layer h
        int best_decoder = -1;
        double best_loglik = 0.0;
        CompCounts best_counts;
        for (int d = 0; d < decoders.size(); ++d) {
            CompCounts counts;
            for (const auto& rec : records) {
                int cell = comp_cell(decoders[d], h - 1, rec.x_prev);
                int zp = decoders[d].decode(h, rec.x_h);
                auto& row = counts.cells[{cell, zp}];
                if (row.empty()) row.assign(A, 0.0);
                row[rec.action] += 1.0;
            }
            double ll = counts.loglik();
            if (best_decoder < 0 || ll > best_loglik) {
                best_decoder = d;
                best_loglik = ll;
                best_counts = std::move(counts);
            }
        }
        const Decoder& phi = decoders[best_decoder];
        res.stats.chosen_decoders.push_back(best_decoder);

        // Rule rows are keyed by the x-cell of the layer-(h-1) observation:
        // the raw observation id on finite environments, the decoded cell
        // otherwise. The rule's decoder must reproduce that keying.
        Decoder row_key_decoder = phi;
        if (const BlockMdp* fm = env.exact_model()) {
            std::vector<int> ident(fm->total_obs());
            for (std::size_t x = 0; x < ident.size(); ++x) ident[x] = static_cast<int>(x);
            row_key_decoder = Decoder::table(std::move(ident));
        }

        // -- association between previous members and decoded layer-h cells
        std::map<int, std::vector<double>> assoc;   // decoded cell -> counts per member
        for (const auto& rec : records) {
            int zp = phi.decode(h, rec.x_h);
            auto& row = assoc[zp];
            if (row.empty()) row.assign(n_prev, 0.0);
            row[rec.member] += 1.0;
        }

        // -- compose the next cover: one policy per layer-h cell
        PolicyCover cover;
        cover.layer = h;
        for (int j_local = 0; j_local < K; ++j_local) {
            int cell = offsets[h - 1] + j_local;
            int best_member = 0;
            if (auto it = assoc.find(cell); it != assoc.end()) {
                const auto& row = it->second;
                for (int i = 1; i < n_prev; ++i)
                    if (row[i] > row[best_member]) best_member = i;
            }
            // action table at layer h-1: argmax_a fhat(a | cell(x), target cell)
            auto rule = std::make_shared<IkRule>();
            rule->layer = h - 1;
            rule->f = ConditionalTable(A, 1);
            rule->phi = row_key_decoder;
            rule->decoder_index = best_decoder;
            for (const auto& [key, row] : best_counts.cells) {
                if (key.second != cell) continue;
                int best_a = 0;
                for (int a = 1; a < A; ++a)
                    if (row[a] > row[best_a]) best_a = a;
                std::vector<double> point(A, 0.0);
                point[best_a] = 1.0;
                rule->f.set_row(key.first, 0, std::move(point));
            }
            const CoverPolicy& follow = prev.members[best_member];
            PartialPolicyStack st;
            st.start_layer = 1;
            st.end_layer = h - 1;
            st.initial_index = 0;
            if (follow.is_stack()) st.rules = follow.stack().rules;
            st.rules.push_back(std::move(rule));
            cover.members.push_back({std::move(st)});
        }
        res.covers.covers[h - 1] = std::move(cover);
    }
    res.stats.episodes = env.episodes_started() - episodes_before;
    res.stats.wall_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start).count();
    return res;
}

long long recommended_n(int S, int A, int H, long long decoder_class_size, double eps,
                        double delta, double c, MusikConfig::Variant variant) {
    if (S < 1 || A < 1 || H < 1 || decoder_class_size < 1 || eps <= 0.0 || delta <= 0.0)
        throw std::invalid_argument("recommended_n: all arguments must be positive");
    auto rhs = [&](double n) {
        double Sf = S, Af = A, Hf = H;
        double log_n = std::log(std::max(n, 2.0));
        if (variant == MusikConfig::Variant::Tabular) {
            return c * Af * Af * std::pow(Sf, 6.0) * Hf * Hf *
                   (Sf * Sf * Af * log_n + std::log(Sf * Hf * Hf / delta)) / (eps * eps);
        }
        return c * Af * Af * std::pow(Sf, 10.0) * Hf * Hf *
               (Sf * Sf * Sf * Af * log_n +
                std::log(static_cast<double>(decoder_class_size) * Hf * Hf / delta)) /
               (eps * eps);
    };
    double n = 2.0;
    for (int round = 0; round < 20; ++round) {
        n = rhs(n);
        if (n > 4e18) return 4000000000000000000LL;
        if (n < 1.0) n = 1.0;
    }
    return static_cast<long long>(std::ceil(std::max(n, 1.0)));
}

} // namespace bmdp

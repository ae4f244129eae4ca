#include <doctest.h>

#include "bmdp/analysis.hpp"
#include "bmdp/dp.hpp"
#include "bmdp/musik.hpp"
#include "bmdp/psdp.hpp"
#include "test_util.hpp"

using namespace bmdp;
using namespace testutil;

namespace {

// Per-state argmax policies: an exact cover for every layer.
CoverSet exact_covers(const BlockMdp& m) {
    CoverSet covers;
    covers.covers.resize(m.horizon);
    for (int h = 1; h <= m.horizon; ++h) {
        covers.covers[h - 1].layer = h;
        if (h == 1) continue;
        for (int s : m.states_at(h)) {
            MarkovPolicy pol = to_obs_level(m, max_reach_probability(m, s).policy);
            pol.end_layer = h - 1;
            covers.covers[h - 1].members.push_back({std::move(pol)});
        }
    }
    return covers;
}

BlockMdp rewarded_model(std::uint64_t seed, int H = 3, int states = 3, int actions = 2) {
    RandomBmdpSpec spec;
    spec.horizon = H;
    spec.states_per_layer = states;
    spec.actions = actions;
    spec.obs_per_state = 2;
    spec.with_reward = true;
    spec.seed = seed;
    return make_random_bmdp(spec);
}

} // namespace

TEST_CASE("fit_q_regression: constant returns give every seen cell that constant") {
    std::vector<QRecord> records;
    for (int e = 0; e < 40; ++e) records.push_back({Obs{e % 4, {}}, 1, e % 2, 0.7});
    DecoderClass cls;
    cls.decoders.push_back(Decoder::table({0, 0, 1, 1}));
    cls.decoders.push_back(Decoder::table({0, 1, 1, 0}));
    QFit fit = fit_q_regression(records, cls, 2, 3.0);
    CHECK(fit.decoder_index == 0);   // tie on SSE = 0, lowest index wins
    CHECK(fit.sses[0] == doctest::Approx(0.0));
    CHECK(fit.sses[1] == doctest::Approx(0.0));
    for (const auto& [key, v] : fit.q.values) CHECK(v == doctest::Approx(0.7));
}

TEST_CASE("fit_q_regression: a single record pins its cell exactly") {
    std::vector<QRecord> records = {{Obs{2, {}}, 1, 0, 1.25}};
    DecoderClass cls;
    cls.decoders.push_back(Decoder::table({0, 1, 2, 3}));
    QFit fit = fit_q_regression(records, cls, 2, 2.0);
    CHECK(fit.q.at(2, 0) == doctest::Approx(1.25));
    CHECK(fit.q.at(2, 1) == doctest::Approx(0.0));   // empty cell default
}

TEST_CASE("fit_q_regression: the state-splitting decoder beats the merger") {
    // observations 0 and 1 carry different mean returns; decoder 1 merges them
    std::vector<QRecord> records;
    RngStream rng(3, "q", 0);
    for (int e = 0; e < 20000; ++e) {
        int x = rng.uniform_int(2);
        double r = (x == 0) ? 0.9 : 0.1;
        records.push_back({Obs{x, {}}, 1, 0, r + 0.01 * rng.normal(0, 1)});
    }
    DecoderClass cls;
    cls.decoders.push_back(Decoder::table({0, 0}));   // merger first: must lose anyway
    cls.decoders.push_back(Decoder::table({0, 1}));
    QFit fit = fit_q_regression(records, cls, 2, 1.0);
    CHECK(fit.decoder_index == 1);
    CHECK(fit.sses[1] < fit.sses[0]);
}

TEST_CASE("fit_q_regression returns a joint minimizer over the class") {
    BlockMdp m = rewarded_model(5);
    DecoderClass cls = make_decoder_class(m, 7, 0.4, 9);
    std::vector<QRecord> records;
    BlockMdpEnv env(m);
    for (int e = 0; e < 2000; ++e) {
        RngStream rng(11, "collect", e);
        Obs x = env.reset(rng);
        QRecord rec;
        rec.x = x;
        rec.layer = 1;
        rec.action = rng.uniform_int(m.num_actions);
        auto step = env.step(rec.action, rng);
        rec.ret = step.reward;
        for (int tau = 2; tau <= m.horizon; ++tau) {
            auto s2 = env.step(rng.uniform_int(m.num_actions), rng);
            rec.ret += s2.reward;
        }
        records.push_back(std::move(rec));
    }
    QFit fit = fit_q_regression(records, cls, m.num_actions, m.horizon);
    for (int d = 0; d < cls.size(); ++d)
        CHECK(fit.sses[fit.decoder_index] <= fit.sses[d] + 1e-9);
}

TEST_CASE("q values never exceed the horizon") {
    BlockMdp m = rewarded_model(7, 4);
    BlockMdpEnv env(m);
    DecoderClass cls = make_decoder_class(m, 3, 0.3, 13);
    CoverSet covers = exact_covers(m);
    PsdpResult res = run_psdp(covers, cls, env, 2000, 15);
    CHECK(res.stats.episodes == 4 * 2000);
    // greedy rules are point masses; probing the q-range through the clamp:
    // rewards are in [0,1], so any fitted mean lies in [0, H]
    for (const auto& rule : res.policy.rules)
        for (const auto& [key, row] : rule->f.rows())
            for (double p : row) CHECK(p <= 1.0 + 1e-12);
}

TEST_CASE("psdp with H=1 is a one-shot bandit regression") {
    BlockMdp m = rewarded_model(9, 1, 2, 3);
    BlockMdpEnv env(m);
    DecoderClass cls = make_decoder_class(m, 0, 0.0, 1);
    CoverSet covers;
    covers.covers.resize(1);
    covers.covers[0].layer = 1;
    PsdpResult res = run_psdp(covers, cls, env, 20000, 17);
    CHECK(res.stats.episodes == 20000);
    // greedy action per state equals the argmax of the mean reward
    MarkovPolicy learned = materialize_markov(m, res.policy);
    for (int s : m.states_at(1)) {
        int best = 0;
        for (int a = 1; a < m.num_actions; ++a)
            if (m.reward[s][a] > m.reward[s][best]) best = a;
        for (int x : m.emissions[s].obs) CHECK(learned.action[x] == best);
    }
}

TEST_CASE("psdp with exact covers recovers a near-optimal tabular policy") {
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        BlockMdp m = rewarded_model(seed, 4, 3, 3);
        BlockMdpEnv env(m);
        DecoderClass cls = make_decoder_class(m, 0, 0.0, 1);
        CoverSet covers = exact_covers(m);
        PsdpResult res = run_psdp(covers, cls, env, 30000, seed);
        double opt = value_iteration(m).value;
        double got = evaluate_policy_return(m, CoverPolicy{res.policy}).value;
        CHECK(got >= opt - 0.05);
    }
}

TEST_CASE("comblock H=4: exploration covers plus psdp give mean return 1 over 50 episodes") {
    CombLockSpec spec;
    spec.horizon = 4;
    spec.seed = 25;
    CombLock lock = make_comblock(spec);
    BlockMdpEnv env(lock.model, false, true);
    DecoderClass cls = make_decoder_class(lock.model, 7, 0.3, 27);
    MusikResult explore = run_musik_comp(env, cls, 8000, 29);
    PsdpResult plan = run_psdp(explore.covers, cls, env, 8000, 31);
    EvalResult mc = evaluate_policy_return_mc(env, CoverPolicy{plan.policy}, 50, 33);
    CHECK(mc.value == doctest::Approx(1.0));
    EvalResult exact = evaluate_policy_return(lock.model, CoverPolicy{plan.policy});
    CHECK(exact.value == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("evaluate_policy_return: exact comblock optimum and zero-reward model") {
    CombLockSpec spec;
    spec.horizon = 3;
    spec.seed = 35;
    CombLock lock = make_comblock(spec);
    MarkovPolicy optimal = value_iteration(lock.model).policy;
    CHECK(evaluate_policy_return(lock.model, CoverPolicy{optimal}).value ==
          doctest::Approx(1.0).epsilon(1e-12));

    BlockMdp zero = rewarded_model(37);
    for (auto& row : zero.reward)
        for (auto& v : row) v = 0.0;
    CHECK(evaluate_policy_return(zero, CoverPolicy{constant_policy(zero, 0)}).value ==
          doctest::Approx(0.0));
}

TEST_CASE("exact and Monte-Carlo evaluation agree within the interval") {
    BlockMdp m = rewarded_model(39, 3, 3, 2);
    BlockMdpEnv env(m);
    RngStream rng(41, "pol", 0);
    MarkovPolicy pol = to_obs_level(m, random_policy(m, rng));
    double exact = evaluate_policy_return(m, CoverPolicy{pol}).value;
    EvalResult mc = evaluate_policy_return_mc(env, CoverPolicy{pol}, 1000000, 43);
    CHECK(exact >= mc.ci_lo - 1e-6);
    CHECK(exact <= mc.ci_hi + 1e-6);
}

TEST_CASE("psdp requires a rewarded environment") {
    RandomBmdpSpec spec;
    spec.horizon = 2;
    spec.states_per_layer = 2;
    spec.actions = 2;
    spec.seed = 45;
    BlockMdp m = make_random_bmdp(spec);
    BlockMdpEnv env(m);
    DecoderClass cls = make_decoder_class(m, 0, 0.0, 1);
    CoverSet covers = exact_covers(m);
    CHECK_THROWS_AS(run_psdp(covers, cls, env, 10, 1), std::invalid_argument);
}

TEST_CASE("psdp detects a cover gap") {
    BlockMdp m = rewarded_model(47);
    BlockMdpEnv env(m);
    DecoderClass cls = make_decoder_class(m, 0, 0.0, 1);
    CoverSet covers = exact_covers(m);
    covers.covers[1].members.clear();   // hole at layer 2
    CHECK_THROWS_AS(run_psdp(covers, cls, env, 10, 1), std::invalid_argument);
}

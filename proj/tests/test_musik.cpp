#include <doctest.h>

#include <set>
#include <sstream>

#include "bmdp/analysis.hpp"
#include "bmdp/dp.hpp"
#include "bmdp/musik.hpp"
#include "bmdp/occupancy.hpp"
#include "bmdp/serialize.hpp"
#include "test_util.hpp"

using namespace bmdp;
using namespace testutil;

namespace {

BlockMdp musik_model(std::uint64_t seed, int H = 3, int states = 3, int actions = 2) {
    RandomBmdpSpec spec;
    spec.horizon = H;
    spec.states_per_layer = states;
    spec.actions = actions;
    spec.obs_per_state = 2;
    spec.seed = seed;
    return make_random_bmdp(spec);
}

} // namespace

TEST_CASE("collect_ik_dataset: n=0 yields an empty dataset") {
    BlockMdp m = musik_model(1);
    BlockMdpEnv env(m);
    PolicyCover empty;
    IkDataset data = collect_ik_dataset(env, 1, 2, empty, {}, 0, m.total_states(), 3);
    CHECK(data.size() == 0);
}

TEST_CASE("collect_ik_dataset at t=1 draws x_1 from the initial emission marginal") {
    BlockMdp m = musik_model(2);
    BlockMdpEnv env(m);
    PolicyCover empty;
    const long long n = 100000;
    IkDataset data = collect_ik_dataset(env, 1, 2, empty, {}, n, m.total_states(), 5);
    std::map<int, long long> counts;
    for (const auto& rec : data.records) ++counts[rec.x_t.id];
    for (int x : m.obs_at(1)) {
        int s = m.obs_to_state[x];
        double expected = m.initial_dist[s];
        for (std::size_t k = 0; k < m.emissions[s].obs.size(); ++k)
            if (m.emissions[s].obs[k] == x) expected *= m.emissions[s].prob[k];
        double freq = static_cast<double>(counts[x]) / n;
        CHECK(std::abs(freq - expected) <= 4.0 * binom_sigma(expected, n) + 1e-9);
    }
}

TEST_CASE("collect_ik_dataset draws the rollout index uniformly") {
    BlockMdp m = musik_model(3);
    BlockMdpEnv env(m);
    PolicyCover empty;
    const long long n = 100000;
    const int K = m.total_states();
    IkDataset data = collect_ik_dataset(env, 1, 2, empty, {}, n, K, 7);
    std::vector<long long> counts(K, 0);
    for (const auto& rec : data.records) ++counts[rec.index];
    double expected = 1.0 / K;
    for (int i = 0; i < K; ++i) {
        double freq = static_cast<double>(counts[i]) / n;
        CHECK(std::abs(freq - expected) <= 4.0 * binom_sigma(expected, n));
    }
}

TEST_CASE("build_partial_policies with a uniform table plays action 0 and carries index 0") {
    BlockMdp m = musik_model(4);
    auto rule = std::make_shared<IkRule>();
    rule->layer = 1;
    rule->f = ConditionalTable(m.num_actions, m.total_states());
    rule->phi = Decoder::table(m.obs_to_state);
    auto stacks = build_partial_policies(rule, {}, m.total_states());
    REQUIRE(static_cast<int>(stacks.size()) == m.total_states());
    int carried = stacks[2].initial_index;
    int a = stack_step(stacks[2], 1, Obs{m.emissions[0].obs[0], {}}, carried);
    CHECK(a == 0);
    CHECK(carried == 0);
}

TEST_CASE("run_ikdp for h=2 returns one stack per index with a single rule") {
    BlockMdp m = musik_model(5);
    BlockMdpEnv env(m);
    DecoderClass cls = make_decoder_class(m, 3, 0.3, 2);
    CoverSet covers;
    covers.covers.resize(m.horizon);
    for (int h = 1; h <= m.horizon; ++h) covers.covers[h - 1].layer = h;
    RunStats stats;
    PolicyCover cover = run_ikdp(env, covers, cls, 500, 2, 11, &stats);
    CHECK(cover.size() == m.total_states());
    CHECK(stats.chosen_decoders.size() == 1);   // single backward iteration at t=1
    for (const auto& member : cover.members) {
        REQUIRE(member.is_stack());
        CHECK(member.stack().rules.size() == 1);
        CHECK(member.stack().start_layer == 1);
        CHECK(member.stack().end_layer == 1);
    }
}

TEST_CASE("on a deterministic 2-layer model with the true decoder the cover is exact") {
    // near-deterministic transitions so each layer-2 state is reachable w.p. 1
    RandomBmdpSpec spec;
    spec.horizon = 2;
    spec.states_per_layer = 2;
    spec.actions = 2;
    spec.obs_per_state = 1;
    spec.dirichlet_alpha = 0.0001;
    spec.seed = 51;
    BlockMdp m = make_random_bmdp(spec);
    BlockMdpEnv env(m);
    DecoderClass cls = make_decoder_class(m, 0, 0.0, 1);
    MusikConfig cfg;
    cfg.n = 4000;
    MusikResult res = run_musik(env, cls, cfg, 13);
    CoverReport rep = check_cover(m, res.covers.at_layer(2), 0.95, 0.01);
    for (const auto& e : rep.entries) {
        if (e.baseline > 0.99) CHECK(e.achieved > 0.99);
    }
}

TEST_CASE("episode accounting: bmdp variant consumes sum (h-1) * n") {
    BlockMdp m = musik_model(6, 3);
    BlockMdpEnv env(m);
    DecoderClass cls = make_decoder_class(m, 0, 0.0, 1);
    MusikConfig cfg;
    cfg.n = 100;
    MusikResult res = run_musik(env, cls, cfg, 17);
    CHECK(res.stats.episodes == 300);   // (1 + 2) * 100
}

TEST_CASE("episode accounting: tabular variant consumes sum (h-1) * |S_h| * n") {
    BlockMdp m = musik_model(7, 3, 2);
    BlockMdpEnv env(m, /*tabular=*/true);
    MusikResult res = run_musik_tab(env, 10, 19);
    CHECK(res.stats.episodes == 60);   // (1*2 + 2*2) * 10
}

TEST_CASE("episode accounting: composable variant consumes (H-1) * n") {
    CombLockSpec spec;
    spec.horizon = 5;
    spec.seed = 23;
    CombLock lock = make_comblock(spec);
    BlockMdpEnv env(lock.model, false, true);
    DecoderClass cls = make_decoder_class(lock.model, 3, 0.3, 4);
    MusikResult res = run_musik_comp(env, cls, 1000, 29);
    CHECK(res.stats.episodes == 4000);
}

TEST_CASE("stack storage: a layer-h cover shares exactly h-1 rule pairs") {
    BlockMdp m = musik_model(8, 4);
    BlockMdpEnv env(m);
    DecoderClass cls = make_decoder_class(m, 2, 0.3, 5);
    MusikConfig cfg;
    cfg.n = 300;
    MusikResult res = run_musik(env, cls, cfg, 31);
    for (int h = 2; h <= 4; ++h) {
        const PolicyCover& cover = res.covers.at_layer(h);
        std::set<const IkRule*> distinct;
        for (const auto& member : cover.members) {
            REQUIRE(member.is_stack());
            CHECK(static_cast<int>(member.stack().rules.size()) == h - 1);
            for (const auto& r : member.stack().rules) distinct.insert(r.get());
        }
        CHECK(static_cast<int>(distinct.size()) == h - 1);
    }
}

TEST_CASE("cover members only emit environment actions") {
    BlockMdp m = musik_model(9, 3);
    BlockMdpEnv env(m);
    DecoderClass cls = make_decoder_class(m, 2, 0.3, 6);
    MusikConfig cfg;
    cfg.n = 200;
    MusikResult res = run_musik(env, cls, cfg, 37);
    for (int h = 2; h <= 3; ++h) {
        for (const auto& member : res.covers.at_layer(h).members) {
            for (int e = 0; e < 20; ++e) {
                RngStream rng(41, "probe", e);
                Obs x = env.reset(rng);
                Trajectory traj = execute_stack(member.stack(), env, x, rng);
                for (const auto& step : traj.steps)
                    if (step.action >= 0) CHECK(step.action < m.num_actions);
            }
        }
    }
}

TEST_CASE("identical seeds produce identical cover sets") {
    BlockMdp m = musik_model(10, 3);
    DecoderClass cls = make_decoder_class(m, 4, 0.3, 7);
    MusikConfig cfg;
    cfg.n = 400;
    std::string bytes[2];
    for (int rep = 0; rep < 2; ++rep) {
        BlockMdpEnv env(m);
        MusikResult res = run_musik(env, cls, cfg, 43);
        std::stringstream buf;
        save_covers(res.covers, buf);
        bytes[rep] = buf.str();
    }
    CHECK(bytes[0] == bytes[1]);
}

TEST_CASE("with the true decoder the layer-2 cover approaches max reach") {
    BlockMdp m = musik_model(11, 2, 3, 3);
    BlockMdpEnv env(m);
    DecoderClass cls = make_decoder_class(m, 0, 0.0, 1);
    MusikConfig cfg;
    cfg.n = 60000;
    MusikResult res = run_musik(env, cls, cfg, 47);
    const PolicyCover& cover = res.covers.at_layer(2);
    for (int s : m.states_at(2)) {
        double best = 0.0;
        for (const auto& member : cover.members)
            best = std::max(best, member_occupancy(m, member, 2).at(m, s));
        double opt = max_reach_probability(m, s).probability;
        CHECK(best >= opt - 0.05);
    }
}

TEST_CASE("tabular variant on a single-state chain is trivially optimal") {
    BlockMdp m = chain_model(3);
    BlockMdpEnv env(m, /*tabular=*/true);
    MusikResult res = run_musik_tab(env, 20, 53);
    CHECK(res.covers.at_layer(3).size() == 1);
    CHECK(member_occupancy(m, res.covers.at_layer(3).members[0], 3).at(m, 2) ==
          doctest::Approx(1.0));
}

TEST_CASE("tabular variant requires a tabular environment") {
    BlockMdp m = musik_model(12);
    BlockMdpEnv env(m, /*tabular=*/false);
    CHECK_THROWS_AS(run_musik_tab(env, 10, 1), std::invalid_argument);
}

TEST_CASE("composable variant requires the composability flag") {
    BlockMdp m = musik_model(13);
    BlockMdpEnv env(m, false, false);
    DecoderClass cls = make_decoder_class(m, 0, 0.0, 1);
    CHECK_THROWS_AS(run_musik_comp(env, cls, 10, 1), std::invalid_argument);
}

TEST_CASE("composable variant on comblock reaches both good final states") {
    CombLockSpec spec;
    spec.horizon = 5;
    spec.seed = 59;
    CombLock lock = make_comblock(spec);
    BlockMdpEnv env(lock.model, false, true);
    DecoderClass cls = make_decoder_class(lock.model, 7, 0.3, 8);
    MusikResult res = run_musik_comp(env, cls, 6000, 61);
    for (int j = 0; j < 2; ++j) {
        int target = lock.good_state(5, j);
        double best = 0.0;
        for (const auto& member : res.covers.at_layer(5).members)
            best = std::max(best, member_occupancy(lock.model, member, 5).at(lock.model, target));
        CHECK(best >= 0.5 - 1e-9);
    }
}

TEST_CASE("composable variant at H=2 is one-step inverse kinematics") {
    BlockMdp m = musik_model(14, 2, 2, 2);
    BlockMdpEnv env(m, false, true);
    DecoderClass cls = make_decoder_class(m, 0, 0.0, 1);
    MusikResult res = run_musik_comp(env, cls, 2000, 67);
    CHECK(res.stats.episodes == 2000);
    const PolicyCover& cover = res.covers.at_layer(2);
    CHECK(cover.size() == 2);
    for (const auto& member : cover.members) {
        REQUIRE(member.is_stack());
        CHECK(member.stack().start_layer == 1);
        CHECK(member.stack().end_layer == 1);
    }
}

TEST_CASE("gaussian comblock: composable covers verified statistically") {
    CombLockSpec spec;
    spec.horizon = 3;
    spec.noise = CombLockNoise::Gaussian;
    spec.seed = 71;
    CombLock lock = make_comblock(spec);
    NoisyCombLockEnv env(lock);
    DecoderClass cls = make_comblock_linear_decoders(lock, 7, 0.5, 73);
    MusikResult res = run_musik_comp(env, cls, 5000, 79);
    CHECK(res.stats.episodes == 2 * 5000);

    // latent baselines are the lock's: each good state 1/2, the bad state 1
    std::vector<double> baselines = {0.5, 0.5, 1.0};
    McCoverReport rep =
        check_cover_mc(env, res.covers.at_layer(3), 0.25, 0.05, baselines, 4000, 81);
    CHECK(rep.statistical);
    CHECK(rep.report.all_pass);
}

TEST_CASE("recommended_n: doubling eps divides the bound by about four") {
    long long n1 = recommended_n(3, 2, 4, 32, 0.1, 0.1, 1e-9);
    long long n2 = recommended_n(3, 2, 4, 32, 0.2, 0.1, 1e-9);
    CHECK(n2 <= n1 / 3);   // 1/eps^2 scaling up to the log factor
    CHECK(n2 >= n1 / 7);
}

TEST_CASE("recommended_n: zero constant floors at one") {
    CHECK(recommended_n(3, 2, 4, 32, 0.1, 0.1, 0.0) == 1);
}

TEST_CASE("recommended_n: frozen regression values") {
    long long n = recommended_n(3, 2, 4, 32, 0.1, 0.1, 1e-9);
    CHECK(n > 0);
    CHECK(n == 97);
    long long monotone = recommended_n(3, 2, 4, 32, 0.05, 0.1, 1e-9);
    CHECK(monotone > n);
    long long tab = recommended_n(3, 2, 4, 32, 0.1, 0.1, 1e-9, MusikConfig::Variant::Tabular);
    CHECK(tab == 1);   // the small empirical constant floors the tabular bound
}

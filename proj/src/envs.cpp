#include "bmdp/envs.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "bmdp/dp.hpp"
#include "bmdp/serialize.hpp"

namespace bmdp {

namespace {

// Sylvester Hadamard matrix (entries +-1), dim a power of two:
// H[r][c] = (-1)^{popcount(r & c)}.
std::vector<std::vector<double>> hadamard(int dim) {
    std::vector<std::vector<double>> h(dim, std::vector<double>(dim, 1.0));
    for (int r = 0; r < dim; ++r)
        for (int c = 0; c < dim; ++c)
            h[r][c] = (__builtin_popcount(static_cast<unsigned>(r & c)) % 2 == 0) ? 1.0 : -1.0;
    return h;
}

std::vector<double> dirichlet(RngStream& rng, int dim, double alpha) {
    // Gamma(alpha) draws via Marsaglia-Tsang (with the alpha<1 boost).
    auto gamma_draw = [&](double a) {
        double boost = 1.0;
        if (a < 1.0) {
            boost = std::pow(rng.uniform01(), 1.0 / a);
            a += 1.0;
        }
        double d = a - 1.0 / 3.0;
        double c = 1.0 / std::sqrt(9.0 * d);
        for (;;) {
            double x = rng.normal(0.0, 1.0);
            double v = 1.0 + c * x;
            if (v <= 0) continue;
            v = v * v * v;
            double u = rng.uniform01();
            if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v;
            if (u > 0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return boost * d * v;
        }
    };
    std::vector<double> out(dim);
    double total = 0.0;
    for (auto& v : out) {
        v = gamma_draw(alpha);
        total += v;
    }
    if (total <= 0.0) {
        out.assign(dim, 1.0 / dim);
        return out;
    }
    for (auto& v : out) v /= total;
    return out;
}

} // namespace

int CombLockSpec::obs_dim() const {
    int need = horizon + states_per_layer + 1;
    int d = 1;
    while (d < need) d *= 2;
    return d;
}

CombLock make_comblock(const CombLockSpec& spec) {
    if (spec.horizon < 2 || spec.actions < 2)
        throw std::invalid_argument("make_comblock: need H >= 2 and A >= 2");
    if (spec.states_per_layer != 3)
        throw std::invalid_argument("make_comblock: the lock uses 3 states per layer");

    CombLock lock;
    lock.spec = spec;
    BlockMdp& m = lock.model;
    const int H = spec.horizon;
    const int A = spec.actions;
    const int N = 3;

    m.horizon = H;
    m.states_per_layer.assign(H, N);
    m.num_actions = A;
    m.initial_dist = {0.5, 0.5, 0.0};

    RngStream rng(spec.seed, "comblock-good-actions", 0);
    lock.good_action.resize(2 * H);
    for (int h = 1; h <= H; ++h)
        for (int j = 0; j < 2; ++j) lock.good_action[2 * (h - 1) + j] = rng.uniform_int(A);

    const int S = m.total_states();
    m.transitions.resize(S);
    for (int h = 1; h < H; ++h) {
        for (int j = 0; j < N; ++j) {
            int s = m.layer_offset(h) + j;
            m.transitions[s].assign(A, std::vector<double>(N, 0.0));
            for (int a = 0; a < A; ++a) {
                auto& row = m.transitions[s][a];
                if (j < 2 && a == lock.good_action_at(h, j)) {
                    row[0] = 0.5;
                    row[1] = 0.5;
                } else {
                    row[2] = 1.0;   // bad state absorbs
                }
            }
        }
    }

    m.has_reward = true;
    m.reward.assign(S, std::vector<double>(A, 0.0));
    for (int h = 1; h <= H; ++h) {
        for (int j = 0; j < 2; ++j) {
            int s = m.layer_offset(h) + j;
            int good = lock.good_action_at(h, j);
            for (int a = 0; a < A; ++a) {
                if (h == H)
                    m.reward[s][a] = (a == good) ? 1.0 : 0.0;
                else
                    m.reward[s][a] = (a == good) ? 0.0 : 0.1;
            }
        }
    }

    // One observation per state; the Hadamard-transformed one-hot is attached.
    m.obs_to_state.resize(S);
    m.obs_layer.resize(S);
    m.emissions.resize(S);
    const int d = spec.obs_dim();
    auto had = hadamard(d);
    m.obs_vectors.assign(S, {});
    for (int s = 0; s < S; ++s) {
        m.obs_to_state[s] = s;
        int h = m.layer_of_state(s);
        m.obs_layer[s] = h;
        m.emissions[s].obs = {s};
        m.emissions[s].prob = {1.0};
        std::vector<double> v(d, 0.0);
        v[s - m.layer_offset(h)] = 1.0;
        v[N + (h - 1)] = 1.0;
        std::vector<double> x(d, 0.0);
        for (int r = 0; r < d; ++r)
            for (int c = 0; c < d; ++c) x[r] += had[r][c] * v[c];
        m.obs_vectors[s] = std::move(x);
    }
    return lock;
}

NoisyCombLockEnv::NoisyCombLockEnv(const CombLock& lock) : lock_(&lock) {
    if (lock.spec.noise != CombLockNoise::Gaussian)
        throw std::invalid_argument("NoisyCombLockEnv: spec is not gaussian");
}

std::vector<double> NoisyCombLockEnv::observe(int state, RngStream& rng) const {
    const BlockMdp& m = lock_->model;
    const int d = lock_->spec.obs_dim();
    const int N = lock_->spec.states_per_layer;
    int h = m.layer_of_state(state);
    auto had = hadamard(d);
    std::vector<double> v(d, 0.0);
    v[state - m.layer_offset(h)] = 1.0;
    v[N + (h - 1)] = 1.0;
    v[N + m.horizon] = rng.normal(0.0, lock_->spec.noise_stddev);
    std::vector<double> x(d, 0.0);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) x[r] += had[r][c] * v[c];
    return x;
}

Obs NoisyCombLockEnv::reset(RngStream& rng) {
    ++episodes_;
    layer_ = 1;
    const BlockMdp& m = lock_->model;
    state_ = m.layer_offset(1) + rng.categorical(m.initial_dist);
    return Obs{-1, observe(state_, rng)};
}

Env::StepResult NoisyCombLockEnv::step(int action, RngStream& rng) {
    const BlockMdp& m = lock_->model;
    StepResult res;
    res.reward = m.reward_at(state_, action);
    if (layer_ == m.horizon) {
        res.done = true;
        return res;
    }
    const auto& row = m.transitions[state_][action];
    state_ = m.layer_offset(layer_ + 1) + rng.categorical(row);
    ++layer_;
    res.obs = Obs{-1, observe(state_, rng)};
    return res;
}

DecoderClass make_comblock_linear_decoders(const CombLock& lock, int n_decoys,
                                           double perturbation, std::uint64_t seed) {
    const int d = lock.spec.obs_dim();
    const int N = lock.spec.states_per_layer;
    auto had = hadamard(d);
    std::vector<int> offsets(lock.model.horizon);
    for (int h = 1; h <= lock.model.horizon; ++h) offsets[h - 1] = lock.model.layer_offset(h);

    // True map: rows of H/d recover the one-hot coordinates of the state.
    std::vector<std::vector<double>> w_true(N, std::vector<double>(d));
    for (int i = 0; i < N; ++i)
        for (int c = 0; c < d; ++c) w_true[i][c] = had[i][c] / d;

    DecoderClass cls;
    std::vector<Decoder> pool;
    pool.push_back(Decoder::linear(w_true, offsets));
    RngStream rng(seed, "comblock-linear-decoys", 0);
    for (int k = 0; k < n_decoys; ++k) {
        auto w = w_true;
        for (auto& row : w)
            for (auto& v : row) v += rng.normal(0.0, perturbation / d);
        pool.push_back(Decoder::linear(std::move(w), offsets));
    }
    std::vector<int> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_int(i + 1)]);
    for (std::size_t i = 0; i < order.size(); ++i) {
        cls.decoders.push_back(std::move(pool[order[i]]));
        if (order[i] == 0) cls.true_index = static_cast<int>(i);
    }
    return cls;
}

BlockMdp make_random_bmdp(const RandomBmdpSpec& spec) {
    if (spec.horizon < 1 || spec.states_per_layer < 1 || spec.actions < 1 ||
        spec.obs_per_state < 1)
        throw std::invalid_argument("make_random_bmdp: all counts must be >= 1");

    BlockMdp m;
    m.horizon = spec.horizon;
    m.states_per_layer.assign(spec.horizon, spec.states_per_layer);
    m.num_actions = spec.actions;

    RngStream rng(spec.seed, "random-bmdp", 0);
    m.initial_dist = dirichlet(rng, spec.states_per_layer, spec.dirichlet_alpha);

    const int S = m.total_states();
    m.transitions.resize(S);
    for (int s = 0; s < S; ++s) {
        if (m.layer_of_state(s) == m.horizon) continue;
        m.transitions[s].resize(m.num_actions);
        for (int a = 0; a < m.num_actions; ++a)
            m.transitions[s][a] = dirichlet(rng, spec.states_per_layer, spec.dirichlet_alpha);
    }

    m.emissions.resize(S);
    int next_obs = 0;
    for (int s = 0; s < S; ++s) {
        auto& e = m.emissions[s];
        e.obs.resize(spec.obs_per_state);
        std::iota(e.obs.begin(), e.obs.end(), next_obs);
        next_obs += spec.obs_per_state;
        e.prob = dirichlet(rng, spec.obs_per_state, spec.dirichlet_alpha);
    }
    m.obs_to_state.resize(next_obs);
    m.obs_layer.resize(next_obs);
    for (int s = 0; s < S; ++s)
        for (int x : m.emissions[s].obs) {
            m.obs_to_state[x] = s;
            m.obs_layer[x] = m.layer_of_state(s);
        }

    if (spec.with_reward) {
        m.has_reward = true;
        m.reward.assign(S, std::vector<double>(m.num_actions, 0.0));
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < m.num_actions; ++a) m.reward[s][a] = rng.uniform01();
    }

    if (spec.plant_eps) {
        int layer = spec.plant_layer > 0 ? spec.plant_layer : m.horizon;
        if (layer < 2 || layer > m.horizon)
            throw std::invalid_argument("make_random_bmdp: plant layer must be in [2, H]");
        if (spec.states_per_layer < 2)
            throw std::invalid_argument("make_random_bmdp: infeasible plant request (single-state layer)");
        int target_local = spec.states_per_layer - 1;
        int target = m.layer_offset(layer) + target_local;
        double cap = *spec.plant_eps / 2.0;
        for (int round = 0; round < 60; ++round) {
            for (int s : m.states_at(layer - 1)) {
                for (int a = 0; a < m.num_actions; ++a) {
                    auto& row = m.transitions[s][a];
                    if (row[target_local] <= cap) continue;
                    double excess = row[target_local] - cap;
                    double rest = 1.0 - row[target_local];
                    row[target_local] = cap;
                    if (rest <= 0.0) {
                        // All mass pointed at the planted state; spread evenly.
                        double share = excess / (spec.states_per_layer - 1);
                        for (int t = 0; t < spec.states_per_layer; ++t)
                            if (t != target_local) row[t] += share;
                    } else {
                        for (int t = 0; t < spec.states_per_layer; ++t)
                            if (t != target_local) row[t] += excess * (row[t] / rest);
                    }
                }
            }
            if (max_reach_probability(m, target).probability < *spec.plant_eps) break;
            cap /= 2.0;
        }
        if (max_reach_probability(m, target).probability >= *spec.plant_eps)
            throw std::invalid_argument("make_random_bmdp: infeasible plant request");
    }
    return m;
}

int planted_state(const BlockMdp& m, const RandomBmdpSpec& spec) {
    int layer = spec.plant_layer > 0 ? spec.plant_layer : m.horizon;
    return m.layer_offset(layer) + spec.states_per_layer - 1;
}

DecoderClass make_decoder_class(const BlockMdp& m, int n_decoys, double corruption_rate,
                                std::uint64_t seed) {
    if (n_decoys < 0) throw std::invalid_argument("make_decoder_class: n_decoys >= 0");
    if (corruption_rate < 0.0 || corruption_rate > 1.0)
        throw std::invalid_argument("make_decoder_class: corruption_rate in [0,1]");

    RngStream rng(seed, "decoder-class", 0);
    std::vector<Decoder> pool;
    pool.push_back(Decoder::table(m.obs_to_state));

    // Observations whose layer holds at least two states can be re-mapped.
    std::vector<int> corruptible;
    for (int x = 0; x < m.total_obs(); ++x)
        if (m.states_per_layer[m.obs_layer[x] - 1] >= 2) corruptible.push_back(x);

    int n_corrupt = 0;
    if (corruption_rate > 0.0 && !corruptible.empty())
        n_corrupt = std::max<int>(1, std::lround(corruption_rate * corruptible.size()));

    for (int k = 0; k < n_decoys; ++k) {
        auto map = m.obs_to_state;
        auto picks = corruptible;
        for (int i = static_cast<int>(picks.size()) - 1; i > 0; --i)
            std::swap(picks[i], picks[rng.uniform_int(i + 1)]);
        for (int i = 0; i < n_corrupt && i < static_cast<int>(picks.size()); ++i) {
            int x = picks[i];
            int layer = m.obs_layer[x];
            int offset = m.layer_offset(layer);
            int n = m.states_per_layer[layer - 1];
            int cur = map[x] - offset;
            int repl = rng.uniform_int(n - 1);
            if (repl >= cur) ++repl;   // uniform over the other states of the layer
            map[x] = offset + repl;
        }
        pool.push_back(Decoder::table(std::move(map)));
    }

    std::vector<int> order(pool.size());
    std::iota(order.begin(), order.end(), 0);
    for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
        std::swap(order[i], order[rng.uniform_int(i + 1)]);

    DecoderClass cls;
    for (std::size_t i = 0; i < order.size(); ++i) {
        cls.decoders.push_back(std::move(pool[order[i]]));
        if (order[i] == 0) cls.true_index = static_cast<int>(i);
    }
    return cls;
}

// ---------------------------------------------------------------------------
// Presets
// ---------------------------------------------------------------------------

namespace {

std::map<std::string, std::string> parse_kv_list(const std::string& text) {
    std::map<std::string, std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        auto eq = item.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("preset: expected key=value, got '" + item + "'");
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

RandomBmdpSpec load_random_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open env config " + path);
    RandomBmdpSpec spec;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key = value");
        auto trim = [](std::string s) {
            auto b = s.find_first_not_of(" \t\r");
            auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        if (key == "H") spec.horizon = std::stoi(val);
        else if (key == "states") spec.states_per_layer = std::stoi(val);
        else if (key == "actions") spec.actions = std::stoi(val);
        else if (key == "obs-per-state") spec.obs_per_state = std::stoi(val);
        else if (key == "alpha") spec.dirichlet_alpha = std::stod(val);
        else if (key == "seed") spec.seed = std::stoull(val);
        else if (key == "reward") spec.with_reward = (val == "random");
        else if (key == "plant-eps") spec.plant_eps = std::stod(val);
        else if (key == "plant-layer") spec.plant_layer = std::stoi(val);
        else throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    return spec;
}

} // namespace

EnvHandle make_env_from_preset(const std::string& preset, std::uint64_t seed, bool tabular) {
    EnvHandle handle;
    handle.preset = preset;
    auto colon = preset.find(':');
    std::string kind = colon == std::string::npos ? preset : preset.substr(0, colon);
    std::string rest = colon == std::string::npos ? "" : preset.substr(colon + 1);

    if (kind == "comblock") {
        auto kv = parse_kv_list(rest);
        CombLockSpec spec;
        spec.seed = seed;
        for (const auto& [k, v] : kv) {
            if (k == "H") spec.horizon = std::stoi(v);
            else if (k == "A") spec.actions = std::stoi(v);
            else if (k == "N") spec.states_per_layer = std::stoi(v);
            else if (k == "seed") spec.seed = std::stoull(v);
            else if (k == "noise") {
                if (v == "none" || v == "noiseless") spec.noise = CombLockNoise::Noiseless;
                else if (v == "gaussian") spec.noise = CombLockNoise::Gaussian;
                else throw std::invalid_argument("preset: unknown noise mode '" + v + "'");
            } else {
                throw std::invalid_argument("preset: unknown comblock key '" + k + "'");
            }
        }
        handle.is_comblock = true;
        handle.lock = std::make_unique<CombLock>(make_comblock(spec));
        if (spec.noise == CombLockNoise::Gaussian && !tabular) {
            handle.env = std::make_unique<NoisyCombLockEnv>(*handle.lock);
        } else {
            handle.env = std::make_unique<BlockMdpEnv>(handle.lock->model, tabular, true);
        }
        return handle;
    }
    if (kind == "random") {
        RandomBmdpSpec spec = load_random_spec(rest);
        if (seed != 0) spec.seed = seed;
        handle.owned_model = std::make_unique<BlockMdp>(make_random_bmdp(spec));
        handle.env = std::make_unique<BlockMdpEnv>(*handle.owned_model, tabular, false);
        return handle;
    }
    if (kind == "model") {
        handle.owned_model = std::make_unique<BlockMdp>(load_model(rest));
        handle.env = std::make_unique<BlockMdpEnv>(*handle.owned_model, tabular, false);
        return handle;
    }
    throw std::invalid_argument("unknown environment preset '" + preset + "'");
}

} // namespace bmdp

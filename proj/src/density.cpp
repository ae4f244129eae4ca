#include "bmdp/density.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

namespace bmdp {

namespace {

struct CountTable {
    std::map<std::pair<int, int>, std::vector<double>> cells;

    void add(int z, int zp, int entry, int arity) {
        auto& row = cells[{z, zp}];
        if (row.empty()) row.assign(arity, 0.0);
        row[entry] += 1.0;
    }

    // sum over cells of c * ln(c / total), with 0 ln 0 = 0
    double loglik() const {
        double total = 0.0;
        for (const auto& [key, row] : cells) {
            double cell_total = 0.0;
            for (double c : row) cell_total += c;
            if (cell_total <= 0.0) continue;
            for (double c : row)
                if (c > 0.0) total += c * std::log(c / cell_total);
        }
        return total;
    }

    ConditionalTable to_table(int num_actions, int num_indices) const {
        ConditionalTable table(num_actions, num_indices);
        for (const auto& [key, row] : cells) {
            double cell_total = 0.0;
            for (double c : row) cell_total += c;
            std::vector<double> probs(row.size());
            for (std::size_t i = 0; i < row.size(); ++i) probs[i] = row[i] / cell_total;
            table.set_row(key.first, key.second, std::move(probs));
        }
        return table;
    }
};

} // namespace

MleFit fit_mle(const IkDataset& data, const DecoderClass& decoders, int num_actions) {
    if (data.records.empty()) throw std::invalid_argument("fit_mle: empty dataset");
    if (decoders.size() == 0) throw std::invalid_argument("fit_mle: empty decoder class");
    const int K = data.num_indices;
    const int arity = num_actions * K;

    MleFit fit;
    fit.logliks.resize(decoders.size());
    int best = -1;
    CountTable best_counts;
    for (int d = 0; d < decoders.size(); ++d) {
        const Decoder& phi = decoders[d];
        CountTable counts;
        for (const auto& rec : data.records) {
            int z = phi.decode(data.t, rec.x_t);
            int zp = phi.decode(data.h, rec.x_h);
            counts.add(z, zp, rec.action * K + rec.index, arity);
        }
        fit.logliks[d] = counts.loglik();
        if (best < 0 || fit.logliks[d] > fit.logliks[best]) {
            best = d;
            best_counts = std::move(counts);
        }
    }
    fit.decoder_index = best;
    fit.table = best_counts.to_table(num_actions, K);
    return fit;
}

ConditionalTable fit_mle_tabular(const IkDataset& data, int num_actions) {
    if (data.records.empty()) throw std::invalid_argument("fit_mle_tabular: empty dataset");
    CountTable counts;
    for (const auto& rec : data.records)
        counts.add(rec.x_t.id, rec.x_h.id, rec.action, num_actions);
    return counts.to_table(num_actions, 1);
}

// ---------------------------------------------------------------------------
// Exact kinematics
// ---------------------------------------------------------------------------

int KinematicsTable::st_local(int s_t) const {
    for (std::size_t i = 0; i < layer_t_states.size(); ++i)
        if (layer_t_states[i] == s_t) return static_cast<int>(i);
    throw std::out_of_range("KinematicsTable: state not at layer t");
}

int KinematicsTable::sh_local(int s_h) const {
    for (std::size_t i = 0; i < layer_h_states.size(); ++i)
        if (layer_h_states[i] == s_h) return static_cast<int>(i);
    throw std::out_of_range("KinematicsTable: state not at layer h");
}

double KinematicsTable::at(int k, int st, int a, int sh) const {
    std::size_t nt = layer_t_states.size();
    std::size_t nh = layer_h_states.size();
    return values[((static_cast<std::size_t>(k) * nt + st) * num_actions + a) * nh + sh];
}

double KinematicsTable::fk(int k, int s_t, int a, int s_h) const {
    return at(k, st_local(s_t), a, sh_local(s_h));
}

double KinematicsTable::z_pooled(int s_t, int s_h) const {
    int st = st_local(s_t), sh = sh_local(s_h);
    double z = 0.0;
    for (int k = 0; k < num_indices; ++k)
        for (int a = 0; a < num_actions; ++a) z += at(k, st, a, sh);
    return z;
}

double KinematicsTable::bayes_pooled(int a, int j, int s_t, int s_h) const {
    double z = z_pooled(s_t, s_h);
    if (z <= 0.0) throw std::domain_error("bayes_pooled: undefined cell (Z = 0)");
    return at(j, st_local(s_t), a, sh_local(s_h)) / z;
}

double KinematicsTable::z_single(int k, int s_t, int s_h) const {
    int st = st_local(s_t), sh = sh_local(s_h);
    double z = 0.0;
    for (int a = 0; a < num_actions; ++a) z += at(k, st, a, sh);
    return z;
}

double KinematicsTable::bayes_single(int k, int a, int s_t, int s_h) const {
    double z = z_single(k, s_t, s_h);
    if (z <= 0.0) throw std::domain_error("bayes_single: undefined cell (Z = 0)");
    return at(k, st_local(s_t), a, sh_local(s_h)) / z;
}

KinematicsTable bayes_predictor(const BlockMdp& m, const std::vector<Schedule>& rollouts,
                                int t, int h) {
    if (t < 1 || h <= t || h > m.horizon)
        throw std::invalid_argument("bayes_predictor: bad layer pair");
    KinematicsTable table;
    table.t = t;
    table.h = h;
    table.num_actions = m.num_actions;
    table.num_indices = static_cast<int>(rollouts.size());
    table.layer_t_states = m.states_at(t);
    table.layer_h_states = m.states_at(h);
    const std::size_t nt = table.layer_t_states.size();
    const std::size_t nh = table.layer_h_states.size();
    table.values.assign(rollouts.size() * nt * m.num_actions * nh, 0.0);

    for (std::size_t k = 0; k < rollouts.size(); ++k) {
        for (std::size_t st = 0; st < nt; ++st) {
            int s = table.layer_t_states[st];
            for (int a = 0; a < m.num_actions; ++a) {
                const auto& row = m.transitions[s][a];
                std::vector<double> dist =
                    forward_distribution(m, rollouts[k], t + 1, row, h);
                for (std::size_t sh = 0; sh < nh; ++sh)
                    table.values[((k * nt + st) * m.num_actions + a) * nh + sh] = dist[sh];
            }
        }
    }
    return table;
}

KinematicsTable forward_kinematics(const BlockMdp& m, const Schedule& rollout, int t, int h) {
    return bayes_predictor(m, {rollout}, t, h);
}

double mle_population_error(const ConditionalTable& fhat, const KinematicsTable& oracle,
                            const std::vector<double>& rollin_dist, int rollout_index) {
    const int A = oracle.num_actions;
    const int K = oracle.num_indices;
    if (fhat.num_actions() != A)
        throw std::invalid_argument("mle_population_error: action arity mismatch");
    if (rollout_index < 0 && fhat.num_indices() != K)
        throw std::invalid_argument("mle_population_error: index arity mismatch");
    if (rollout_index >= 0 && (fhat.num_indices() != 1 || rollout_index >= K))
        throw std::invalid_argument("mle_population_error: bad rollout index");
    if (rollin_dist.size() != oracle.layer_t_states.size())
        throw std::invalid_argument("mle_population_error: roll-in distribution arity");

    double err = 0.0;
    for (std::size_t st = 0; st < oracle.layer_t_states.size(); ++st) {
        int s = oracle.layer_t_states[st];
        double ds = rollin_dist[st];
        if (ds == 0.0) continue;
        for (std::size_t sh = 0; sh < oracle.layer_h_states.size(); ++sh) {
            int sp = oracle.layer_h_states[sh];
            if (rollout_index >= 0) {
                double z = oracle.z_single(rollout_index, s, sp);
                if (z <= 0.0) continue;
                double w = ds * z / A;
                double sq = 0.0;
                for (int a = 0; a < A; ++a) {
                    double diff = fhat.prob(s, sp, a, 0) - oracle.bayes_single(rollout_index, a, s, sp);
                    sq += diff * diff;
                }
                err += w * sq;
            } else {
                double z = oracle.z_pooled(s, sp);
                if (z <= 0.0) continue;
                double w = ds * z / (static_cast<double>(A) * K);
                double sq = 0.0;
                for (int a = 0; a < A; ++a)
                    for (int j = 0; j < K; ++j) {
                        double diff = fhat.prob(s, sp, a, j) - oracle.bayes_pooled(a, j, s, sp);
                        sq += diff * diff;
                    }
                err += w * sq;
            }
        }
    }
    return err;
}

} // namespace bmdp

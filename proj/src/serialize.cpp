#include "bmdp/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace bmdp {

namespace {

[[noreturn]] void fail(const std::string& what) {
    throw std::runtime_error("model file: " + what);
}

std::string next_token(std::istream& in) {
    std::string tok;
    while (in >> tok) {
        if (tok[0] == '#') {
            std::string rest;
            std::getline(in, rest);
            continue;
        }
        return tok;
    }
    fail("unexpected end of input");
}

int next_int(std::istream& in) { return std::stoi(next_token(in)); }
double next_double(std::istream& in) { return std::stod(next_token(in)); }

} // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void save_model(const BlockMdp& m, std::ostream& out) {
    out << "bmdp-model v1\n";
    out << "horizon " << m.horizon << "\n";
    out << "layer-states";
    for (int n : m.states_per_layer) out << ' ' << n;
    out << "\nactions " << m.num_actions << "\n";
    out << "initial";
    for (double p : m.initial_dist) out << ' ' << format_double(p);
    out << "\n";
    for (int s = 0; s < m.total_states(); ++s) {
        if (m.layer_of_state(s) == m.horizon) continue;
        for (int a = 0; a < m.num_actions; ++a) {
            out << "transition " << s << ' ' << a;
            for (double p : m.transitions[s][a]) out << ' ' << format_double(p);
            out << "\n";
        }
    }
    for (int s = 0; s < m.total_states(); ++s) {
        const auto& e = m.emissions[s];
        out << "emission " << s << ' ' << e.obs.size();
        for (std::size_t k = 0; k < e.obs.size(); ++k)
            out << ' ' << e.obs[k] << ' ' << format_double(e.prob[k]);
        out << "\n";
    }
    for (int x = 0; x < m.total_obs(); ++x)
        out << "decoder " << x << ' ' << m.obs_to_state[x] << "\n";
    if (m.has_reward) {
        for (int s = 0; s < m.total_states(); ++s)
            for (int a = 0; a < m.num_actions; ++a)
                out << "reward " << s << ' ' << a << ' ' << format_double(m.reward[s][a]) << "\n";
    }
    out << "end\n";
}

void save_model(const BlockMdp& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("cannot open " + path + " for writing");
    save_model(m, out);
}

BlockMdp load_model(std::istream& in) {
    BlockMdp m;
    if (next_token(in) != "bmdp-model" || next_token(in) != "v1") fail("bad header");
    std::map<int, std::vector<double>> decoder_seen;
    for (;;) {
        std::string key = next_token(in);
        if (key == "end") break;
        if (key == "horizon") {
            m.horizon = next_int(in);
        } else if (key == "layer-states") {
            m.states_per_layer.resize(m.horizon);
            for (int h = 0; h < m.horizon; ++h) m.states_per_layer[h] = next_int(in);
            m.transitions.resize(m.total_states());
            m.emissions.resize(m.total_states());
        } else if (key == "actions") {
            m.num_actions = next_int(in);
            for (int s = 0; s < m.total_states(); ++s)
                if (m.layer_of_state(s) < m.horizon)
                    m.transitions[s].assign(m.num_actions, {});
        } else if (key == "initial") {
            m.initial_dist.resize(m.states_per_layer.at(0));
            for (auto& p : m.initial_dist) p = next_double(in);
        } else if (key == "transition") {
            int s = next_int(in);
            int a = next_int(in);
            int h = m.layer_of_state(s);
            std::vector<double> row(m.states_per_layer.at(h));
            for (auto& p : row) p = next_double(in);
            m.transitions.at(s).at(a) = std::move(row);
        } else if (key == "emission") {
            int s = next_int(in);
            int k = next_int(in);
            auto& e = m.emissions.at(s);
            e.obs.resize(k);
            e.prob.resize(k);
            for (int i = 0; i < k; ++i) {
                e.obs[i] = next_int(in);
                e.prob[i] = next_double(in);
            }
        } else if (key == "decoder") {
            int x = next_int(in);
            int s = next_int(in);
            if (static_cast<int>(m.obs_to_state.size()) <= x) {
                m.obs_to_state.resize(x + 1, -1);
                m.obs_layer.resize(x + 1, -1);
            }
            m.obs_to_state[x] = s;
            m.obs_layer[x] = m.layer_of_state(s);
        } else if (key == "reward") {
            if (!m.has_reward) {
                m.has_reward = true;
                m.reward.assign(m.total_states(), std::vector<double>(m.num_actions, 0.0));
            }
            int s = next_int(in);
            int a = next_int(in);
            m.reward.at(s).at(a) = next_double(in);
        } else {
            fail("unknown key '" + key + "'");
        }
    }
    auto rep = validate_model(m);
    if (!rep.ok()) fail("loaded model violates invariants: " + rep.violations.front().kind +
                        " (" + rep.violations.front().detail + ")");
    return m;
}

BlockMdp load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path);
    return load_model(in);
}

// ---------------------------------------------------------------------------
// Cover sets
// ---------------------------------------------------------------------------

void save_covers(const CoverSet& covers, std::ostream& out) {
    // Collect distinct rules across all stacks.
    std::vector<IkRulePtr> rules;
    std::map<const IkRule*, int> rule_id;
    for (const auto& cover : covers.covers) {
        for (const auto& member : cover.members) {
            if (!member.is_stack()) continue;
            for (const auto& r : member.stack().rules) {
                if (rule_id.emplace(r.get(), static_cast<int>(rules.size())).second)
                    rules.push_back(r);
            }
        }
    }
    out << "bmdp-covers v1\n";
    out << "layers " << covers.covers.size() << "\n";
    out << "rules " << rules.size() << "\n";
    for (std::size_t i = 0; i < rules.size(); ++i) {
        const IkRule& r = *rules[i];
        if (!r.phi.is_table())
            throw std::runtime_error("save_covers: only table decoders serialize");
        const auto& map = r.phi.table_map();
        out << "rule " << i << " layer " << r.layer << " actions " << r.f.num_actions()
            << " indices " << r.f.num_indices() << " decoder-index " << r.decoder_index
            << " decoder " << map.size();
        for (int v : map) out << ' ' << v;
        out << " rows " << r.f.rows().size() << "\n";
        for (const auto& [key, row] : r.f.rows()) {
            out << "row " << key.first << ' ' << key.second;
            for (double p : row) out << ' ' << format_double(p);
            out << "\n";
        }
    }
    for (const auto& cover : covers.covers) {
        out << "cover " << cover.layer << ' ' << cover.members.size() << "\n";
        for (const auto& member : cover.members) {
            if (member.is_stack()) {
                const auto& st = member.stack();
                out << "stack " << st.start_layer << ' ' << st.end_layer << ' '
                    << st.initial_index << ' ' << st.rules.size();
                for (const auto& r : st.rules) out << ' ' << rule_id.at(r.get());
                out << "\n";
            } else {
                const auto& p = member.markov();
                out << "markov " << (p.level == MarkovPolicy::Level::State ? "state" : "obs")
                    << ' ' << p.start_layer << ' ' << p.end_layer << ' ' << p.action.size();
                for (int a : p.action) out << ' ' << a;
                out << "\n";
            }
        }
    }
    out << "end\n";
}

void save_covers(const CoverSet& covers, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail("cannot open " + path + " for writing");
    save_covers(covers, out);
}

CoverSet load_covers(std::istream& in) {
    if (next_token(in) != "bmdp-covers" || next_token(in) != "v1") fail("bad covers header");
    if (next_token(in) != "layers") fail("expected 'layers'");
    int layers = next_int(in);
    if (next_token(in) != "rules") fail("expected 'rules'");
    int n_rules = next_int(in);

    std::vector<IkRulePtr> rules(n_rules);
    for (int i = 0; i < n_rules; ++i) {
        if (next_token(in) != "rule") fail("expected 'rule'");
        int idx = next_int(in);
        auto rule = std::make_shared<IkRule>();
        if (next_token(in) != "layer") fail("rule: expected 'layer'");
        rule->layer = next_int(in);
        if (next_token(in) != "actions") fail("rule: expected 'actions'");
        int A = next_int(in);
        if (next_token(in) != "indices") fail("rule: expected 'indices'");
        int K = next_int(in);
        rule->f = ConditionalTable(A, K);
        if (next_token(in) != "decoder-index") fail("rule: expected 'decoder-index'");
        rule->decoder_index = next_int(in);
        if (next_token(in) != "decoder") fail("rule: expected 'decoder'");
        int X = next_int(in);
        std::vector<int> map(X);
        for (auto& v : map) v = next_int(in);
        rule->phi = Decoder::table(std::move(map));
        if (next_token(in) != "rows") fail("rule: expected 'rows'");
        int n_rows = next_int(in);
        for (int r = 0; r < n_rows; ++r) {
            if (next_token(in) != "row") fail("rule: expected 'row'");
            int z = next_int(in);
            int zp = next_int(in);
            std::vector<double> row(static_cast<std::size_t>(A) * K);
            for (auto& p : row) p = next_double(in);
            rule->f.set_row(z, zp, std::move(row));
        }
        rules.at(idx) = std::move(rule);
    }

    CoverSet covers;
    covers.covers.resize(layers);
    for (;;) {
        std::string key = next_token(in);
        if (key == "end") break;
        if (key != "cover") fail("expected 'cover'");
        int layer = next_int(in);
        int count = next_int(in);
        PolicyCover& cover = covers.covers.at(layer - 1);
        cover.layer = layer;
        for (int i = 0; i < count; ++i) {
            std::string kind = next_token(in);
            if (kind == "stack") {
                PartialPolicyStack st;
                st.start_layer = next_int(in);
                st.end_layer = next_int(in);
                st.initial_index = next_int(in);
                int nr = next_int(in);
                for (int k = 0; k < nr; ++k) st.rules.push_back(rules.at(next_int(in)));
                cover.members.push_back({std::move(st)});
            } else if (kind == "markov") {
                MarkovPolicy p;
                std::string lvl = next_token(in);
                p.level = (lvl == "state") ? MarkovPolicy::Level::State
                                           : MarkovPolicy::Level::Observation;
                p.start_layer = next_int(in);
                p.end_layer = next_int(in);
                int len = next_int(in);
                p.action.resize(len);
                for (auto& a : p.action) a = next_int(in);
                cover.members.push_back({std::move(p)});
            } else {
                fail("unknown cover member kind '" + kind + "'");
            }
        }
    }
    for (int h = 1; h <= layers; ++h)
        if (covers.covers[h - 1].layer == 1 && h != 1) covers.covers[h - 1].layer = h;
    return covers;
}

CoverSet load_covers(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open " + path);
    return load_covers(in);
}

} // namespace bmdp

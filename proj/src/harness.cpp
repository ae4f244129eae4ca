#include "bmdp/harness.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "bmdp/analysis.hpp"
#include "bmdp/dp.hpp"
#include "bmdp/envs.hpp"
#include "bmdp/musik.hpp"
#include "bmdp/psdp.hpp"
#include "bmdp/serialize.hpp"

namespace bmdp {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::runtime_error("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

} // namespace

ExperimentConfig parse_config(std::istream& in, const std::string& name) {
    ExperimentConfig cfg;
    cfg.seeds.clear();
    bool seeds_seen = false;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        if (trim(line).empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "env") cfg.env_preset = val;
            else if (key == "algorithm") {
                if (val != "musik" && val != "musik-tab" && val != "musik-comp")
                    throw std::runtime_error("config: unknown algorithm '" + val + "'");
                cfg.algorithm = val;
            } else if (key == "planner") {
                if (val != "none" && val != "psdp")
                    throw std::runtime_error("config: unknown planner '" + val + "'");
                cfg.planner = val;
            } else if (key == "n") cfg.n = (val == "auto") ? 0 : std::stoll(val);
            else if (key == "n-psdp") cfg.n_psdp = std::stoll(val);
            else if (key == "eps") cfg.eps = std::stod(val);
            else if (key == "delta") cfg.delta = std::stod(val);
            else if (key == "theory-c") cfg.theory_c = std::stod(val);
            else if (key == "seeds") {
                seeds_seen = true;
                std::stringstream ss(val);
                std::string item;
                while (std::getline(ss, item, ','))
                    if (!trim(item).empty()) cfg.seeds.push_back(std::stoull(trim(item)));
            } else if (key == "eval") {
                if (val == "exact") {
                    cfg.eval_mode = "exact";
                } else if (val.rfind("mc", 0) == 0) {
                    cfg.eval_mode = "mc";
                    auto colon = val.find(':');
                    if (colon != std::string::npos)
                        cfg.eval_episodes = std::stoll(val.substr(colon + 1));
                } else {
                    throw std::runtime_error("config: eval expects exact | mc:<episodes>");
                }
            } else if (key == "out") cfg.out_dir = val;
            else if (key == "count-eval-episodes") cfg.count_eval_episodes = parse_bool(val, key);
            else if (key == "decoys") cfg.decoys = std::stoi(val);
            else if (key == "corruption") cfg.corruption = std::stod(val);
            else if (key == "timing") cfg.timing = parse_bool(val, key);
            else if (key == "threads") cfg.threads = std::stoi(val);
            else
                throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                         ": unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw std::runtime_error(name + ":" + std::to_string(lineno) +
                                     ": bad value for key '" + key + "'");
        }
    }
    if (!seeds_seen) cfg.seeds = {1, 2, 3, 4, 5};
    if (cfg.seeds.empty())
        throw std::runtime_error(name + ": seeds must be a nonempty list");
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path);
    return parse_config(in, path);
}

void write_config(const ExperimentConfig& cfg, std::ostream& out) {
    out << "env = " << cfg.env_preset << "\n";
    out << "algorithm = " << cfg.algorithm << "\n";
    out << "planner = " << cfg.planner << "\n";
    out << "n = " << (cfg.n == 0 ? std::string("auto") : std::to_string(cfg.n)) << "\n";
    out << "n-psdp = " << cfg.n_psdp << "\n";
    out << "eps = " << format_double(cfg.eps) << "\n";
    out << "delta = " << format_double(cfg.delta) << "\n";
    out << "theory-c = " << format_double(cfg.theory_c) << "\n";
    out << "seeds = ";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
        out << (i ? "," : "") << cfg.seeds[i];
    out << "\n";
    out << "eval = " << (cfg.eval_mode == "exact"
                             ? std::string("exact")
                             : "mc:" + std::to_string(cfg.eval_episodes)) << "\n";
    out << "out = " << cfg.out_dir << "\n";
    out << "count-eval-episodes = " << (cfg.count_eval_episodes ? "true" : "false") << "\n";
    out << "decoys = " << cfg.decoys << "\n";
    out << "corruption = " << format_double(cfg.corruption) << "\n";
    out << "timing = " << (cfg.timing ? "true" : "false") << "\n";
    out << "threads = " << cfg.threads << "\n";
}

void emit_default_config(std::ostream& out) {
    out << "# experiment configuration (key = value; '#' starts a comment)\n";
    out << "# env: comblock:H=<n>[,A=<n>][,noise=none|gaussian]  or  random:<path>  or  model:<path>\n";
    out << "# algorithm: musik | musik-tab | musik-comp\n";
    out << "# planner: none | psdp\n";
    out << "# n: samples per regression, or 'auto' for the theory-driven heuristic\n";
    out << "# eval: exact | mc:<episodes>\n";
    out << "# timing: false makes the wall_ms column deterministic (always 0)\n";
    write_config(ExperimentConfig{}, out);
}

namespace {

struct SeedOutcome {
    ExperimentRow row;
    CoverSet covers;
    bool covers_serializable = false;
    std::unique_ptr<BlockMdp> model_copy;   // exact model, for the verify flow
};

SeedOutcome run_one_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
    auto start = std::chrono::steady_clock::now();
    SeedOutcome out;
    ExperimentRow& row = out.row;
    row.seed = seed;
    row.env = cfg.env_preset;
    row.algorithm = cfg.algorithm;

    bool tabular = cfg.algorithm == "musik-tab";
    EnvHandle handle = make_env_from_preset(cfg.env_preset, seed, tabular);
    Env& env = *handle.env;
    row.horizon = env.horizon();

    const BlockMdp* model = env.exact_model();

    DecoderClass decoders;
    if (model != nullptr) {
        decoders = make_decoder_class(*model, cfg.decoys, cfg.corruption,
                                      hash_label("decoder-class") ^ seed);
    } else if (handle.lock) {
        decoders = make_comblock_linear_decoders(*handle.lock, cfg.decoys, cfg.corruption,
                                                 hash_label("decoder-class") ^ seed);
    }

    MusikConfig mcfg;
    mcfg.eps = cfg.eps;
    mcfg.delta = cfg.delta;
    mcfg.theory_c = cfg.theory_c;
    mcfg.variant = cfg.algorithm == "musik-tab"
                       ? MusikConfig::Variant::Tabular
                       : (cfg.algorithm == "musik-comp" ? MusikConfig::Variant::Composable
                                                        : MusikConfig::Variant::Bmdp);
    long long n = cfg.n;
    if (n == 0)
        n = recommended_n(env.state_count(), env.action_count(), env.horizon(),
                          std::max(1, decoders.size()), cfg.eps, cfg.delta, cfg.theory_c,
                          mcfg.variant);
    mcfg.n = n;
    row.n = n;

    MusikResult explore;
    if (cfg.algorithm == "musik-tab") explore = run_musik_tab(env, n, seed);
    else if (cfg.algorithm == "musik-comp") explore = run_musik_comp(env, decoders, n, seed);
    else explore = run_musik(env, decoders, mcfg, seed);
    out.covers = std::move(explore.covers);
    out.covers_serializable = model != nullptr;
    if (model != nullptr) out.model_copy = std::make_unique<BlockMdp>(*model);
    row.episodes_used = explore.stats.episodes;

    if (model != nullptr) {
        long long pass = 0, total = 0;
        for (int h = 2; h <= env.horizon(); ++h) {
            CoverReport rep = check_cover(*model, out.covers.at_layer(h), 0.25, cfg.eps);
            for (const auto& e : rep.entries) {
                ++total;
                if (e.pass) ++pass;
            }
        }
        row.cover_pass_fraction = total == 0 ? 1.0 : static_cast<double>(pass) / total;
    }

    if (cfg.planner == "psdp") {
        if (!env.rewarded())
            throw std::runtime_error("planner = psdp requires a rewarded environment");
        PsdpResult plan = run_psdp(out.covers, decoders, env, cfg.n_psdp, seed);
        row.episodes_used += plan.stats.episodes;
        CoverPolicy learned{plan.policy};

        if (cfg.eval_mode == "exact") {
            if (model == nullptr)
                throw std::runtime_error("eval = exact requires an exact model");
            row.final_return = evaluate_policy_return(*model, learned).value;
        } else {
            long long before = env.episodes_started();
            row.final_return =
                evaluate_policy_return_mc(env, learned, cfg.eval_episodes, seed).value;
            if (cfg.count_eval_episodes) row.episodes_used += env.episodes_started() - before;
        }

        if (handle.is_comblock) {
            // optimality rule: mean return over 50 fresh episodes equals 1
            long long before = env.episodes_started();
            double mean = evaluate_policy_return_mc(env, learned, 50,
                                                    seed ^ hash_label("optimal-check")).value;
            if (cfg.count_eval_episodes) row.episodes_used += env.episodes_started() - before;
            row.optimal_found = (mean == 1.0) ? 1 : 0;
        } else if (model != nullptr && model->has_reward) {
            double opt = value_iteration(*model).value;
            double got = evaluate_policy_return(*model, learned).value;
            row.optimal_found = (got >= opt - 0.05) ? 1 : 0;
        }
    }

    row.wall_ms = cfg.timing
                      ? std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - start).count()
                      : 0.0;
    return out;
}

std::string csv_double(double v) {
    // fixed short form keeps the CSV readable; full precision is not needed here
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    if (cfg.seeds.empty()) throw std::runtime_error("run_experiment: empty seed list");
    std::filesystem::create_directories(cfg.out_dir);

    std::vector<SeedOutcome> outcomes(cfg.seeds.size());
    int threads = std::max(1, cfg.threads);
    if (threads == 1) {
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
            outcomes[i] = run_one_seed(cfg, cfg.seeds[i]);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (int w = 0; w < threads; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (;;) {
                        std::size_t i = next.fetch_add(1);
                        if (i >= cfg.seeds.size()) break;
                        outcomes[i] = run_one_seed(cfg, cfg.seeds[i]);
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& err : errors)
            if (err) std::rethrow_exception(err);
    }

    ExperimentResult result;
    result.results_csv_path = cfg.out_dir + "/results.csv";
    result.summary_json_path = cfg.out_dir + "/summary.json";

    std::ofstream csv(result.results_csv_path);
    csv << "seed,env,H,algorithm,n,episodes_used,cover_pass_fraction,final_return,"
           "optimal_found,wall_ms\n";
    for (const auto& out : outcomes) {
        const auto& r = out.row;
        csv << r.seed << ',' << r.env << ',' << r.horizon << ',' << r.algorithm << ',' << r.n
            << ',' << r.episodes_used << ',' << csv_double(r.cover_pass_fraction) << ','
            << csv_double(r.final_return) << ',' << r.optimal_found << ','
            << (cfg.timing ? csv_double(r.wall_ms) : std::string("0")) << "\n";
        result.rows.push_back(r);
    }
    csv.close();

    nlohmann::json summary;
    {
        std::ostringstream cfg_text;
        write_config(cfg, cfg_text);
        summary["config"] = cfg_text.str();
    }
    double mean_return = 0.0;
    int optimal_count = 0;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& out : outcomes) {
        const auto& r = out.row;
        mean_return += r.final_return / outcomes.size();
        optimal_count += r.optimal_found;
        rows.push_back({{"seed", r.seed},
                        {"episodes_used", r.episodes_used},
                        {"cover_pass_fraction", r.cover_pass_fraction},
                        {"final_return", r.final_return},
                        {"optimal_found", r.optimal_found}});
    }
    summary["rows"] = rows;
    summary["mean_final_return"] = mean_return;
    summary["optimal_found_count"] = optimal_count;
    std::ofstream js(result.summary_json_path);
    js << summary.dump(2) << "\n";

    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (!outcomes[i].covers_serializable) continue;
        save_covers(outcomes[i].covers,
                    cfg.out_dir + "/covers_seed" + std::to_string(cfg.seeds[i]) + ".txt");
        save_model(*outcomes[i].model_copy,
                   cfg.out_dir + "/model_seed" + std::to_string(cfg.seeds[i]) + ".txt");
    }
    return result;
}

std::vector<BenchRow> bench_comblock(const ExperimentConfig& base,
                                     const std::vector<int>& horizons, long long n0,
                                     int max_rounds) {
    std::vector<BenchRow> rows;
    std::filesystem::create_directories(base.out_dir);
    std::ofstream csv(base.out_dir + "/bench.csv");
    csv << "H,n,episodes,seeds_ok,success\n";
    for (int H : horizons) {
        long long n = n0;
        BenchRow row;
        for (int round = 0; round < max_rounds; ++round) {
            ExperimentConfig cfg = base;
            cfg.env_preset = "comblock:H=" + std::to_string(H);
            cfg.algorithm = "musik-comp";
            cfg.planner = "psdp";
            cfg.n = n;
            cfg.n_psdp = n;
            cfg.out_dir = base.out_dir + "/bench_H" + std::to_string(H) + "_n" + std::to_string(n);
            ExperimentResult res = run_experiment(cfg);
            row.horizon = H;
            row.n = n;
            row.episodes = 0;
            row.seeds_ok = 0;
            for (const auto& r : res.rows) {
                row.episodes = std::max(row.episodes, r.episodes_used);
                row.seeds_ok += r.optimal_found;
            }
            row.success = row.seeds_ok == static_cast<int>(cfg.seeds.size());
            if (row.success) break;
            n = std::max(n + 1, static_cast<long long>(n * 1.5));
        }
        rows.push_back(row);
        csv << row.horizon << ',' << row.n << ',' << row.episodes << ',' << row.seeds_ok << ','
            << (row.success ? 1 : 0) << "\n";
    }
    return rows;
}

} // namespace bmdp

// Command-line front end: reward-free exploration, downstream planning, and
// the exact verification suites. Exit codes: 0 success, 1 usage error,
// 2 verification failure.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "bmdp/analysis.hpp"
#include "bmdp/dp.hpp"
#include "bmdp/envs.hpp"
#include "bmdp/harness.hpp"
#include "bmdp/musik.hpp"
#include "bmdp/psdp.hpp"
#include "bmdp/serialize.hpp"

using namespace bmdp;

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) seeds.push_back(std::stoull(item));
    return seeds;
}

int cmd_run_musik(const std::string& config_path, const std::string& env,
                  const std::string& variant, long long n, double eps,
                  const std::string& seeds, const std::string& out, int threads,
                  bool with_psdp, long long n_psdp) {
    ExperimentConfig cfg;
    if (!config_path.empty()) {
        cfg = parse_config(config_path);
    } else {
        cfg.env_preset = env;
        cfg.algorithm = variant == "bmdp" ? "musik"
                        : variant == "tabular" ? "musik-tab"
                        : variant == "composable" ? "musik-comp"
                        : variant;
        if (cfg.algorithm != "musik" && cfg.algorithm != "musik-tab" &&
            cfg.algorithm != "musik-comp") {
            std::cerr << "unknown variant '" << variant << "'\n";
            return 1;
        }
        cfg.n = n;
        cfg.eps = eps;
        cfg.seeds = parse_seed_list(seeds);
        cfg.out_dir = out;
        cfg.threads = threads;
        if (with_psdp) cfg.planner = "psdp";
        if (n_psdp > 0) cfg.n_psdp = n_psdp;
    }
    ExperimentResult res = run_experiment(cfg);
    std::cout << "wrote " << res.results_csv_path << " (" << res.rows.size() << " rows)\n";
    return 0;
}

int cmd_run_psdp(const std::string& covers_path, const std::string& env_preset, long long n,
                 std::uint64_t seed, const std::string& out, int decoys, double corruption) {
    CoverSet covers = load_covers(covers_path);
    EnvHandle handle = make_env_from_preset(env_preset, seed, false);
    if (!handle.env->rewarded()) {
        std::cerr << "run-psdp: environment has no reward\n";
        return 1;
    }
    const BlockMdp* model = handle.env->exact_model();
    DecoderClass decoders;
    if (model != nullptr)
        decoders = make_decoder_class(*model, decoys, corruption, hash_label("decoder-class") ^ seed);
    else if (handle.lock)
        decoders = make_comblock_linear_decoders(*handle.lock, decoys, corruption,
                                                 hash_label("decoder-class") ^ seed);

    PsdpResult res = run_psdp(covers, decoders, *handle.env, n, seed);
    std::filesystem::create_directories(out);

    CoverPolicy learned{res.policy};
    std::ofstream eval_csv(out + "/eval.csv");
    eval_csv << "mode,value,ci_lo,ci_hi,episodes\n";
    if (model != nullptr) {
        EvalResult ev = evaluate_policy_return(*model, learned);
        eval_csv << "exact," << format_double(ev.value) << ',' << format_double(ev.ci_lo) << ','
                 << format_double(ev.ci_hi) << ",0\n";
    }
    EvalResult mc = evaluate_policy_return_mc(*handle.env, learned, 50, seed ^ hash_label("eval"));
    eval_csv << "mc," << format_double(mc.value) << ',' << format_double(mc.ci_lo) << ','
             << format_double(mc.ci_hi) << ',' << mc.episodes << "\n";

    if (model != nullptr) {
        MarkovPolicy table = materialize_markov(*model, res.policy);
        std::ofstream pol(out + "/policy.txt");
        pol << "policy obs-level\n";
        for (int x = 0; x < model->total_obs(); ++x)
            pol << x << ' ' << table.action[x] << "\n";
    }
    std::cout << "psdp episodes=" << res.stats.episodes << " return(mc50)=" << mc.value << "\n";
    return 0;
}

int cmd_verify(const std::string& model_path, const std::string& covers_path, double eps,
               const std::string& suite, const std::string& out) {
    BlockMdp model = load_model(model_path);
    std::filesystem::create_directories(out);
    std::ofstream csv(out + "/verify.csv");
    csv << "suite,layer,state,baseline,achieved,pass,margin\n";
    bool all_pass = true;

    CoverSet covers;
    if (!covers_path.empty()) covers = load_covers(covers_path);

    if (suite == "cover" || suite == "all") {
        if (covers_path.empty()) {
            std::cerr << "verify: suite 'cover' needs --covers\n";
            return 1;
        }
        for (int h = 2; h <= model.horizon; ++h) {
            CoverReport rep = check_cover(model, covers.at_layer(h), 0.25, eps);
            for (const auto& e : rep.entries) {
                csv << "cover," << h << ',' << e.state << ',' << format_double(e.baseline) << ','
                    << format_double(e.achieved) << ',' << (e.pass ? 1 : 0) << ','
                    << format_double(e.achieved - 0.25 * e.baseline) << "\n";
                all_pass = all_pass && e.pass;
            }
        }
    }
    if (suite == "truncation" || suite == "all") {
        ExtendedBmdp ext = extend(model);
        LemmaReport rep = verify_truncation_lemma(ext, eps);
        for (const auto& e : rep.entries) {
            csv << "truncation,," << e.state << ',' << format_double(e.lhs) << ','
                << format_double(e.rhs) << ',' << (e.ok ? 1 : 0) << ','
                << format_double(e.margin) << "\n";
            all_pass = all_pass && e.ok;
        }
    }
    if (suite == "transfer" || suite == "all") {
        if (covers_path.empty()) {
            std::cerr << "verify: suite 'transfer' needs --covers\n";
            return 1;
        }
        TransferReport rep = verify_transfer(model, eps, covers);
        for (const auto& layer : rep.layers) {
            csv << "transfer," << layer.layer << ",,," << ','
                << (layer.implication_ok ? 1 : 0) << ",\n";
            all_pass = all_pass && layer.implication_ok;
        }
    }
    std::cout << (all_pass ? "verify: all checks passed\n" : "verify: FAILURES recorded\n");
    return all_pass ? 0 : 2;
}

int cmd_inspect_fit(const std::string& env_preset, int t, int h, long long n,
                    std::uint64_t seed, int decoys, double corruption,
                    const std::string& out) {
    EnvHandle handle = make_env_from_preset(env_preset, seed, false);
    Env& env = *handle.env;
    const BlockMdp* model = env.exact_model();
    if (model == nullptr) {
        std::cerr << "inspect-fit: needs a finite-observation environment\n";
        return 1;
    }
    DecoderClass decoders =
        make_decoder_class(*model, decoys, corruption, hash_label("decoder-class") ^ seed);

    // Uniform roll-in and uniform roll-outs: a neutral diagnostic dataset.
    const int K = env.state_count();
    IkDataset data;
    data.t = t;
    data.h = h;
    data.num_indices = K;
    for (long long e = 0; e < n; ++e) {
        RngStream rng(seed, "inspect-fit", e);
        Obs x = env.reset(rng);
        for (int tau = 1; tau < t; ++tau) x = env.step(rng.uniform_int(env.action_count()), rng).obs;
        Obs x_t = x;
        int index = rng.uniform_int(K);
        int a_t = rng.uniform_int(env.action_count());
        x = env.step(a_t, rng).obs;
        for (int tau = t + 1; tau <= h - 1; ++tau)
            x = env.step(rng.uniform_int(env.action_count()), rng).obs;
        data.records.push_back({index, a_t, x_t, x});
    }
    MleFit fit = fit_mle(data, decoders, env.action_count());

    std::filesystem::create_directories(out);
    std::ofstream csv(out + "/fit.csv");
    csv << "decoder_index,loglik,disagreements_vs_true\n";
    Decoder truth = Decoder::table(model->obs_to_state);
    for (int d = 0; d < decoders.size(); ++d) {
        int dis = decoders[d].is_table() ? decoders[d].disagreements(truth) : -1;
        csv << d << ',' << format_double(fit.logliks[d]) << ',' << dis << "\n";
    }
    std::cout << "chosen decoder " << fit.decoder_index << " (true at "
              << decoders.true_index << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"layered block-MDP exploration toolkit"};
    app.require_subcommand(1);

    // run-musik
    std::string rm_config, rm_env = "comblock:H=3", rm_variant = "bmdp";
    std::string rm_seeds = "1,2,3,4,5", rm_out = "results";
    long long rm_n = 0, rm_npsdp = 0;
    double rm_eps = 0.05;
    int rm_threads = 1;
    bool rm_psdp = false;
    auto* rm = app.add_subcommand("run-musik", "reward-free exploration experiment");
    rm->add_option("--config", rm_config, "config file (overrides the other flags)");
    rm->add_option("--env", rm_env, "environment preset");
    rm->add_option("--variant", rm_variant, "bmdp | tabular | composable");
    rm->add_option("--n", rm_n, "samples per regression (0 = auto)");
    rm->add_option("--eps", rm_eps, "target cover resolution");
    rm->add_option("--seed", rm_seeds, "comma-separated seed list");
    rm->add_option("--out", rm_out, "output directory");
    rm->add_option("--threads", rm_threads, "worker threads over seeds");
    rm->add_flag("--psdp", rm_psdp, "run the planner after exploration");
    rm->add_option("--n-psdp", rm_npsdp, "planner samples per layer");

    // run-psdp
    std::string rp_covers, rp_env = "comblock:H=3", rp_out = "results";
    long long rp_n = 2000;
    std::uint64_t rp_seed = 1;
    int rp_decoys = 31;
    double rp_corruption = 0.3;
    auto* rp = app.add_subcommand("run-psdp", "reward-based planning on a stored cover");
    rp->add_option("--covers", rp_covers, "cover file")->required();
    rp->add_option("--env", rp_env, "environment preset");
    rp->add_option("--n", rp_n, "samples per layer");
    rp->add_option("--seed", rp_seed, "seed");
    rp->add_option("--out", rp_out, "output directory");
    rp->add_option("--decoys", rp_decoys, "decoder-class decoys");
    rp->add_option("--corruption", rp_corruption, "decoy corruption rate");

    // verify
    std::string v_model, v_covers, v_suite = "all", v_out = "results";
    double v_eps = 0.05;
    auto* vf = app.add_subcommand("verify", "exact cover / structural-lemma checks");
    vf->add_option("--model", v_model, "model file")->required();
    vf->add_option("--covers", v_covers, "cover file (cover/transfer suites)");
    vf->add_option("--eps", v_eps, "resolution");
    vf->add_option("--suite", v_suite, "cover | truncation | transfer | all");
    vf->add_option("--out", v_out, "output directory");

    // inspect-fit
    std::string if_env = "comblock:H=3", if_out = "results";
    int if_t = 1, if_h = 2, if_decoys = 31;
    long long if_n = 10000;
    std::uint64_t if_seed = 1;
    double if_corruption = 0.3;
    auto* insp = app.add_subcommand("inspect-fit", "per-decoder log-likelihood dump");
    insp->add_option("--env", if_env, "environment preset");
    insp->add_option("--layer-t", if_t, "roll-in layer");
    insp->add_option("--layer-h", if_h, "target layer");
    insp->add_option("--n", if_n, "samples");
    insp->add_option("--seed", if_seed, "seed");
    insp->add_option("--decoys", if_decoys, "decoder-class decoys");
    insp->add_option("--corruption", if_corruption, "decoy corruption rate");
    insp->add_option("--out", if_out, "output directory");

    // bench-comblock
    std::string bc_horizons = "3,5,8", bc_out = "results", bc_seeds = "1,2,3";
    long long bc_n0 = 500;
    int bc_rounds = 24;
    auto* bc = app.add_subcommand("bench-comblock", "minimal-n sweep over horizons");
    bc->add_option("--horizons", bc_horizons, "comma-separated horizon list");
    bc->add_option("--n0", bc_n0, "grid start");
    bc->add_option("--rounds", bc_rounds, "grid length cap");
    bc->add_option("--seed", bc_seeds, "comma-separated seed list");
    bc->add_option("--out", bc_out, "output directory");

    // emit-default-config
    auto* ec = app.add_subcommand("emit-default-config", "print the documented defaults");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (rm->parsed())
            return cmd_run_musik(rm_config, rm_env, rm_variant, rm_n, rm_eps, rm_seeds, rm_out,
                                 rm_threads, rm_psdp, rm_npsdp);
        if (rp->parsed())
            return cmd_run_psdp(rp_covers, rp_env, rp_n, rp_seed, rp_out, rp_decoys,
                                rp_corruption);
        if (vf->parsed()) return cmd_verify(v_model, v_covers, v_eps, v_suite, v_out);
        if (insp->parsed())
            return cmd_inspect_fit(if_env, if_t, if_h, if_n, if_seed, if_decoys, if_corruption,
                                   if_out);
        if (bc->parsed()) {
            std::vector<int> horizons;
            for (auto s : parse_seed_list(bc_horizons)) horizons.push_back(static_cast<int>(s));
            ExperimentConfig base;
            base.seeds = parse_seed_list(bc_seeds);
            base.out_dir = bc_out;
            auto rows = bench_comblock(base, horizons, bc_n0, bc_rounds);
            for (const auto& r : rows)
                std::cout << "H=" << r.horizon << " n=" << r.n << " episodes=" << r.episodes
                          << " seeds_ok=" << r.seeds_ok << (r.success ? "" : " (cap hit)")
                          << "\n";
            return 0;
        }
        if (ec->parsed()) {
            emit_default_config(std::cout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace bmdp {

/// Experiment description; parsed from key = value text. Unknown keys are
/// rejected at parse time. All randomness derives from the per-row seed.
struct ExperimentConfig {
    std::string env_preset = "comblock:H=3";
    std::string algorithm = "musik";     // musik | musik-tab | musik-comp
    std::string planner = "none";        // none | psdp
    long long n = 0;                     // 0 = auto via the sample-size heuristic
    long long n_psdp = 2000;
    double eps = 0.05;
    double delta = 0.05;
    double theory_c = 1e-9;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string eval_mode = "mc";        // exact | mc
    long long eval_episodes = 50;
    std::string out_dir = "results";
    bool count_eval_episodes = false;
    int decoys = 31;
    double corruption = 0.3;
    bool timing = true;                  // false zeroes the wall_ms column (reproducible output)
    int threads = 1;
};

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config(std::istream& in, const std::string& name);
void emit_default_config(std::ostream& out);
void write_config(const ExperimentConfig& cfg, std::ostream& out);

struct ExperimentRow {
    std::uint64_t seed = 0;
    std::string env;
    int horizon = 0;
    std::string algorithm;
    long long n = 0;
    long long episodes_used = 0;
    double cover_pass_fraction = -1.0;   // -1 when no exact check is available
    double final_return = 0.0;
    int optimal_found = 0;
    double wall_ms = 0.0;
};

struct ExperimentResult {
    std::vector<ExperimentRow> rows;
    std::string results_csv_path;
    std::string summary_json_path;
};

/// Runs the configured experiment for every seed (optionally across a thread
/// pool; per-seed substreams keep the output identical for any thread count)
/// and writes results.csv and summary.json under the output directory.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Minimal-sample-search over a factor-1.5 grid: for each horizon, the
/// smallest n on the grid for which every seed finds the optimal policy.
/// Writes bench.csv under out_dir and returns its rows as
/// (H, n, max episodes, seeds_ok, success).
struct BenchRow {
    int horizon = 0;
    long long n = 0;
    long long episodes = 0;
    int seeds_ok = 0;
    bool success = false;
};
std::vector<BenchRow> bench_comblock(const ExperimentConfig& base,
                                     const std::vector<int>& horizons, long long n0,
                                     int max_rounds);

} // namespace bmdp

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bmdp/harness.hpp"
#include "test_util.hpp"

using namespace bmdp;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("parse_config: minimal input fills the documented defaults") {
    std::stringstream in("env = comblock:H=3\n");
    ExperimentConfig cfg = parse_config(in, "test");
    CHECK(cfg.env_preset == "comblock:H=3");
    CHECK(cfg.algorithm == "musik");
    CHECK(cfg.planner == "none");
    CHECK(cfg.n == 0);
    CHECK(cfg.seeds.size() == 5);
    CHECK(cfg.eval_mode == "mc");
}

TEST_CASE("parse_config: unknown keys are rejected by name") {
    std::stringstream in("foo = 3\n");
    try {
        parse_config(in, "test");
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("foo") != std::string::npos);
    }
}

TEST_CASE("parse_config: bad values name the key and line") {
    std::stringstream in("env = comblock:H=3\nn = lots\n");
    try {
        parse_config(in, "test");
        FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
        std::string msg = e.what();
        CHECK(msg.find("n") != std::string::npos);
        CHECK(msg.find("2") != std::string::npos);
    }
}

TEST_CASE("parse_config: empty seed list is rejected") {
    std::stringstream in("seeds = \n");
    CHECK_THROWS_AS(parse_config(in, "test"), std::runtime_error);
}

TEST_CASE("config round-trips: emit then parse gives an identical config") {
    std::stringstream defaults;
    ExperimentConfig original;
    original.env_preset = "comblock:H=5";
    original.algorithm = "musik-comp";
    original.planner = "psdp";
    original.n = 1234;
    original.seeds = {7, 8};
    original.eval_mode = "exact";
    original.timing = false;
    write_config(original, defaults);
    ExperimentConfig parsed = parse_config(defaults, "roundtrip");

    std::stringstream again;
    write_config(parsed, again);
    std::stringstream first;
    write_config(original, first);
    CHECK(again.str() == first.str());
}

TEST_CASE("run_experiment writes one row per seed with the documented accounting") {
    ExperimentConfig cfg;
    cfg.env_preset = "comblock:H=3";
    cfg.algorithm = "musik-comp";
    cfg.planner = "psdp";
    cfg.n = 800;
    cfg.n_psdp = 600;
    cfg.seeds = {1, 2, 3};
    cfg.out_dir = "/tmp/bmdp_harness_test/run1";
    cfg.decoys = 3;
    cfg.timing = false;
    ExperimentResult res = run_experiment(cfg);
    REQUIRE(res.rows.size() == 3);
    for (const auto& row : res.rows) {
        CHECK(row.episodes_used == 2 * 800 + 3 * 600);   // exploration + planner
        CHECK(row.horizon == 3);
        CHECK(row.n == 800);
    }
    CHECK(std::filesystem::exists(res.results_csv_path));
    CHECK(std::filesystem::exists(res.summary_json_path));
}

TEST_CASE("run_experiment output is byte-identical across reruns and thread counts") {
    ExperimentConfig cfg;
    cfg.env_preset = "comblock:H=3";
    cfg.algorithm = "musik-comp";
    cfg.planner = "psdp";
    cfg.n = 500;
    cfg.n_psdp = 500;
    cfg.seeds = {1, 2, 3, 4};
    cfg.decoys = 3;
    cfg.timing = false;

    std::string bytes[3];
    int threads[3] = {1, 2, 4};
    for (int i = 0; i < 3; ++i) {
        cfg.threads = threads[i];
        cfg.out_dir = "/tmp/bmdp_harness_test/det" + std::to_string(i);
        ExperimentResult res = run_experiment(cfg);
        bytes[i] = slurp(res.results_csv_path);
    }
    CHECK(bytes[0] == bytes[1]);
    CHECK(bytes[0] == bytes[2]);
    CHECK(bytes[0].find("wall_ms") != std::string::npos);
}

TEST_CASE("run_experiment rejects an empty seed list") {
    ExperimentConfig cfg;
    cfg.seeds.clear();
    CHECK_THROWS_AS(run_experiment(cfg), std::runtime_error);
}

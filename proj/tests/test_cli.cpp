#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qbag/cli.hpp"
#include "qbag/errors.hpp"
#include "qbag/oracle.hpp"
#include "qbag/rng.hpp"
#include "stub_responder.hpp"

using namespace qbag;
namespace fs = std::filesystem;

namespace {

int run_argv(std::vector<std::string> args) {
    std::vector<const char*> argv{"qbag"};
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run_main(static_cast<int>(argv.size()), argv.data());
}

std::string write_temp(const std::string& dir, const std::string& name,
                       const std::string& body) {
    const std::string path = dir + "/" + name;
    std::ofstream out(path);
    out << body;
    return path;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<LabeledInstance> random_labeled_pool(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledInstance> labeled;
    std::set<std::vector<double>> seen;
    while (static_cast<int>(labeled.size()) < n) {
        std::vector<double> c{rng.uniform01(), rng.uniform01()};
        if (!seen.insert(c).second) continue;
        FeatureVector x{c};
        labeled.push_back(LabeledInstance{static_cast<long>(labeled.size()), x,
                                          synthetic2d_label(x), Provenance::Initial, 0});
    }
    return labeled;
}

}  // namespace

TEST_CASE("config files parse with validation errors naming the field") {
    const std::string dir = testing::unique_temp_dir("cfg");
    const std::string path = write_temp(dir, "exp.cfg",
                                        "# comment\n"
                                        "dimension = 2\n"
                                        "rounds = 3\n"
                                        "batch_size = 16\n"
                                        "seeds = 1..4\n"
                                        "strategies = qbag,random\n"
                                        "noise = 0.1\n");
    EngineConfig cfg = parse_config_file(path);
    CHECK(cfg.rounds == 3);
    CHECK(cfg.batch_size == 16);
    CHECK(cfg.seeds == std::vector<std::uint64_t>{1, 2, 3, 4});
    CHECK(cfg.strategies.size() == 2);
    CHECK(cfg.noise == 0.1);

    const std::string bad_key = write_temp(dir, "bad1.cfg", "no_such_key = 1\n");
    try {
        parse_config_file(bad_key);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("no_such_key") != std::string::npos);
    }

    const std::string bad_value = write_temp(dir, "bad2.cfg", "rounds = soon\n");
    try {
        parse_config_file(bad_value);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("rounds") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("seed lists, strategies, and bounds parse") {
    CHECK(parse_seed_list("7") == std::vector<std::uint64_t>{7});
    CHECK(parse_seed_list("1..3,9") == std::vector<std::uint64_t>{1, 2, 3, 9});
    CHECK_THROWS_AS(parse_seed_list("5..2"), ConfigError);
    CHECK_THROWS_AS(parse_seed_list(""), ConfigError);

    CHECK(parse_strategy_list("entropy").front() == Strategy::Entropy);
    CHECK_THROWS_AS(parse_strategy_list("qbig"), ConfigError);

    Bounds b = parse_bounds("0:10;100:300");
    REQUIRE(b.size() == 2);
    CHECK(b[0].lo == 0.0);
    CHECK(b[1].hi == 300.0);
    CHECK_THROWS_AS(parse_bounds("0-10"), ConfigError);
}

TEST_CASE("dimension-dependent defaults") {
    EngineConfig d2;
    finalize_config(d2);
    CHECK(d2.grid_resolution == 101);
    CHECK(d2.test_size == 212);
    CHECK(d2.batch_size == 32);
    CHECK(d2.exploratory == 4);
    CHECK(d2.rounds == 6);
    CHECK(resolved_oracle_kind(d2) == OracleKind::Synthetic2d);

    EngineConfig d3;
    d3.dimension = 3;
    finalize_config(d3);
    CHECK(d3.grid_resolution == 41);
    CHECK(d3.test_size == 468);
    CHECK(d3.batch_size == 64);
    CHECK(d3.exploratory == 8);
    CHECK(d3.rounds == 7);
    CHECK(resolved_oracle_kind(d3) == OracleKind::Synthetic3d);

    EngineConfig bad;
    bad.exploratory = 64;
    CHECK_THROWS_AS(finalize_config(bad), ConfigError);
}

TEST_CASE("the digest tracks experiment-defining fields only") {
    EngineConfig a;
    finalize_config(a);
    EngineConfig b = a;
    b.out = "/somewhere/else";
    b.jobs = 8;
    b.checkpoint = false;
    CHECK(config_digest(a) == config_digest(b));

    EngineConfig c = a;
    c.train.epochs += 1;
    CHECK(config_digest(a) != config_digest(c));
    EngineConfig d = a;
    d.seeds = {1, 2};
    CHECK(config_digest(a) != config_digest(d));
}

TEST_CASE("audit flags a planted flip in a clean pool") {
    auto labeled = random_labeled_pool(120, 31);
    cli::AuditParams params;
    params.committee_size = 8;
    params.train.epochs = 150;
    params.seed = 5;

    auto clean = cli::audit_labeled_pool(labeled, params);
    CHECK(clean.size() <= 2);

    auto poisoned = labeled;
    poisoned[60].label = (poisoned[60].label + 2) % 5;
    auto rows = cli::audit_labeled_pool(poisoned, params);
    bool found = false;
    for (const auto& r : rows) found = found || r.instance.id == poisoned[60].id;
    CHECK(found);
    for (const auto& r : rows) {
        CHECK(r.votes_top >= r.votes_stored);
        CHECK(r.predicted != r.instance.label);
    }

    CHECK_THROWS_AS(cli::audit_labeled_pool({}, params), ConfigError);
}

TEST_CASE("run command writes curves, artifacts, and a manifest") {
    const std::string dir = testing::unique_temp_dir("cmdrun");
    const std::string cfg_path = write_temp(dir, "exp.cfg",
                                            "grid_resolution = 15\n"
                                            "test_size = 30\n"
                                            "rounds = 1\n"
                                            "batch_size = 8\n"
                                            "exploratory = 1\n"
                                            "committee = 4\n"
                                            "initial_size = 10\n"
                                            "cv_k = 4\n"
                                            "epochs = 40\n"
                                            "seeds = 1\n"
                                            "strategies = qbag\n");
    const std::string out_a = dir + "/out_a";
    const std::string out_b = dir + "/out_b";
    CHECK(run_argv({"run", "--config", cfg_path, "--out", out_a}) == cli::kExitOk);
    CHECK(run_argv({"run", "--config", cfg_path, "--out", out_b}) == cli::kExitOk);

    for (const auto& rel : {"curves_raw.csv", "curves_agg.csv", "manifest.json",
                            "runs/qbag-s1/batches.csv", "runs/qbag-s1/pool.csv",
                            "runs/qbag-s1/committee.txt"})
        CHECK(fs::exists(fs::path(out_a) / rel));

    // Byte-identical output across reruns of the same config.
    CHECK(slurp(out_a + "/curves_raw.csv") == slurp(out_b + "/curves_raw.csv"));
    CHECK(slurp(out_a + "/curves_agg.csv") == slurp(out_b + "/curves_agg.csv"));
    fs::remove_all(dir);
}

TEST_CASE("map command rasterizes a saved committee and the oracle") {
    const std::string dir = testing::unique_temp_dir("cmdmap");
    const std::string cfg_path = write_temp(dir, "exp.cfg",
                                            "grid_resolution = 15\n"
                                            "test_size = 20\n"
                                            "rounds = 0\n"
                                            "batch_size = 8\n"
                                            "committee = 4\n"
                                            "initial_size = 10\n"
                                            "cv_k = 4\n"
                                            "epochs = 40\n"
                                            "seeds = 1\n"
                                            "strategies = qbag\n");
    const std::string out = dir + "/out";
    REQUIRE(run_argv({"run", "--config", cfg_path, "--out", out}) == cli::kExitOk);

    const std::string map_path = dir + "/map.csv";
    CHECK(run_argv({"map", "--model", out + "/runs/qbag-s1/committee.txt", "--resolution",
                    "11", "--out", map_path}) == cli::kExitOk);
    auto lines = csv::read_lines(map_path);
    CHECK(lines.size() == 2 + 121);  // comment, header, rows

    // Slicing a 2d model is a usage error.
    CHECK(run_argv({"map", "--model", out + "/runs/qbag-s1/committee.txt", "--slice", "x3=0.5",
                    "--out", map_path}) == cli::kExitUsage);

    const std::string truth_path = dir + "/truth.csv";
    CHECK(run_argv({"map", "--oracle", "synthetic2d", "--resolution", "5", "--out",
                    truth_path}) == cli::kExitOk);
    CHECK(csv::read_lines(truth_path).size() == 2 + 25);

    CHECK(run_argv({"map", "--out", map_path}) == cli::kExitUsage);
    fs::remove_all(dir);
}

TEST_CASE("audit command reads a snapshot and reports suspects") {
    const std::string dir = testing::unique_temp_dir("cmdaudit");
    Pool pool;
    pool.dimension = 2;
    pool.labeled = random_labeled_pool(80, 3);
    pool.labeled[40].label = (pool.labeled[40].label + 1) % 5;
    {
        std::ofstream out(dir + "/pool.csv");
        write_pool_csv(out, pool);
    }
    CHECK(run_argv({"audit", "--pool", dir + "/pool.csv", "--set", "epochs=120", "--set",
                    "committee=8"}) == cli::kExitOk);

    // Empty labeled pool: usage error.
    Pool empty = build_grid_pool(2, 3);
    {
        std::ofstream out(dir + "/empty.csv");
        write_pool_csv(out, empty);
    }
    CHECK(run_argv({"audit", "--pool", dir + "/empty.csv"}) == cli::kExitUsage);
    CHECK(run_argv({"audit", "--pool", dir + "/missing.csv"}) == cli::kExitUsage);
    fs::remove_all(dir);
}

TEST_CASE("usage errors exit with status 1") {
    CHECK(run_argv({"frobnicate"}) == cli::kExitUsage);
    CHECK(run_argv({"run", "--strategy", "qbig"}) == cli::kExitUsage);
    CHECK(run_argv({}) == cli::kExitUsage);
}

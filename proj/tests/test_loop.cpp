#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>
#include <set>

#include "qbag/errors.hpp"
#include "qbag/loop.hpp"
#include "stub_responder.hpp"

using namespace qbag;
namespace fs = std::filesystem;

namespace {

LoopConfig small_config(Strategy strategy, std::uint64_t seed) {
    LoopConfig cfg;
    cfg.rounds = 2;
    cfg.batch_size = 8;
    cfg.exploratory = 1;
    cfg.committee_size = 4;
    cfg.initial_size = 12;
    cfg.cv_k = 4;
    cfg.num_classes = 5;
    cfg.train.epochs = 40;
    cfg.strategy = strategy;
    cfg.seed = seed;
    return cfg;
}

bool records_equal(const RoundRecord& a, const RoundRecord& b) {
    if (a.round != b.round || a.labels_total != b.labels_total ||
        a.hidden_units != b.hidden_units || a.disagreement_size != b.disagreement_size ||
        a.test_accuracy != b.test_accuracy || a.batch.shortfall != b.batch.shortfall ||
        a.batch.strategy != b.batch.strategy)
        return false;
    auto picks_equal = [](const std::vector<Pick>& x, const std::vector<Pick>& y) {
        if (x.size() != y.size()) return false;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i].id != y[i].id || !(x[i].features == y[i].features)) return false;
        return true;
    };
    return picks_equal(a.batch.disagreement_picks, b.batch.disagreement_picks) &&
           picks_equal(a.batch.exploratory_picks, b.batch.exploratory_picks);
}

}  // namespace

TEST_CASE("initialize moves the requested number of points") {
    auto pool = build_grid_pool(2, 101);
    SyntheticOracle oracle(OracleKind::Synthetic2d);
    initialize(pool, 20, oracle, 7);
    CHECK(pool.labeled.size() == 20);
    CHECK(pool.unlabeled.size() == 10181);
    for (const auto& li : pool.labeled) {
        CHECK(li.provenance == Provenance::Initial);
        CHECK(li.round == 0);
        CHECK(li.label == synthetic2d_label(li.features));
    }

    auto untouched = build_grid_pool(2, 11);
    initialize(untouched, 0, oracle, 7);
    CHECK(untouched.labeled.empty());
    CHECK(untouched.unlabeled.size() == 121);

    auto again = build_grid_pool(2, 101);
    initialize(again, 20, oracle, 7);
    for (std::size_t i = 0; i < 20; ++i) CHECK(again.labeled[i].id == pool.labeled[i].id);

    CHECK_THROWS_AS(initialize(untouched, 1000, oracle, 1), PoolExhausted);
}

TEST_CASE("rounds spend the full budget with the right provenance") {
    auto cfg = small_config(Strategy::QBag, 11);
    SyntheticOracle oracle(OracleKind::Synthetic2d);
    auto result = run_experiment(cfg, build_grid_pool(2, 11), oracle, nullptr);

    REQUIRE(result.records.size() == 3);  // stage 0 plus two rounds
    for (int k = 0; k <= 2; ++k) {
        CHECK(result.records[static_cast<std::size_t>(k)].round == k);
        CHECK(result.records[static_cast<std::size_t>(k)].labels_total == 12 + 8 * k);
    }
    CHECK(result.records[0].batch.total() == 0);

    // Count provenance per round in the final pool.
    std::map<int, int> d_count, e_count;
    for (const auto& li : result.pool.labeled) {
        if (li.provenance == Provenance::DisagreementQuery) ++d_count[li.round];
        if (li.provenance == Provenance::ExploratoryQuery) ++e_count[li.round];
    }
    for (int k = 1; k <= 2; ++k) CHECK(d_count[k] + e_count[k] == 8);
    CHECK(result.pool.labeled.size() == 28);
    CHECK(result.pool.unlabeled.size() == 121 - 28);
}

TEST_CASE("random strategy records random provenance and still trains") {
    auto cfg = small_config(Strategy::Random, 11);
    SyntheticOracle oracle(OracleKind::Synthetic2d);
    auto result = run_experiment(cfg, build_grid_pool(2, 11), oracle, nullptr);
    REQUIRE(result.records.size() == 3);
    int random_count = 0;
    for (const auto& li : result.pool.labeled)
        if (li.provenance == Provenance::RandomQuery) ++random_count;
    CHECK(random_count == 16);
    CHECK(result.committee.members.size() == 4);
}

TEST_CASE("no point is ever labeled twice") {
    auto cfg = small_config(Strategy::QBag, 23);
    SyntheticOracle oracle(OracleKind::Synthetic2d);
    auto result = run_experiment(cfg, build_grid_pool(2, 11), oracle, nullptr);
    std::set<long> ids;
    for (const auto& li : result.pool.labeled) CHECK(ids.insert(li.id).second);
    for (const auto& up : result.pool.unlabeled) CHECK(ids.insert(up.id).second);
}

TEST_CASE("identical seeds give identical experiments") {
    auto cfg = small_config(Strategy::QBag, 31);
    SyntheticOracle oracle_a(OracleKind::Synthetic2d);
    SyntheticOracle oracle_b(OracleKind::Synthetic2d);
    auto a = run_experiment(cfg, build_grid_pool(2, 11), oracle_a, nullptr);
    auto b = run_experiment(cfg, build_grid_pool(2, 11), oracle_b, nullptr);
    REQUIRE(a.records.size() == b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i)
        CHECK(records_equal(a.records[i], b.records[i]));
    for (std::size_t t = 0; t < a.committee.members.size(); ++t)
        CHECK(a.committee.members[t].w1 == b.committee.members[t].w1);
}

TEST_CASE("strategies share the initial pool for a given seed") {
    SyntheticOracle oracle_a(OracleKind::Synthetic2d);
    SyntheticOracle oracle_b(OracleKind::Synthetic2d);
    auto qbag = run_experiment(small_config(Strategy::QBag, 5), build_grid_pool(2, 11),
                               oracle_a, nullptr);
    auto random = run_experiment(small_config(Strategy::Random, 5), build_grid_pool(2, 11),
                                 oracle_b, nullptr);
    std::set<long> qbag_initial, random_initial;
    for (const auto& li : qbag.pool.labeled)
        if (li.provenance == Provenance::Initial) qbag_initial.insert(li.id);
    for (const auto& li : random.pool.labeled)
        if (li.provenance == Provenance::Initial) random_initial.insert(li.id);
    CHECK(qbag_initial == random_initial);
}

TEST_CASE("zero rounds trains on the initial pool only") {
    auto cfg = small_config(Strategy::QBag, 3);
    cfg.rounds = 0;
    SyntheticOracle oracle(OracleKind::Synthetic2d);
    auto result = run_experiment(cfg, build_grid_pool(2, 11), oracle, nullptr);
    REQUIRE(result.records.size() == 1);
    CHECK(result.records[0].labels_total == 12);
    CHECK(result.committee.members.size() == 4);
}

TEST_CASE("a pool smaller than the budget truncates and ends cleanly") {
    auto cfg = small_config(Strategy::QBag, 13);
    cfg.rounds = 5;          // wants 12 + 40 labels
    cfg.initial_size = 10;   // pool only has 25
    SyntheticOracle oracle(OracleKind::Synthetic2d);
    auto result = run_experiment(cfg, build_grid_pool(2, 5), oracle, nullptr);
    CHECK(result.pool.unlabeled.empty());
    CHECK(result.pool.labeled.size() == 25);
    const auto& last = result.records.back();
    CHECK(last.labels_total == 25);
    CHECK(last.batch.total() == 7);  // truncated final batch
}

TEST_CASE("checkpoint and resume reproduce the uninterrupted run") {
    auto cfg = small_config(Strategy::QBag, 17);
    cfg.rounds = 3;
    SyntheticOracle oracle_full(OracleKind::Synthetic2d);
    auto full = run_experiment(cfg, build_grid_pool(2, 11), oracle_full, nullptr);

    const std::string dir = testing::unique_temp_dir("ckpt");
    const std::string path = dir + "/exp.ckpt";
    CheckpointOptions ckpt{path, "digest-a"};

    // Interrupted run: stop after round 1 by running with rounds = 1.
    auto cfg_short = cfg;
    cfg_short.rounds = 1;
    SyntheticOracle oracle_short(OracleKind::Synthetic2d);
    run_experiment(cfg_short, build_grid_pool(2, 11), oracle_short, nullptr, ckpt);

    // Resume with the full round budget.
    SyntheticOracle oracle_resume(OracleKind::Synthetic2d);
    auto resumed = run_experiment(cfg, Pool{}, oracle_resume, nullptr, ckpt, path);

    REQUIRE(resumed.records.size() == full.records.size());
    for (std::size_t i = 0; i < full.records.size(); ++i)
        CHECK(records_equal(full.records[i], resumed.records[i]));
    REQUIRE(resumed.committee.members.size() == full.committee.members.size());
    for (std::size_t t = 0; t < full.committee.members.size(); ++t) {
        CHECK(resumed.committee.members[t].w1 == full.committee.members[t].w1);
        CHECK(resumed.committee.members[t].w2 == full.committee.members[t].w2);
    }

    // A digest mismatch refuses to resume.
    CheckpointOptions wrong{path, "digest-b"};
    SyntheticOracle oracle_wrong(OracleKind::Synthetic2d);
    CHECK_THROWS_AS(run_experiment(cfg, Pool{}, oracle_wrong, nullptr, wrong, path),
                    ConfigError);
    fs::remove_all(dir);
}

TEST_CASE("resume restores the noisy oracle sequence") {
    auto cfg = small_config(Strategy::QBag, 29);
    cfg.rounds = 2;
    auto make_noisy = [] {
        return NoisyOracle(std::make_unique<SyntheticOracle>(OracleKind::Synthetic2d), 0.2, 555);
    };

    auto full_oracle = make_noisy();
    auto full = run_experiment(cfg, build_grid_pool(2, 11), full_oracle, nullptr);

    const std::string dir = testing::unique_temp_dir("ckptn");
    const std::string path = dir + "/exp.ckpt";
    auto cfg_short = cfg;
    cfg_short.rounds = 1;
    auto short_oracle = make_noisy();
    run_experiment(cfg_short, build_grid_pool(2, 11), short_oracle, nullptr,
                   CheckpointOptions{path, ""});

    auto resume_oracle = make_noisy();
    auto resumed =
        run_experiment(cfg, Pool{}, resume_oracle, nullptr, CheckpointOptions{path, ""}, path);

    REQUIRE(resumed.records.size() == full.records.size());
    for (std::size_t i = 0; i < full.records.size(); ++i)
        CHECK(records_equal(full.records[i], resumed.records[i]));
    // Same labels in the final pools, flips included.
    REQUIRE(resumed.pool.labeled.size() == full.pool.labeled.size());
    for (std::size_t i = 0; i < full.pool.labeled.size(); ++i) {
        CHECK(resumed.pool.labeled[i].id == full.pool.labeled[i].id);
        CHECK(resumed.pool.labeled[i].label == full.pool.labeled[i].label);
    }
    fs::remove_all(dir);
}

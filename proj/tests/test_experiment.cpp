#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "qbag/errors.hpp"
#include "qbag/experiment.hpp"
#include "qbag/rng.hpp"

using namespace qbag;

namespace {

MlpModel constant_member(const std::vector<double>& output_bias) {
    MlpModel m = make_random_model(2, 2, static_cast<int>(output_bias.size()), 1);
    std::fill(m.w1.begin(), m.w1.end(), 0.0);
    std::fill(m.b1.begin(), m.b1.end(), 0.0);
    std::fill(m.w2.begin(), m.w2.end(), 0.0);
    m.b2 = output_bias;
    return m;
}

Committee constant_committee(int winner, int num_classes, int n_c) {
    std::vector<double> bias(static_cast<std::size_t>(num_classes), 0.0);
    bias[static_cast<std::size_t>(winner)] = 3.0;
    Committee c;
    c.n_c = n_c;
    c.num_classes = num_classes;
    c.member_seeds.assign(static_cast<std::size_t>(n_c), 0);
    for (int t = 0; t < n_c; ++t) c.members.push_back(constant_member(bias));
    return c;
}

ComparisonConfig small_comparison(std::uint64_t master_seed) {
    ComparisonConfig cc;
    cc.base.rounds = 2;
    cc.base.batch_size = 8;
    cc.base.exploratory = 1;
    cc.base.committee_size = 4;
    cc.base.initial_size = 12;
    cc.base.cv_k = 4;
    cc.base.train.epochs = 40;
    cc.strategies = {Strategy::QBag, Strategy::Random};
    cc.seeds = {1, 2};
    cc.oracle.kind = OracleKind::Synthetic2d;
    cc.dimension = 2;
    cc.grid_resolution = 15;
    cc.test_size = 40;
    cc.master_seed = master_seed;
    return cc;
}

}  // namespace

TEST_CASE("make_test_set holds points out of the pool") {
    auto pool = build_grid_pool(2, 21);
    const std::size_t before = pool.unlabeled.size();
    SyntheticOracle oracle(OracleKind::Synthetic2d);
    TestSet test = make_test_set(pool, 50, oracle, 3);
    CHECK(test.instances.size() == 50);
    CHECK(pool.unlabeled.size() == before - 50);
    std::set<long> pool_ids;
    for (const auto& up : pool.unlabeled) pool_ids.insert(up.id);
    for (const auto& t : test.instances) {
        CHECK(pool_ids.count(t.id) == 0);
        CHECK(t.label == synthetic2d_label(t.features));
    }
}

TEST_CASE("evaluate scores the majority vote against stored labels") {
    auto pool = build_grid_pool(2, 21);
    SyntheticOracle oracle(OracleKind::Synthetic2d);
    TestSet test = make_test_set(pool, 80, oracle, 9);

    // A constant-class committee scores exactly that class's prevalence,
    // counted by enumeration.
    for (int cls = 0; cls < 5; ++cls) {
        long prevalence = 0;
        for (const auto& t : test.instances)
            if (t.label == cls) ++prevalence;
        Committee c = constant_committee(cls, 5, 6);
        CHECK(evaluate(c, test) ==
              doctest::Approx(static_cast<double>(prevalence) / 80.0).epsilon(1e-12));
    }

    // A committee that memorizes the oracle scores 1.0.
    TestSet tiny;
    tiny.instances = {test.instances[0]};
    Committee perfect = constant_committee(test.instances[0].label, 5, 6);
    CHECK(evaluate(perfect, tiny) == 1.0);

    CHECK_THROWS_AS(evaluate(perfect, TestSet{}), DomainError);
}

TEST_CASE("quantile interpolates order statistics") {
    std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    CHECK(quantile(v, 0.0) == 1.0);
    CHECK(quantile(v, 1.0) == 4.0);
    CHECK(quantile(v, 0.5) == doctest::Approx(2.5));
    CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
    CHECK(quantile(v, 0.75) == doctest::Approx(3.25));
    CHECK(quantile({7.0}, 0.25) == 7.0);

    // Reference check against a second implementation on random data.
    Rng rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> sample;
        const int n = 1 + static_cast<int>(rng.uniform_below(20));
        for (int i = 0; i < n; ++i) sample.push_back(rng.uniform01());
        std::vector<double> sorted = sample;
        std::sort(sorted.begin(), sorted.end());
        for (double q : {0.25, 0.5, 0.75}) {
            const double pos = q * (n - 1);
            const auto lo = static_cast<std::size_t>(pos);
            const double expected =
                lo + 1 < sorted.size()
                    ? sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo])
                    : sorted.back();
            CHECK(quantile(sample, q) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("aggregation orders quartiles around the median") {
    AccuracyCurve curve;
    for (std::uint64_t s = 1; s <= 5; ++s)
        curve.raw.push_back({Strategy::QBag, s, 1, 52, 0.5 + 0.05 * static_cast<double>(s)});
    aggregate_curve(curve);
    REQUIRE(curve.agg.size() == 1);
    CHECK(curve.agg[0].labels == 52);
    CHECK(curve.agg[0].runs == 5);
    CHECK(curve.agg[0].q25 <= curve.agg[0].median);
    CHECK(curve.agg[0].median <= curve.agg[0].q75);
    CHECK(curve.agg[0].median == doctest::Approx(0.65));
}

TEST_CASE("labels_to_reach finds the first crossing") {
    std::vector<AccuracyCurve::Raw> raw{
        {Strategy::QBag, 1, 0, 20, 0.6},
        {Strategy::QBag, 1, 1, 52, 0.9},
        {Strategy::QBag, 1, 2, 84, 0.96},
        {Strategy::Random, 1, 2, 84, 0.8},
    };
    CHECK(labels_to_reach(raw, Strategy::QBag, 1, 0.95) == 84.0);
    CHECK(labels_to_reach(raw, Strategy::QBag, 1, 0.7) == 52.0);
    CHECK(std::isinf(labels_to_reach(raw, Strategy::Random, 1, 0.95)));
}

TEST_CASE("run_comparison matches initial pools across strategies") {
    auto cc = small_comparison(77);
    auto result = run_comparison(cc);
    CHECK(result.curve.complete);
    REQUIRE(result.runs.size() == 4);

    // Every run has stage-0 plus two round records; labels increase.
    for (const auto& run : result.runs) {
        REQUIRE(run.completed);
        REQUIRE(run.records.size() == 3);
        long prev = -1;
        for (const auto& rec : run.records) {
            CHECK(rec.labels_total > prev);
            prev = rec.labels_total;
            CHECK(rec.test_accuracy >= 0.0);
            CHECK(rec.test_accuracy <= 1.0);
        }
    }

    // Matched initial pools per seed across strategies.
    for (std::uint64_t seed : {1ull, 2ull}) {
        std::vector<std::set<long>> initials;
        for (const auto& run : result.runs) {
            if (run.seed != seed) continue;
            std::set<long> ids;
            for (const auto& li : run.pool.labeled)
                if (li.provenance == Provenance::Initial) ids.insert(li.id);
            initials.push_back(ids);
        }
        REQUIRE(initials.size() == 2);
        CHECK(initials[0] == initials[1]);
    }

    // Purity: no test instance is ever queried.
    std::set<long> test_ids;
    for (const auto& t : result.test.instances) test_ids.insert(t.id);
    for (const auto& run : result.runs)
        for (const auto& li : run.pool.labeled) CHECK(test_ids.count(li.id) == 0);

    // Raw rows exist for every (strategy, seed, round).
    CHECK(result.curve.raw.size() == 4 * 3);
}

TEST_CASE("export_map rasterizes committees and oracles") {
    Committee c2 = constant_committee(3, 5, 4);
    std::ostringstream out;
    export_map(out, c2, 2, std::nullopt);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "x1,x2,label");
    int rows = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 4);

    std::ostringstream bad;
    CHECK_THROWS_AS(export_map(bad, c2, 2, MapSlice{2, 0.5}), ConfigError);

    // A 3d committee needs a slice.
    Committee c3 = constant_committee(1, 5, 4);
    for (auto& m : c3.members) {
        m.input_dim = 3;
        m.w1.assign(static_cast<std::size_t>(m.hidden_units) * 3, 0.0);
    }
    CHECK_THROWS_AS(export_map(bad, c3, 2, std::nullopt), ConfigError);
    std::ostringstream ok;
    export_map(ok, c3, 3, MapSlice{2, 0.5});
    std::istringstream in3(ok.str());
    std::getline(in3, line);
    CHECK(line == "x1,x2,x3,label");
    rows = 0;
    while (std::getline(in3, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 9);

    // Oracle raster at the full published resolution: 101^2 rows.
    SyntheticOracle oracle(OracleKind::Synthetic2d);
    std::ostringstream omap;
    export_oracle_map(omap, oracle, 2, 101, std::nullopt);
    std::istringstream oin(omap.str());
    std::getline(oin, line);
    rows = 0;
    while (std::getline(oin, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 10201);
}

TEST_CASE("curve CSV writers emit the documented headers") {
    AccuracyCurve curve;
    curve.raw.push_back({Strategy::QBag, 1, 0, 20, 0.5});
    aggregate_curve(curve);

    std::ostringstream raw;
    write_curves_raw_csv(raw, curve, "cafe0123");
    CHECK(raw.str().rfind("# config=cafe0123\nstrategy,seed,round,labels,accuracy\n", 0) == 0);

    std::ostringstream agg;
    write_curves_agg_csv(agg, curve, "cafe0123");
    CHECK(agg.str().find("strategy,round,labels,median,q25,q75") != std::string::npos);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>
#include <sstream>

#include "qbag/ensemble.hpp"
#include "qbag/errors.hpp"
#include "qbag/rng.hpp"

using namespace qbag;

namespace {

LabeledInstance inst(long id, std::vector<double> coords, int label) {
    return LabeledInstance{id, FeatureVector{std::move(coords)}, label, Provenance::Initial, 0};
}

std::vector<LabeledInstance> two_cluster_set(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledInstance> data;
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        const double cx = label == 0 ? 0.2 : 0.8;
        data.push_back(inst(i, {cx + 0.08 * (rng.uniform01() - 0.5), rng.uniform01()}, label));
    }
    return data;
}

// Member with zero first layer: its output distribution is softmax(b2),
// constant over the whole feature space.
MlpModel constant_member(const std::vector<double>& output_bias) {
    MlpModel m = make_random_model(2, 2, static_cast<int>(output_bias.size()), 1);
    std::fill(m.w1.begin(), m.w1.end(), 0.0);
    std::fill(m.b1.begin(), m.b1.end(), 0.0);
    std::fill(m.w2.begin(), m.w2.end(), 0.0);
    m.b2 = output_bias;
    return m;
}

// Predicts class 1 exactly on {x0 > 0.5}, class 0 elsewhere.
MlpModel half_plane_member() {
    MlpModel m = constant_member({0.0, 0.0});
    m.w1 = {1.0, 0.0, 0.0, 0.0};      // hidden0 = relu(x0)
    m.w2 = {0.0, 0.0, 4.0, 0.0};      // logit1 = 4 relu(x0) - 2
    m.b2 = {0.0, -2.0};
    return m;
}

Committee committee_of(std::vector<MlpModel> members) {
    Committee c;
    c.n_c = static_cast<int>(members.size());
    c.m_c = 0;
    c.num_classes = members.front().output_dim;
    c.member_seeds.assign(members.size(), 0);
    c.members = std::move(members);
    return c;
}

}  // namespace

TEST_CASE("bootstrap subsamples are deterministic draws with replacement") {
    auto data = two_cluster_set(20, 3);
    auto a = bootstrap_subsamples(data, 5, 20, 42);
    auto b = bootstrap_subsamples(data, 5, 20, 42);
    REQUIRE(a.size() == 5);
    for (std::size_t t = 0; t < a.size(); ++t) {
        REQUIRE(a[t].size() == 20);
        for (std::size_t j = 0; j < 20; ++j) CHECK(a[t][j].id == b[t][j].id);
    }

    auto single = bootstrap_subsamples({data[0]}, 3, 7, 1);
    for (const auto& sub : single) {
        REQUIRE(sub.size() == 7);
        for (const auto& s : sub) CHECK(s.id == data[0].id);
    }

    CHECK_THROWS_AS(bootstrap_subsamples({}, 3, 7, 1), DomainError);
    CHECK_THROWS_AS(bootstrap_subsamples(data, 1, 7, 1), ConfigError);
}

TEST_CASE("bootstrap coverage matches the analytic value") {
    auto data = two_cluster_set(20, 5);
    double fraction_sum = 0.0;
    const int trials = 10000;
    Rng seed_stream(99);
    for (int trial = 0; trial < trials; ++trial) {
        auto subs = bootstrap_subsamples(data, 2, 20, seed_stream.next_u64());
        std::set<long> distinct;
        for (const auto& s : subs[0]) distinct.insert(s.id);
        fraction_sum += static_cast<double>(distinct.size()) / 20.0;
    }
    const double mean = fraction_sum / trials;
    // 1 - (19/20)^20
    CHECK(mean == doctest::Approx(0.6415).epsilon(0.016));
}

TEST_CASE("a two-member committee learns two separable points") {
    std::vector<LabeledInstance> data{inst(0, {0.1, 0.5}, 0), inst(1, {0.9, 0.5}, 1)};
    TrainConfig cfg;
    cfg.rng_seed = 4;
    // Both members see both points; a 2-draw bootstrap can lose one.
    Committee c = train_committee_on({data, data}, 2, 2, cfg, {4, 5});
    REQUIRE(c.members.size() == 2);
    for (const auto& m : c.members) CHECK(accuracy_on(m, data) == 1.0);
}

TEST_CASE("identical subsamples and seeds collapse to a single model") {
    auto data = two_cluster_set(14, 9);
    TrainConfig cfg;
    cfg.rng_seed = 31;

    std::vector<std::vector<LabeledInstance>> identity(4, data);
    std::vector<std::uint64_t> seeds(4, cfg.rng_seed);
    Committee c = train_committee_on(identity, 4, 2, cfg, seeds);

    MlpModel single = train(data, 4, 2, cfg);
    Rng rng(71);
    for (int rep = 0; rep < 50; ++rep) {
        FeatureVector x{{rng.uniform01(), rng.uniform01()}};
        CHECK(committee_predict(c, x) == predict(single, x));
        for (const auto& m : c.members) CHECK(predict(m, x) == predict(single, x));
    }
}

TEST_CASE("vote tallies always sum to the committee size") {
    auto data = two_cluster_set(12, 13);
    TrainConfig cfg;
    cfg.epochs = 40;
    cfg.rng_seed = 7;
    Committee c = train_committee(data, 4, 5, 0, 2, cfg);
    Rng rng(5);
    for (int rep = 0; rep < 100; ++rep) {
        auto vote = committee_vote(c, FeatureVector{{rng.uniform01(), rng.uniform01()}});
        int sum = 0;
        for (int v : vote.tally.counts) sum += v;
        CHECK(sum == 5);
    }
}

TEST_CASE("committee ties break by summed probability") {
    std::vector<MlpModel> members;
    for (int i = 0; i < 10; ++i) members.push_back(constant_member({0.3, 0.0}));
    for (int i = 0; i < 10; ++i) members.push_back(constant_member({0.0, 0.9}));
    Committee c = committee_of(std::move(members));

    FeatureVector x{{0.5, 0.5}};
    auto vote = committee_vote(c, x);
    CHECK(vote.tally.counts == std::vector<int>{10, 10});
    // The class-1 members are more confident than the class-0 members.
    CHECK(vote.prob_sum[1] > vote.prob_sum[0]);
    CHECK(committee_predict(c, x) == 1);
}

TEST_CASE("unanimous committees agree everywhere and have empty D") {
    std::vector<MlpModel> members(6, constant_member({1.0, 0.0, 0.0}));
    Committee c = committee_of(std::move(members));
    auto pool = build_grid_pool(2, 7);
    CHECK(committee_predict(c, pool.unlabeled[3].features) == 0);
    CHECK(disagreement_region(c, pool.unlabeled).empty());
    CHECK(disagreement_region(c, {}).empty());
}

TEST_CASE("an evenly split committee disagrees exactly on the split region") {
    Committee c = committee_of({half_plane_member(), constant_member({0.0, 0.0})});
    // The constant member emits (0.5, 0.5) and votes class 0 by the tie rule.
    auto pool = build_grid_pool(2, 9);
    auto votes = committee_votes_over(c, pool.unlabeled);
    auto d_idx = disagreement_indices(votes);
    std::set<long> in_d;
    for (int i : d_idx) in_d.insert(pool.unlabeled[static_cast<std::size_t>(i)].id);
    for (const auto& up : pool.unlabeled) {
        const bool expected = up.features[0] > 0.5;
        CHECK(in_d.count(up.id) == (expected ? 1u : 0u));
    }
}

TEST_CASE("threshold sweep brackets the disagreement region") {
    auto data = two_cluster_set(10, 17);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.rng_seed = 3;
    Committee c = train_committee(data, 2, 4, 0, 2, cfg);
    auto pool = build_grid_pool(2, 6);
    auto votes = committee_votes_over(c, pool.unlabeled);
    CHECK(region_indices_with_threshold(votes, c.n_c).size() == pool.unlabeled.size());
    CHECK(region_indices_with_threshold(votes, 0).empty());
}

TEST_CASE("the voting filter flags a planted flip and nothing else") {
    auto data = two_cluster_set(60, 21);
    TrainConfig cfg;
    cfg.rng_seed = 8;

    Committee clean = train_committee(data, 8, 10, 0, 2, cfg);
    CHECK(flag_suspect_labels(clean, data).empty());
    CHECK(flag_suspect_labels(clean, {}).empty());

    auto poisoned = data;
    poisoned[24].label = 1 - poisoned[24].label;
    Committee c = train_committee(poisoned, 8, 10, 0, 2, cfg);
    auto flagged = flag_suspect_labels(c, poisoned);
    REQUIRE(flagged.size() >= 1);
    bool found = false;
    for (const auto& f : flagged) found = found || f.id == poisoned[24].id;
    CHECK(found);
    CHECK(flagged.size() <= 2);
}

TEST_CASE("committee serialization round-trips bit-exactly") {
    auto data = two_cluster_set(10, 25);
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.rng_seed = 12;
    Committee c = train_committee(data, 4, 3, 5, 2, cfg);

    std::ostringstream out;
    save_committee(out, c);
    std::istringstream in(out.str());
    Committee back = load_committee(in);

    CHECK(back.n_c == c.n_c);
    CHECK(back.m_c == c.m_c);
    CHECK(back.num_classes == c.num_classes);
    CHECK(back.member_seeds == c.member_seeds);
    REQUIRE(back.members.size() == c.members.size());
    for (std::size_t t = 0; t < c.members.size(); ++t) {
        CHECK(back.members[t].w1 == c.members[t].w1);
        CHECK(back.members[t].b1 == c.members[t].b1);
        CHECK(back.members[t].w2 == c.members[t].w2);
        CHECK(back.members[t].b2 == c.members[t].b2);
    }
}

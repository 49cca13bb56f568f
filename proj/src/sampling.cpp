#include "qbag/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qbag/errors.hpp"
#include "qbag/kernels.hpp"
#include "qbag/rng.hpp"

namespace qbag {

std::string_view strategy_name(Strategy s) {
    switch (s) {
        case Strategy::QBag: return "qbag";
        case Strategy::Random: return "random";
        case Strategy::Entropy: return "entropy";
    }
    return "qbag";
}

Strategy strategy_from_name(std::string_view name) {
    if (name == "qbag") return Strategy::QBag;
    if (name == "random") return Strategy::Random;
    if (name == "entropy") return Strategy::Entropy;
    throw ConfigError("unknown strategy: '" + std::string(name) + "'");
}

MaxMinSelection max_min_select(int n, std::span<const FeatureVector* const> candidates,
                               std::span<const FeatureVector* const> anchors) {
    MaxMinSelection sel;
    if (n <= 0) return sel;
    const std::size_t m = candidates.size();
    if (static_cast<std::size_t>(n) > m) {
        sel.shortfall = n - static_cast<int>(m);
        n = static_cast<int>(m);
    }

    // Min squared distance from each candidate to the anchor set; +inf when
    // there are no anchors yet, which makes the first pick a pure tie-break.
    std::vector<double> min_d2(m, std::numeric_limits<double>::infinity());
    for (const FeatureVector* a : anchors)
        kernels::min_sqdist_update(candidates, *a, min_d2.data());

    std::vector<char> alive(m, 1);
    sel.picked.reserve(static_cast<std::size_t>(n));
    sel.achieved_distance.reserve(static_cast<std::size_t>(n));

    for (int t = 0; t < n; ++t) {
        int best = -1;
        for (std::size_t i = 0; i < m; ++i) {
            if (!alive[i]) continue;
            if (best < 0 || min_d2[i] > min_d2[static_cast<std::size_t>(best)] ||
                (min_d2[i] == min_d2[static_cast<std::size_t>(best)] &&
                 lex_less(*candidates[i], *candidates[static_cast<std::size_t>(best)])))
                best = static_cast<int>(i);
        }
        alive[static_cast<std::size_t>(best)] = 0;
        sel.picked.push_back(best);
        sel.achieved_distance.push_back(std::sqrt(min_d2[static_cast<std::size_t>(best)]));
        if (t + 1 < n)
            kernels::min_sqdist_update(candidates, *candidates[static_cast<std::size_t>(best)],
                                       min_d2.data());
    }
    return sel;
}

MaxMinResult max_min_sample(int n, const std::vector<FeatureVector>& candidates,
                            const std::vector<FeatureVector>& anchors) {
    std::vector<const FeatureVector*> cand_ptrs, anchor_ptrs;
    cand_ptrs.reserve(candidates.size());
    for (const auto& c : candidates) cand_ptrs.push_back(&c);
    anchor_ptrs.reserve(anchors.size());
    for (const auto& a : anchors) anchor_ptrs.push_back(&a);

    auto sel = max_min_select(n, cand_ptrs, anchor_ptrs);
    MaxMinResult result;
    result.shortfall = sel.shortfall;
    result.picks.reserve(sel.picked.size());
    for (int i : sel.picked) result.picks.push_back(candidates[static_cast<std::size_t>(i)]);
    return result;
}

namespace {

std::vector<Pick> picks_from_indices(const Pool& pool, const std::vector<int>& pool_indices) {
    std::vector<Pick> picks;
    picks.reserve(pool_indices.size());
    for (int i : pool_indices) {
        const auto& up = pool.unlabeled[static_cast<std::size_t>(i)];
        picks.push_back(Pick{up.id, up.features});
    }
    return picks;
}

}  // namespace

BatchPlan qbag_batch(const Pool& pool, const std::vector<PointVote>& votes, int n_b, int n_e,
                     bool anchor_includes_batch) {
    if (n_e < 0 || n_e > n_b) throw ConfigError("qbag_batch: need 0 <= n_e <= n_b");
    if (static_cast<std::size_t>(n_b) > pool.unlabeled.size())
        throw PoolExhausted("qbag_batch: batch of " + std::to_string(n_b) +
                            " requested but only " + std::to_string(pool.unlabeled.size()) +
                            " unlabeled points remain");
    if (votes.size() != pool.unlabeled.size())
        throw DomainError("qbag_batch: vote list does not match the unlabeled pool");

    std::vector<int> d_idx = disagreement_indices(votes);
    std::vector<char> in_d(pool.unlabeled.size(), 0);
    for (int i : d_idx) in_d[static_cast<std::size_t>(i)] = 1;
    std::vector<int> rest_idx;
    rest_idx.reserve(pool.unlabeled.size() - d_idx.size());
    for (std::size_t i = 0; i < pool.unlabeled.size(); ++i)
        if (!in_d[i]) rest_idx.push_back(static_cast<int>(i));

    // Spend the full budget: prefer n_b - n_e from D and n_e from outside,
    // then fill any shortfall from whichever side still has points.
    int q_take = std::min(n_b - n_e, static_cast<int>(d_idx.size()));
    int e_take = std::min(n_e, static_cast<int>(rest_idx.size()));
    int spare = n_b - q_take - e_take;
    if (spare > 0) {
        int grow = std::min(spare, static_cast<int>(rest_idx.size()) - e_take);
        e_take += grow;
        spare -= grow;
    }
    if (spare > 0) {
        q_take += std::min(spare, static_cast<int>(d_idx.size()) - q_take);
    }

    std::vector<const FeatureVector*> anchors;
    anchors.reserve(pool.labeled.size() + static_cast<std::size_t>(q_take));
    for (const auto& li : pool.labeled) anchors.push_back(&li.features);

    std::vector<const FeatureVector*> d_ptrs;
    d_ptrs.reserve(d_idx.size());
    for (int i : d_idx) d_ptrs.push_back(&pool.unlabeled[static_cast<std::size_t>(i)].features);

    BatchPlan plan;
    plan.strategy = Strategy::QBag;
    auto q_sel = max_min_select(q_take, d_ptrs, anchors);
    std::vector<int> q_pool_indices;
    for (int i : q_sel.picked)
        q_pool_indices.push_back(d_idx[static_cast<std::size_t>(i)]);
    plan.disagreement_picks = picks_from_indices(pool, q_pool_indices);

    if (anchor_includes_batch)
        for (int i : q_pool_indices)
            anchors.push_back(&pool.unlabeled[static_cast<std::size_t>(i)].features);

    std::vector<const FeatureVector*> rest_ptrs;
    rest_ptrs.reserve(rest_idx.size());
    for (int i : rest_idx)
        rest_ptrs.push_back(&pool.unlabeled[static_cast<std::size_t>(i)].features);

    auto e_sel = max_min_select(e_take, rest_ptrs, anchors);
    std::vector<int> e_pool_indices;
    for (int i : e_sel.picked)
        e_pool_indices.push_back(rest_idx[static_cast<std::size_t>(i)]);
    plan.exploratory_picks = picks_from_indices(pool, e_pool_indices);

    plan.shortfall = n_b - plan.total();
    return plan;
}

BatchPlan random_batch(const Pool& pool, int n_b, std::uint64_t seed) {
    if (static_cast<std::size_t>(n_b) > pool.unlabeled.size())
        throw PoolExhausted("random_batch: batch of " + std::to_string(n_b) +
                            " requested but only " + std::to_string(pool.unlabeled.size()) +
                            " unlabeled points remain");
    std::vector<int> idx(pool.unlabeled.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (int i = 0; i < n_b; ++i) {
        std::size_t j = static_cast<std::size_t>(i) +
                        static_cast<std::size_t>(rng.uniform_below(idx.size() - static_cast<std::size_t>(i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
    }
    idx.resize(static_cast<std::size_t>(n_b));

    BatchPlan plan;
    plan.strategy = Strategy::Random;
    plan.disagreement_picks = picks_from_indices(pool, idx);
    return plan;
}

double shannon_entropy(std::span<const double> proba) {
    double h = 0.0;
    for (double p : proba)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}

BatchPlan entropy_batch(const Pool& pool, const std::vector<PointVote>& votes, int n_b) {
    if (static_cast<std::size_t>(n_b) > pool.unlabeled.size())
        throw PoolExhausted("entropy_batch: batch of " + std::to_string(n_b) +
                            " requested but only " + std::to_string(pool.unlabeled.size()) +
                            " unlabeled points remain");
    if (votes.size() != pool.unlabeled.size())
        throw DomainError("entropy_batch: vote list does not match the unlabeled pool");

    const double inv_nc = votes.empty() ? 1.0 : 1.0 / votes.front().tally.n_c;
    std::vector<double> score(votes.size());
    std::vector<double> mean(votes.empty() ? 0 : votes.front().prob_sum.size());
    for (std::size_t i = 0; i < votes.size(); ++i) {
        for (std::size_t c = 0; c < mean.size(); ++c) mean[c] = votes[i].prob_sum[c] * inv_nc;
        score[i] = shannon_entropy(mean);
    }

    std::vector<int> idx(votes.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        if (score[static_cast<std::size_t>(a)] != score[static_cast<std::size_t>(b)])
            return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
        return lex_less(pool.unlabeled[static_cast<std::size_t>(a)].features,
                        pool.unlabeled[static_cast<std::size_t>(b)].features);
    });
    idx.resize(static_cast<std::size_t>(n_b));

    BatchPlan plan;
    plan.strategy = Strategy::Entropy;
    plan.disagreement_picks = picks_from_indices(pool, idx);
    return plan;
}

}  // namespace qbag

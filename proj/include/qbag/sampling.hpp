#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "qbag/domain.hpp"
#include "qbag/ensemble.hpp"

namespace qbag {

enum class Strategy { QBag, Random, Entropy };

std::string_view strategy_name(Strategy s);
Strategy strategy_from_name(std::string_view name);

struct Pick {
    long id = -1;
    FeatureVector features;
};

/// One round's selection. Non-qbag strategies place everything in
/// disagreement_picks; exploratory_picks is only populated by qbag.
struct BatchPlan {
    Strategy strategy = Strategy::QBag;
    std::vector<Pick> disagreement_picks;
    std::vector<Pick> exploratory_picks;
    int shortfall = 0;

    int total() const {
        return static_cast<int>(disagreement_picks.size() + exploratory_picks.size());
    }
};

struct MaxMinSelection {
    std::vector<int> picked;              // indices into the candidate span, in pick order
    std::vector<double> achieved_distance;  // min distance to anchors at selection time
    int shortfall = 0;                    // n minus the number actually picked
};

/// Greedy farthest-point selection: each pick maximizes its minimum Euclidean
/// distance to the anchors plus all earlier picks. Distance ties break toward
/// the lexicographically smaller coordinate vector. With no anchors the first
/// pick is the lexicographically smallest candidate. Asking for more points
/// than exist returns them all and reports the shortfall.
MaxMinSelection max_min_select(int n, std::span<const FeatureVector* const> candidates,
                               std::span<const FeatureVector* const> anchors);

struct MaxMinResult {
    std::vector<FeatureVector> picks;
    int shortfall = 0;
};

MaxMinResult max_min_sample(int n, const std::vector<FeatureVector>& candidates,
                            const std::vector<FeatureVector>& anchors);

/// Disagreement picks from D plus exploratory picks from U \ D, rebalanced so
/// the batch always spends its full budget while the pool lasts. `votes` must
/// hold the committee's votes for pool.unlabeled, in order. When
/// anchor_includes_batch is set (the default), exploratory distances also
/// avoid the disagreement picks of the same batch.
BatchPlan qbag_batch(const Pool& pool, const std::vector<PointVote>& votes, int n_b, int n_e,
                     bool anchor_includes_batch = true);

/// Uniform draw without replacement from the unlabeled pool.
BatchPlan random_batch(const Pool& pool, int n_b, std::uint64_t seed);

/// Shannon entropy in bits; 0 log 0 taken as 0.
double shannon_entropy(std::span<const double> proba);

/// Top-n_b unlabeled points by entropy of the committee's mean probability
/// vector; ties toward the lexicographically smaller point.
BatchPlan entropy_batch(const Pool& pool, const std::vector<PointVote>& votes, int n_b);

}  // namespace qbag

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "qbag/domain.hpp"
#include "qbag/mlp.hpp"

namespace qbag {

/// A bagged committee: n_c networks trained on bootstrap resamples of the
/// labeled pool, predicting by majority vote.
struct Committee {
    std::vector<MlpModel> members;
    int n_c = 0;
    int m_c = 0;
    std::vector<std::uint64_t> member_seeds;
    int num_classes = 0;

    int input_dim() const { return members.empty() ? 0 : members.front().input_dim; }
};

/// n_c multisets of m_c draws, i.i.d. uniform with replacement from L.
std::vector<std::vector<LabeledInstance>> bootstrap_subsamples(
    const std::vector<LabeledInstance>& labeled, int n_c, int m_c, std::uint64_t seed);

/// Trains one member per explicitly supplied subsample/seed pair. Members
/// train independently (in parallel when OpenMP is enabled); a diverging
/// member surfaces as TrainingDivergence naming its index.
Committee train_committee_on(const std::vector<std::vector<LabeledInstance>>& subsamples,
                             int hidden_units, int num_classes, const TrainConfig& cfg,
                             const std::vector<std::uint64_t>& member_seeds);

/// Standard path: bootstrap subsamples from cfg.rng_seed, member seeds
/// cfg.rng_seed + member index. m_c <= 0 means |labeled|.
Committee train_committee(const std::vector<LabeledInstance>& labeled, int hidden_units,
                          int n_c, int m_c, int num_classes, const TrainConfig& cfg);

PointVote committee_vote(const Committee& c, const FeatureVector& x);

/// Majority vote; ties by summed probability, then smaller class index.
int committee_predict(const Committee& c, const FeatureVector& x);

bool in_disagreement_region(const Committee& c, const FeatureVector& x);

/// Committee votes for every unlabeled point, in pool order.
std::vector<PointVote> committee_votes_over(const Committee& c,
                                            const std::vector<UnlabeledPoint>& points);

/// Indices into `points` where no class gets more than half the votes.
std::vector<int> disagreement_indices(const std::vector<PointVote>& votes);

/// Same, but against an arbitrary vote-count threshold (max_count <= threshold).
std::vector<int> region_indices_with_threshold(const std::vector<PointVote>& votes,
                                               int threshold);

std::vector<FeatureVector> disagreement_region(const Committee& c,
                                               const std::vector<UnlabeledPoint>& points);

/// Labeled instances whose stored label disagrees with the committee's
/// majority vote. Purely diagnostic.
std::vector<LabeledInstance> flag_suspect_labels(const Committee& c,
                                                 const std::vector<LabeledInstance>& labeled);

void save_committee(std::ostream& out, const Committee& c);
Committee load_committee(std::istream& in);

}  // namespace qbag

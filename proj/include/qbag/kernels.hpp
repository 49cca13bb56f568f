#pragma once

#include <span>
#include <vector>

#include "qbag/domain.hpp"
#include "qbag/mlp.hpp"

namespace qbag::kernels {

// The hot inner loops of the engine: committee sweeps over a pool, min-
// distance updates inside the greedy spacing loop, and test-set scoring.
// Each kernel has a plain serial implementation and an OpenMP one that
// partitions points across threads. Every per-point result is independent
// and integer reductions are order-free, so the two paths produce bitwise
// identical output; tests assert that and the bench target compares their
// speed.

void set_jobs(int jobs);  // 0 = hardware default
int jobs();

/// Votes and per-class probability sums of every member at one point.
void vote_point(std::span<const MlpModel> members, const FeatureVector& x, PointVote& out);

void committee_votes_serial(std::span<const MlpModel> members,
                            std::span<const FeatureVector* const> points,
                            PointVote* out);
void committee_votes_parallel(std::span<const MlpModel> members,
                              std::span<const FeatureVector* const> points,
                              PointVote* out);
std::vector<PointVote> committee_votes(std::span<const MlpModel> members,
                                       std::span<const FeatureVector* const> points);

/// min_d2[i] = min(min_d2[i], ||points[i] - anchor||^2).
void min_sqdist_update_serial(std::span<const FeatureVector* const> points,
                              const FeatureVector& anchor, double* min_d2);
void min_sqdist_update_parallel(std::span<const FeatureVector* const> points,
                                const FeatureVector& anchor, double* min_d2);
void min_sqdist_update(std::span<const FeatureVector* const> points,
                       const FeatureVector& anchor, double* min_d2);

/// Number of instances whose majority-vote prediction matches the stored label.
long count_vote_correct_serial(std::span<const MlpModel> members,
                               std::span<const LabeledInstance> data);
long count_vote_correct_parallel(std::span<const MlpModel> members,
                                 std::span<const LabeledInstance> data);
long count_vote_correct(std::span<const MlpModel> members,
                        std::span<const LabeledInstance> data);

}  // namespace qbag::kernels

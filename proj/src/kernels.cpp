#include "qbag/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qbag::kernels {

namespace {
int g_jobs = 0;
}

void set_jobs(int j) {
    g_jobs = j < 0 ? 0 : j;
#ifdef _OPENMP
    if (g_jobs > 0) omp_set_num_threads(g_jobs);
#endif
}

int jobs() {
#ifdef _OPENMP
    return g_jobs > 0 ? g_jobs : omp_get_max_threads();
#else
    return 1;
#endif
}

void vote_point(std::span<const MlpModel> members, const FeatureVector& x, PointVote& out) {
    const int k = members.front().output_dim;
    out.tally.counts.assign(static_cast<std::size_t>(k), 0);
    out.tally.n_c = static_cast<int>(members.size());
    out.prob_sum.assign(static_cast<std::size_t>(k), 0.0);

    thread_local std::vector<double> hidden, proba;
    for (const auto& m : members) {
        hidden.resize(static_cast<std::size_t>(m.hidden_units));
        proba.resize(static_cast<std::size_t>(k));
        mlp_forward(m, x.coords.data(), hidden.data(), proba.data());
        int best = 0;
        for (int c = 1; c < k; ++c)
            if (proba[static_cast<std::size_t>(c)] > proba[static_cast<std::size_t>(best)])
                best = c;
        ++out.tally.counts[static_cast<std::size_t>(best)];
        for (int c = 0; c < k; ++c)
            out.prob_sum[static_cast<std::size_t>(c)] += proba[static_cast<std::size_t>(c)];
    }
}

void committee_votes_serial(std::span<const MlpModel> members,
                            std::span<const FeatureVector* const> points, PointVote* out) {
    for (std::size_t i = 0; i < points.size(); ++i) vote_point(members, *points[i], out[i]);
}

void committee_votes_parallel(std::span<const MlpModel> members,
                              std::span<const FeatureVector* const> points, PointVote* out) {
    const std::int64_t n = static_cast<std::int64_t>(points.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i)
        vote_point(members, *points[static_cast<std::size_t>(i)],
                   out[static_cast<std::size_t>(i)]);
}

std::vector<PointVote> committee_votes(std::span<const MlpModel> members,
                                       std::span<const FeatureVector* const> points) {
    std::vector<PointVote> votes(points.size());
    committee_votes_parallel(members, points, votes.data());
    return votes;
}

void min_sqdist_update_serial(std::span<const FeatureVector* const> points,
                              const FeatureVector& anchor, double* min_d2) {
    for (std::size_t i = 0; i < points.size(); ++i)
        min_d2[i] = std::min(min_d2[i], squared_distance(*points[i], anchor));
}

void min_sqdist_update_parallel(std::span<const FeatureVector* const> points,
                                const FeatureVector& anchor, double* min_d2) {
    const std::int64_t n = static_cast<std::int64_t>(points.size());
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < n; ++i) {
        const std::size_t s = static_cast<std::size_t>(i);
        min_d2[s] = std::min(min_d2[s], squared_distance(*points[s], anchor));
    }
}

void min_sqdist_update(std::span<const FeatureVector* const> points, const FeatureVector& anchor,
                       double* min_d2) {
    min_sqdist_update_parallel(points, anchor, min_d2);
}

namespace {

long vote_correct_at(std::span<const MlpModel> members, const LabeledInstance& inst) {
    thread_local PointVote v;
    vote_point(members, inst.features, v);
    return vote_winner(v) == inst.label ? 1 : 0;
}

}  // namespace

long count_vote_correct_serial(std::span<const MlpModel> members,
                               std::span<const LabeledInstance> data) {
    long correct = 0;
    for (const auto& inst : data) correct += vote_correct_at(members, inst);
    return correct;
}

long count_vote_correct_parallel(std::span<const MlpModel> members,
                                 std::span<const LabeledInstance> data) {
    const std::int64_t n = static_cast<std::int64_t>(data.size());
    long correct = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : correct)
#endif
    for (std::int64_t i = 0; i < n; ++i)
        correct += vote_correct_at(members, data[static_cast<std::size_t>(i)]);
    return correct;
}

long count_vote_correct(std::span<const MlpModel> members,
                        std::span<const LabeledInstance> data) {
    return count_vote_correct_parallel(members, data);
}

}  // namespace qbag::kernels
